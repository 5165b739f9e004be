#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rmiat {

// Lowercase hex SHA-256 of the bytes in `data`.
std::string sha256_hex(std::string_view data);

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

// UTC timestamp, e.g. 2025-02-01T12:00:00Z.
std::string utc_timestamp();

// RFC 4180 field quoting: only quotes when needed.
std::string csv_field(std::string_view s);
std::string csv_row(std::span<const std::string> fields);

// Rounds to six significant digits; used for every number written to fits.json.
double round_sig6(double value);

// Reads a whole file; throws std::runtime_error naming the path on failure.
std::string read_file(const std::string& path);
// Writes via a temporary sibling and rename.
void write_file_atomic(const std::string& path, std::string_view contents);

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace rmiat
