#pragma once

#include <nlohmann/json.hpp>

namespace rmiat {
// Insertion-ordered so that every emitted document has a stable field order.
using Json = nlohmann::ordered_json;
}  // namespace rmiat
