#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <thread>

#include "rmiat/gateway.hpp"
#include "rmiat/util.hpp"

namespace rmiat {

namespace {

std::mutex g_fixture_mu;

void split_endpoint(const std::string& url, std::string& base, std::string& path) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  base = path_start == std::string::npos ? url : url.substr(0, path_start);
  path = path_start == std::string::npos ? "/" : url.substr(path_start);
}

bool retryable_status(int status) { return status == 429 || status == 408 || status >= 500; }

}  // namespace

RateLimiter::RateLimiter(double per_second) {
  if (per_second > 0.0) {
    interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / per_second));
  }
}

void RateLimiter::acquire() {
  if (interval_.count() == 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

RemoteSource::RemoteSource(RemoteConfig config)
    : config_(std::move(config)), limiter_(config_.max_requests_per_second) {
  if (config_.api_key.empty()) {
    throw AuthError("no API key: set the environment variable " + config_.api_key_env);
  }
  split_endpoint(config_.endpoint, scheme_host_port_, path_);
}

size_t RemoteSource::attempts() const {
  std::lock_guard lock(mu_);
  return attempts_;
}

CompletionResult RemoteSource::complete(const RenderedPrompt& prompt) {
  const Json request = build_chat_request(prompt.text, config_.model);
  const std::string body = request.dump();
  const httplib::Headers headers = {{"Authorization", "Bearer " + config_.api_key}};

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const long long backoff =
          std::min<long long>(config_.max_backoff_ms, static_cast<long long>(config_.initial_backoff_ms) << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
    }
    limiter_.acquire();
    {
      std::lock_guard lock(mu_);
      ++attempts_;
    }

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(std::min(config_.timeout_s, 30), 0);
    client.set_read_timeout(config_.timeout_s, 0);
    client.set_write_timeout(config_.timeout_s, 0);

    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path_, headers, body, "application/json");
    const double latency =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw AuthError("endpoint rejected credentials from " + config_.api_key_env + " (HTTP " +
                      std::to_string(res->status) + ")");
    }
    if (retryable_status(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw GatewayError("HTTP " + std::to_string(res->status) + ": " + res->body);
    }

    CompletionResult r = parse_chat_response(res->body);
    r.latency_ms = latency;

    if (!config_.record_fixtures_path.empty()) {
      Json rec{{"request", request}, {"response", Json::parse(res->body)}};
      std::lock_guard lock(g_fixture_mu);
      std::ofstream out(config_.record_fixtures_path, std::ios::app);
      out << rec.dump() << '\n';
    }
    return r;
  }
  throw RetriesExhaustedError("gave up after " + std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

}  // namespace rmiat
