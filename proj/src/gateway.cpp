#include "rmiat/gateway.hpp"

#include "rmiat/util.hpp"

namespace rmiat {

std::string_view to_string(Backend b) {
  switch (b) {
    case Backend::Remote:
      return "remote";
    case Backend::Simulator:
      return "simulator";
    case Backend::Replay:
      return "replay";
  }
  return "unknown";
}

Backend parse_backend(std::string_view text) {
  if (text == "remote") return Backend::Remote;
  if (text == "simulator" || text == "sim") return Backend::Simulator;
  if (text == "replay") return Backend::Replay;
  throw std::invalid_argument("unknown backend \"" + std::string(text) + "\"");
}

Json result_to_json(const CompletionResult& r) {
  return Json{{"output_text", r.output_text},         {"reasoning_tokens", r.reasoning_tokens},
              {"output_tokens", r.output_tokens},     {"latency_ms", r.latency_ms},
              {"backend_tag", to_string(r.backend)}, {"raw_usage", r.raw_usage}};
}

CompletionResult result_from_json(const Json& j) {
  CompletionResult r;
  r.output_text = j.at("output_text").get<std::string>();
  r.reasoning_tokens = j.at("reasoning_tokens").get<int64_t>();
  r.output_tokens = j.at("output_tokens").get<int64_t>();
  r.latency_ms = j.at("latency_ms").get<double>();
  r.backend = parse_backend(j.at("backend_tag").get<std::string>());
  r.raw_usage = j.value("raw_usage", Json::object());
  return r;
}

Json build_chat_request(std::string_view prompt_text, const ModelConfig& config) {
  Json req{{"model", config.model},
           {"messages", Json::array({Json{{"role", "user"}, {"content", std::string(prompt_text)}}})}};
  if (config.reasoning_effort) req["reasoning_effort"] = *config.reasoning_effort;
  return req;
}

CompletionResult parse_chat_response(std::string_view body) {
  const std::string raw(body);
  Json doc;
  try {
    doc = Json::parse(body);
  } catch (const Json::parse_error& e) {
    throw MalformedUsageError(std::string("response is not JSON: ") + e.what(), raw);
  }
  const Json* content = nullptr;
  if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
    const Json& choice = doc["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      content = &choice["message"]["content"];
    }
  }
  if (!content) throw MalformedUsageError("response lacks choices[0].message.content", raw);

  if (!doc.contains("usage") || !doc["usage"].is_object()) {
    throw MalformedUsageError("response lacks usage", raw);
  }
  const Json& usage = doc["usage"];
  if (!usage.contains("completion_tokens_details") || !usage["completion_tokens_details"].is_object() ||
      !usage["completion_tokens_details"].contains("reasoning_tokens") ||
      !usage["completion_tokens_details"]["reasoning_tokens"].is_number_integer()) {
    throw MalformedUsageError("usage lacks completion_tokens_details.reasoning_tokens", raw);
  }
  const int64_t reasoning = usage["completion_tokens_details"]["reasoning_tokens"].get<int64_t>();
  if (reasoning < 0) throw MalformedUsageError("negative reasoning_tokens", raw);
  if (!usage.contains("completion_tokens") || !usage["completion_tokens"].is_number_integer()) {
    throw MalformedUsageError("usage lacks completion_tokens", raw);
  }

  CompletionResult r;
  r.output_text = content->get<std::string>();
  r.reasoning_tokens = reasoning;
  r.output_tokens = usage["completion_tokens"].get<int64_t>();
  r.backend = Backend::Remote;
  r.raw_usage = usage;
  return r;
}

void validate_profile(const SimProfile& p) {
  for (const ConditionParams* c : {&p.compatible, &p.incompatible}) {
    if (!(c->sigma > 0.0)) throw std::invalid_argument("profile sigma must be > 0");
    if (!(c->refusal_probability >= 0.0 && c->refusal_probability <= 1.0)) {
      throw std::invalid_argument("refusal_probability must be in [0, 1]");
    }
  }
  if (p.quantum < 1) throw std::invalid_argument("quantum must be >= 1");
  if (!(p.refusal_token_inflation > 0.0)) throw std::invalid_argument("refusal_token_inflation must be > 0");
}

Json profile_to_json(const SimProfile& p) {
  auto cond = [](const ConditionParams& c) {
    return Json{{"mu", c.mu}, {"sigma", c.sigma}, {"refusal_probability", c.refusal_probability}};
  };
  return Json{{"compatible", cond(p.compatible)},
              {"incompatible", cond(p.incompatible)},
              {"refusal_token_inflation", p.refusal_token_inflation},
              {"quantum", p.quantum}};
}

SimProfile profile_from_json(const Json& j) {
  auto cond = [](const Json& c) {
    return ConditionParams{c.at("mu").get<double>(), c.at("sigma").get<double>(),
                           c.value("refusal_probability", 0.0)};
  };
  SimProfile p;
  p.compatible = cond(j.at("compatible"));
  p.incompatible = cond(j.at("incompatible"));
  p.refusal_token_inflation = j.value("refusal_token_inflation", 1.0);
  p.quantum = j.value("quantum", int64_t{64});
  validate_profile(p);
  return p;
}

ReplaySource::ReplaySource(std::string_view fixture_jsonl) {
  size_t line_no = 0;
  for (const auto& line : split(fixture_jsonl, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      Json rec = Json::parse(line);
      const std::string content = rec.at("request").at("messages").at(0).at("content").get<std::string>();
      const Json& response = rec.at("response");
      responses_[sha256_hex(content)] = response.is_string() ? response.get<std::string>() : response.dump();
    } catch (const std::exception& e) {
      throw std::runtime_error("fixture line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

ReplaySource ReplaySource::from_file(const std::string& path) { return ReplaySource(read_file(path)); }

CompletionResult ReplaySource::complete(const RenderedPrompt& prompt) {
  auto it = responses_.find(sha256_hex(prompt.text));
  if (it == responses_.end()) throw GatewayError("no fixture recorded for prompt of " + trial_identity(prompt.key));
  CompletionResult r = parse_chat_response(it->second);
  r.backend = Backend::Replay;
  return r;
}

}  // namespace rmiat
