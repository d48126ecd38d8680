#include "providers.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "util.hpp"

namespace thumbtruth {

using nlohmann::json;

json usage_to_json(const TokenUsage& u) {
  return json{{"input_tokens", u.input_tokens},
              {"output_tokens", u.output_tokens},
              {"image_count", u.image_count},
              {"media_seconds", u.media_seconds}};
}

TokenUsage usage_from_json(const json& j) {
  TokenUsage u;
  if (!j.is_object()) return u;
  u.input_tokens = j.value("input_tokens", std::uint64_t{0});
  u.output_tokens = j.value("output_tokens", std::uint64_t{0});
  u.image_count = j.value("image_count", std::uint64_t{0});
  u.media_seconds = j.value("media_seconds", 0.0);
  return u;
}

std::string_view block_reason_token(BlockReason reason) {
  switch (reason) {
    case BlockReason::ProhibitedContent: return "PROHIBITED_CONTENT";
    case BlockReason::Safety: return "SAFETY";
    case BlockReason::Recitation: return "RECITATION";
    case BlockReason::Other: return "OTHER";
  }
  return "OTHER";
}

BlockReason parse_block_reason(std::string_view token) {
  auto t = to_lower(token);
  if (t == "prohibited_content") return BlockReason::ProhibitedContent;
  if (t == "safety") return BlockReason::Safety;
  if (t == "recitation") return BlockReason::Recitation;
  return BlockReason::Other;
}

ChatOutcome ChatOutcome::ok(std::string text, TokenUsage usage) {
  ChatOutcome o;
  o.status = OutcomeStatus::Ok;
  o.text = std::move(text);
  o.usage = usage;
  return o;
}

ChatOutcome ChatOutcome::blocked(BlockReason reason) {
  ChatOutcome o;
  o.status = OutcomeStatus::Blocked;
  o.block_reason = reason;
  return o;
}

ChatOutcome ChatOutcome::refused(std::string text) {
  ChatOutcome o;
  o.status = OutcomeStatus::Refused;
  o.text = std::move(text);
  return o;
}

ChatOutcome ChatOutcome::transport_error(std::string message, bool retryable) {
  ChatOutcome o;
  o.status = OutcomeStatus::TransportError;
  o.error = std::move(message);
  o.retryable = retryable;
  return o;
}

void ConcurrencyGate::set_limit(std::size_t limit) {
  std::lock_guard lk(m_);
  limit_ = limit == 0 ? 1 : limit;
  cv_.notify_all();
}

void ConcurrencyGate::acquire() {
  std::unique_lock lk(m_);
  cv_.wait(lk, [&] { return in_use_ < limit_; });
  ++in_use_;
}

void ConcurrencyGate::release() {
  {
    std::lock_guard lk(m_);
    --in_use_;
  }
  cv_.notify_one();
}

double JitterSource::next_unit() {
  std::lock_guard lk(m_);
  return uniform_unit(rng_);
}

Sleeper real_sleeper() {
  return [](double ms) {
    if (ms > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
  };
}

RetryResult with_retry(const std::function<ChatOutcome()>& operation, const RetryPolicy& policy,
                       JitterSource& jitter, const Sleeper& sleeper) {
  if (policy.max_attempts < 1 || !(policy.base_delay_ms > 0)) {
    throw Error(ErrorCode::InvalidArgument, "retry policy needs max_attempts >= 1 and base_delay > 0");
  }
  RetryResult result;
  for (int attempt = 0; attempt < policy.max_attempts; ++attempt) {
    result.outcome = operation();
    result.attempts = attempt + 1;
    const auto& o = result.outcome;
    if (o.status != OutcomeStatus::TransportError) return result;
    if (!o.retryable) throw RetryExhausted(std::move(result));
    if (attempt + 1 == policy.max_attempts) break;

    double delay;
    if (o.retry_after_ms) {
      delay = *o.retry_after_ms;
    } else {
      double cap = std::min(policy.max_delay_ms, policy.base_delay_ms * std::ldexp(1.0, attempt));
      delay = jitter.next_unit() * cap;
    }
    result.delays_ms.push_back(delay);
    sleeper(delay);
  }
  throw RetryExhausted(std::move(result));
}

namespace {

struct GateLease {
  explicit GateLease(ConcurrencyGate& g) : gate(g) { gate.acquire(); }
  ~GateLease() { gate.release(); }
  ConcurrencyGate& gate;
};

}  // namespace

ChatOutcome send(const ChatRequest& request, Backend& backend, const SendOptions& options) {
  backend.check_configuration();
  GateLease lease(backend.gate());
  JitterSource jitter(options.jitter_seed);
  ChatOutcome outcome;
  try {
    outcome = with_retry(
                  [&] {
                    try {
                      return backend.attempt(request);
                    } catch (const Error&) {
                      throw;
                    } catch (const std::exception& e) {
                      return ChatOutcome::transport_error(e.what());
                    }
                  },
                  options.retry, jitter, options.sleeper)
                  .outcome;
  } catch (const RetryExhausted& e) {
    outcome = e.result().outcome;
  }
  if (outcome.status == OutcomeStatus::Ok || outcome.status == OutcomeStatus::Refused) {
    outcome.text = trim_right(outcome.text);
  }
  if (outcome.status == OutcomeStatus::Ok && outcome.text.empty()) {
    auto usage = outcome.usage;
    auto latency = outcome.latency_ms;
    outcome = ChatOutcome::blocked(BlockReason::Other);
    outcome.usage = usage;
    outcome.latency_ms = latency;
  }
  return outcome;
}

// ---- mock ------------------------------------------------------------------

std::string ScriptMatcher::describe() const {
  switch (kind) {
    case Kind::Checksum: return "checksum:" + value;
    case Kind::Substring: return "substring:\"" + value + "\"";
    case Kind::Any: return "any";
  }
  return {};
}

MockBackend::MockBackend(std::vector<ScriptEntry> script, std::string name, std::string model_id)
    : Backend(std::move(name), std::move(model_id)), script_(std::move(script)) {}

namespace {

bool matches(const ScriptMatcher& m, const std::string& text, const std::string& checksum) {
  switch (m.kind) {
    case ScriptMatcher::Kind::Checksum: return iequals(m.value, checksum);
    case ScriptMatcher::Kind::Substring: return text.find(m.value) != std::string::npos;
    case ScriptMatcher::Kind::Any: return true;
  }
  return false;
}

// Length of the longest prefix of the matcher value that the request satisfies.
std::size_t closeness(const ScriptMatcher& m, const std::string& text, const std::string& checksum) {
  if (m.kind == ScriptMatcher::Kind::Checksum) {
    std::size_t n = 0;
    while (n < m.value.size() && n < checksum.size() &&
           std::tolower(static_cast<unsigned char>(m.value[n])) == checksum[n]) {
      ++n;
    }
    return n;
  }
  std::size_t lo = 0, hi = m.value.size();
  while (lo < hi) {
    std::size_t mid = (lo + hi + 1) / 2;
    if (text.find(std::string_view(m.value).substr(0, mid)) != std::string::npos) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

}  // namespace

ChatOutcome MockBackend::attempt(const ChatRequest& request) {
  auto checksum = sha256_hex(joined_text(request.parts));
  // Substring matchers also see attachment URIs, one per line after the text.
  auto text = joined_text(request.parts);
  for (const auto& part : request.parts) {
    if (const auto* img = std::get_if<ImageAttachment>(&part)) text += "\n" + img->uri;
    if (const auto* vid = std::get_if<VideoAttachment>(&part)) text += "\n" + vid->uri;
  }
  std::lock_guard lk(m_);
  history_.push_back(request);
  for (std::size_t i = 0; i < script_.size(); ++i) {
    const auto& entry = script_[i];
    if (!matches(entry.matcher, text, checksum)) continue;
    if (entry.outcomes.empty()) break;
    auto& n = replay_[{i, checksum}];
    auto outcome = entry.outcomes[std::min(n, entry.outcomes.size() - 1)];
    ++n;
    return outcome;
  }
  std::string nearest = "none";
  std::size_t best = 0;
  for (const auto& entry : script_) {
    auto c = closeness(entry.matcher, text, checksum);
    if (nearest == "none" || c > best) {
      best = c;
      nearest = entry.matcher.describe();
    }
  }
  throw Error(ErrorCode::UnmatchedRequest,
              "request checksum " + checksum + " matched no script entry; nearest matcher " + nearest);
}

std::size_t MockBackend::call_count() const {
  std::lock_guard lk(m_);
  return history_.size();
}

std::vector<ChatRequest> MockBackend::requests() const {
  std::lock_guard lk(m_);
  return history_;
}

std::shared_ptr<MockBackend> script_mock(std::vector<ScriptEntry> script, std::string name,
                                         std::string model_id) {
  return std::make_shared<MockBackend>(std::move(script), std::move(name), std::move(model_id));
}

json outcome_to_json(const ChatOutcome& o) {
  json j;
  switch (o.status) {
    case OutcomeStatus::Ok: j["status"] = "ok"; break;
    case OutcomeStatus::Blocked:
      j["status"] = "blocked";
      j["reason"] = block_reason_token(o.block_reason);
      break;
    case OutcomeStatus::Refused: j["status"] = "refused"; break;
    case OutcomeStatus::TransportError:
      j["status"] = "transport_error";
      j["error"] = o.error;
      j["retryable"] = o.retryable;
      if (o.rate_limited) j["rate_limited"] = true;
      if (o.retry_after_ms) j["retry_after_ms"] = *o.retry_after_ms;
      break;
  }
  if (!o.text.empty()) j["text"] = o.text;
  j["usage"] = usage_to_json(o.usage);
  j["latency_ms"] = o.latency_ms;
  return j;
}

ChatOutcome outcome_from_json(const json& j) {
  auto status = to_lower(j.value("status", std::string("ok")));
  ChatOutcome o;
  if (status == "ok") {
    o = ChatOutcome::ok(j.value("text", std::string()));
  } else if (status == "blocked") {
    o = ChatOutcome::blocked(parse_block_reason(j.value("reason", std::string("OTHER"))));
  } else if (status == "refused") {
    o = ChatOutcome::refused(j.value("text", std::string()));
  } else if (status == "transport_error") {
    o = ChatOutcome::transport_error(j.value("error", std::string("scripted transport error")),
                                     j.value("retryable", true));
    o.rate_limited = j.value("rate_limited", false);
    if (j.contains("retry_after_ms")) o.retry_after_ms = j.at("retry_after_ms").get<double>();
  } else {
    throw Error(ErrorCode::SchemaViolation, "unknown outcome status '" + status + "'");
  }
  if (j.contains("usage")) o.usage = usage_from_json(j.at("usage"));
  o.latency_ms = j.value("latency_ms", 0.0);
  return o;
}

std::vector<ScriptEntry> parse_script(std::string_view text) {
  std::vector<ScriptEntry> script;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      ScriptEntry entry;
      const auto& m = j.at("match");
      if (m.contains("checksum")) {
        entry.matcher = ScriptMatcher::checksum(m.at("checksum").get<std::string>());
      } else if (m.contains("substring")) {
        entry.matcher = ScriptMatcher::substring(m.at("substring").get<std::string>());
      } else {
        entry.matcher = ScriptMatcher::any();
      }
      for (const auto& o : j.at("outcomes")) entry.outcomes.push_back(outcome_from_json(o));
      script.push_back(std::move(entry));
    } catch (const json::exception& e) {
      throw SchemaError(line_no, "<script>", e.what());
    }
  }
  return script;
}

// ---- HTTP ------------------------------------------------------------------

std::string credential_env_var(std::string_view backend_name) {
  std::string out = "THUMBTRUTH_API_KEY_";
  for (unsigned char c : backend_name) {
    out.push_back(std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_');
  }
  return out;
}

BackendConfig backend_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  BackendConfig c;
  try {
    c.name = j.at("name").get<std::string>();
    c.kind = j.at("kind").get<std::string>();
    c.model_id = j.value("model_id", c.name);
    c.description_source = j.value("description_source", std::string("self"));
    c.video_input = j.value("video_input", false);
    if (j.contains("temperature") && !j.at("temperature").is_null()) {
      c.temperature = j.at("temperature").get<double>();
    }
    if (j.contains("max_output_tokens") && !j.at("max_output_tokens").is_null()) {
      c.max_output_tokens = j.at("max_output_tokens").get<std::uint32_t>();
    }
    c.concurrency_limit = j.value("concurrency_limit", std::size_t{8});
    if (j.contains("script")) {
      std::filesystem::path p = j.at("script").get<std::string>();
      c.script_path = p.is_absolute() ? p : base_dir / p;
    }
    c.endpoint = j.value("endpoint", std::string());
    c.requires_credential = j.value("requires_credential", true);
    c.headers = j.value("headers", json::object());
    c.request_template = j.value("request_template", json());
    c.text_part = j.value("text_part", json());
    c.image_part = j.value("image_part", json());
    c.video_part = j.value("video_part", json());
    c.response_map = j.value("response", json::object());
    c.timeout_seconds = j.value("timeout_seconds", 120.0);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigurationError, std::string("backend entry: ") + e.what());
  }
  if (c.kind != "mock" && c.kind != "http") {
    throw Error(ErrorCode::ConfigurationError, c.name + ": unknown backend kind '" + c.kind + "'");
  }
  return c;
}

HttpBackend::HttpBackend(BackendConfig config)
    : Backend(config.name, config.model_id), config_(std::move(config)) {
  gate().set_limit(config_.concurrency_limit);
}

std::string HttpBackend::api_key() const {
  const char* v = std::getenv(credential_env_var(name()).c_str());
  return v ? std::string(v) : std::string();
}

void HttpBackend::check_configuration() const {
  if (config_.endpoint.empty()) {
    throw Error(ErrorCode::ConfigurationError, name() + ": no endpoint configured");
  }
  if (config_.request_template.is_null() || config_.text_part.is_null()) {
    throw Error(ErrorCode::ConfigurationError, name() + ": request_template and text_part required");
  }
  if (config_.requires_credential && api_key().empty()) {
    throw Error(ErrorCode::ConfigurationError,
                name() + ": credential missing, set " + credential_env_var(name()));
  }
}

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

json substitute(const json& node, const std::map<std::string, std::string>& vars) {
  if (node.is_string()) {
    auto s = node.get<std::string>();
    for (const auto& [k, v] : vars) replace_all(s, "${" + k + "}", v);
    return s;
  }
  if (node.is_array()) {
    json out = json::array();
    for (const auto& item : node) out.push_back(substitute(item, vars));
    return out;
  }
  if (node.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : node.items()) out[k] = substitute(v, vars);
    return out;
  }
  return node;
}

// Whole-string placeholders become typed values; a key whose placeholder has
// no value is dropped, so an absent temperature is never transmitted.
std::optional<json> fill_template(const json& node, const std::map<std::string, std::optional<json>>& slots,
                                  const std::map<std::string, std::string>& vars) {
  if (node.is_string()) {
    const auto& s = node.get_ref<const std::string&>();
    if (s.size() > 3 && s.rfind("${", 0) == 0 && s.back() == '}') {
      auto name = s.substr(2, s.size() - 3);
      if (auto it = slots.find(name); it != slots.end()) return it->second;
    }
    return substitute(node, vars);
  }
  if (node.is_array()) {
    json out = json::array();
    for (const auto& item : node) {
      if (auto v = fill_template(item, slots, vars)) out.push_back(std::move(*v));
    }
    return out;
  }
  if (node.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : node.items()) {
      if (auto filled = fill_template(v, slots, vars)) out[k] = std::move(*filled);
    }
    return out;
  }
  return node;
}

const json* lookup(const json& doc, const json& map, const char* key) {
  auto it = map.find(key);
  if (it == map.end() || !it->is_string()) return nullptr;
  try {
    const auto& v = doc.at(json::json_pointer(it->get<std::string>()));
    return v.is_null() ? nullptr : &v;
  } catch (const json::exception&) {
    return nullptr;
  }
}

}  // namespace

json HttpBackend::build_body(const ChatRequest& request) const {
  json parts = json::array();
  for (const auto& part : request.parts) {
    if (const auto* t = std::get_if<TextSegment>(&part)) {
      parts.push_back(substitute(config_.text_part, {{"TEXT", t->text}}));
    } else if (const auto* img = std::get_if<ImageAttachment>(&part)) {
      if (config_.image_part.is_null()) {
        throw Error(ErrorCode::ConfigurationError, name() + ": no image_part mapping");
      }
      parts.push_back(substitute(config_.image_part, {{"URI", img->uri}}));
    } else if (const auto* vid = std::get_if<VideoAttachment>(&part)) {
      if (config_.video_part.is_null()) {
        throw Error(ErrorCode::ConfigurationError, name() + ": no video_part mapping");
      }
      parts.push_back(substitute(config_.video_part, {{"URI", vid->uri}}));
    }
  }
  std::optional<json> first_attachment;
  for (const auto& part : request.parts) {
    if (first_attachment) break;
    if (const auto* img = std::get_if<ImageAttachment>(&part)) first_attachment = img->uri;
    if (const auto* vid = std::get_if<VideoAttachment>(&part)) first_attachment = vid->uri;
  }
  std::map<std::string, std::optional<json>> slots{
      {"PARTS", parts},
      {"PROMPT", joined_text(request.parts)},
      {"ATTACHMENT", first_attachment},
      {"TEMPERATURE", request.temperature ? std::optional<json>(*request.temperature) : std::nullopt},
      {"MAX_OUTPUT_TOKENS",
       request.max_output_tokens ? std::optional<json>(*request.max_output_tokens) : std::nullopt},
  };
  std::map<std::string, std::string> vars{{"MODEL", request.model_id}};
  return fill_template(config_.request_template, slots, vars).value_or(json::object());
}

ChatOutcome HttpBackend::parse_response(int http_status, const std::string& body,
                                        const ChatRequest& request) const {
  if (http_status == 429 || http_status == 408 || http_status >= 500) {
    auto o = ChatOutcome::transport_error("HTTP " + std::to_string(http_status));
    o.rate_limited = http_status == 429;
    return o;
  }
  if (http_status >= 400) {
    return ChatOutcome::transport_error("HTTP " + std::to_string(http_status) + ": " + body, false);
  }
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    return ChatOutcome::transport_error(std::string("malformed response body: ") + e.what());
  }
  const auto& map = config_.response_map;
  TokenUsage usage;
  if (const auto* v = lookup(doc, map, "input_tokens"); v && v->is_number()) {
    usage.input_tokens = v->get<std::uint64_t>();
  }
  if (const auto* v = lookup(doc, map, "output_tokens"); v && v->is_number()) {
    usage.output_tokens = v->get<std::uint64_t>();
  }
  for (const auto& p : request.parts) {
    if (std::holds_alternative<ImageAttachment>(p)) ++usage.image_count;
  }

  if (const auto* v = lookup(doc, map, "block_reason"); v && v->is_string() && !v->get<std::string>().empty()) {
    auto o = ChatOutcome::blocked(parse_block_reason(v->get<std::string>()));
    o.usage = usage;
    return o;
  }
  std::string text;
  if (const auto* v = lookup(doc, map, "text"); v && v->is_string()) text = v->get<std::string>();
  if (const auto* v = lookup(doc, map, "refusal_flag"); v) {
    auto expected = map.value("refusal_value", json(true));
    if (*v == expected) {
      auto o = ChatOutcome::refused(text);
      o.usage = usage;
      return o;
    }
  }
  return ChatOutcome::ok(std::move(text), usage);
}

ChatOutcome HttpBackend::attempt(const ChatRequest& request) {
  auto body = build_body(request).dump();

  auto scheme_end = config_.endpoint.find("://");
  auto path_start = config_.endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  std::string host = config_.endpoint.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);

  httplib::Headers headers;
  auto key = api_key();
  for (const auto& [k, v] : config_.headers.items()) {
    auto value = v.get<std::string>();
    replace_all(value, "${API_KEY}", key);
    headers.emplace(k, value);
  }

  httplib::Client client(host);
  auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

  auto start = std::chrono::steady_clock::now();
  auto res = client.Post(path, headers, body, "application/json");
  double latency =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (!res) {
    auto o = ChatOutcome::transport_error("transport: " + httplib::to_string(res.error()));
    o.latency_ms = latency;
    return o;
  }
  auto outcome = parse_response(res->status, res->body, request);
  outcome.latency_ms = latency;
  if (res->has_header("Retry-After")) {
    try {
      outcome.retry_after_ms = std::stod(res->get_header_value("Retry-After")) * 1000.0;
    } catch (const std::exception&) {
      // HTTP-date form: fall back to backoff
    }
  }
  return outcome;
}

std::shared_ptr<Backend> create_backend(const BackendConfig& config) {
  if (config.kind == "mock") {
    std::vector<ScriptEntry> script;
    if (!config.script_path.empty()) {
      if (!std::filesystem::exists(config.script_path)) {
        throw Error(ErrorCode::ConfigurationError,
                    config.name + ": mock script not found: " + config.script_path.string());
      }
      script = parse_script(read_file(config.script_path));
    }
    auto mock = script_mock(std::move(script), config.name, config.model_id);
    mock->gate().set_limit(config.concurrency_limit);
    return mock;
  }
  return std::make_shared<HttpBackend>(config);
}

}  // namespace thumbtruth
