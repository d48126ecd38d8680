#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "parts.hpp"

namespace thumbtruth {

struct TokenUsage {
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;
  std::uint64_t image_count = 0;
  double media_seconds = 0.0;

  TokenUsage& operator+=(const TokenUsage& o) {
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    image_count += o.image_count;
    media_seconds += o.media_seconds;
    return *this;
  }
  bool operator==(const TokenUsage&) const = default;
};

nlohmann::json usage_to_json(const TokenUsage& usage);
TokenUsage usage_from_json(const nlohmann::json& j);

enum class OutcomeStatus { Ok, Blocked, Refused, TransportError };
enum class BlockReason { ProhibitedContent, Safety, Recitation, Other };

std::string_view block_reason_token(BlockReason reason);  // PROHIBITED_CONTENT, ...
// Unrecognized provider codes map to Other.
BlockReason parse_block_reason(std::string_view token);

struct ChatOutcome {
  OutcomeStatus status = OutcomeStatus::Ok;
  BlockReason block_reason = BlockReason::Other;  // meaningful only when Blocked
  std::string text;                               // empty unless Ok or Refused
  TokenUsage usage;
  double latency_ms = 0.0;

  // TransportError detail
  bool retryable = true;
  bool rate_limited = false;
  std::optional<double> retry_after_ms;
  std::string error;

  static ChatOutcome ok(std::string text, TokenUsage usage = {});
  static ChatOutcome blocked(BlockReason reason);
  static ChatOutcome refused(std::string text);
  static ChatOutcome transport_error(std::string message, bool retryable = true);
};

struct ChatRequest {
  std::string model_id;
  std::vector<Part> parts;
  std::optional<double> temperature;  // absent = provider default, never sent
  std::optional<std::uint32_t> max_output_tokens;
};

// Counting gate bounding concurrent sends per backend.
class ConcurrencyGate {
 public:
  explicit ConcurrencyGate(std::size_t limit = 1) : limit_(limit == 0 ? 1 : limit) {}
  void set_limit(std::size_t limit);
  void acquire();
  void release();

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::size_t limit_;
  std::size_t in_use_ = 0;
};

class Backend {
 public:
  Backend(std::string name, std::string model_id)
      : name_(std::move(name)), model_id_(std::move(model_id)) {}
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const std::string& name() const { return name_; }
  const std::string& model_id() const { return model_id_; }

  // Throws Error(ConfigurationError) before any network activity.
  virtual void check_configuration() const {}
  // One attempt, no retry.
  virtual ChatOutcome attempt(const ChatRequest& request) = 0;

  ConcurrencyGate& gate() { return gate_; }

 private:
  std::string name_;
  std::string model_id_;
  ConcurrencyGate gate_{64};
};

struct RetryPolicy {
  int max_attempts = 3;
  double base_delay_ms = 500.0;
  double max_delay_ms = 30000.0;
};

// Seeded source of full-jitter fractions; one per logical request stream.
class JitterSource {
 public:
  explicit JitterSource(std::uint64_t seed) : rng_(seed) {}
  double next_unit();

 private:
  std::mutex m_;
  std::mt19937_64 rng_;
};

using Sleeper = std::function<void(double delay_ms)>;
Sleeper real_sleeper();
inline Sleeper no_sleep() {
  return [](double) {};
}

struct RetryResult {
  ChatOutcome outcome;
  int attempts = 0;
  std::vector<double> delays_ms;
};

class RetryExhausted : public Error {
 public:
  explicit RetryExhausted(RetryResult last)
      : Error(ErrorCode::ProviderUnavailable,
              "retries exhausted after " + std::to_string(last.attempts) + " attempts: " +
                  last.outcome.error),
        result_(std::move(last)) {}
  const RetryResult& result() const { return result_; }

 private:
  RetryResult result_;
};

// Retries retryable TransportError outcomes (including rate limits) with
// exponential backoff and full jitter; provider retry-after wins when given.
// Blocked, Refused and Ok return immediately. Throws RetryExhausted.
RetryResult with_retry(const std::function<ChatOutcome()>& operation, const RetryPolicy& policy,
                       JitterSource& jitter, const Sleeper& sleeper);

struct SendOptions {
  RetryPolicy retry;
  std::uint64_t jitter_seed = 0;
  Sleeper sleeper = real_sleeper();
};

// Configuration check, gate, retry. Transport failures come back as a
// TransportError outcome once the policy is exhausted; Ok replies with no
// text are reported as Blocked(OTHER).
ChatOutcome send(const ChatRequest& request, Backend& backend, const SendOptions& options);

// ---- scripted mock --------------------------------------------------------

// Checksum matches sha256 of the joined request text. Substring searches that
// text followed by the attachment URIs, one per line.
struct ScriptMatcher {
  enum class Kind { Checksum, Substring, Any };
  Kind kind = Kind::Any;
  std::string value;

  static ScriptMatcher checksum(std::string hex) { return {Kind::Checksum, std::move(hex)}; }
  static ScriptMatcher substring(std::string needle) { return {Kind::Substring, std::move(needle)}; }
  static ScriptMatcher any() { return {Kind::Any, {}}; }

  std::string describe() const;
};

// The n-th request with a given checksum that hits this entry receives
// outcomes[min(n, size-1)], so replay is by match, not arrival order.
struct ScriptEntry {
  ScriptMatcher matcher;
  std::vector<ChatOutcome> outcomes;
};

class MockBackend final : public Backend {
 public:
  MockBackend(std::vector<ScriptEntry> script, std::string name, std::string model_id);

  ChatOutcome attempt(const ChatRequest& request) override;

  std::size_t call_count() const;
  std::vector<ChatRequest> requests() const;

 private:
  std::vector<ScriptEntry> script_;
  mutable std::mutex m_;
  std::map<std::pair<std::size_t, std::string>, std::size_t> replay_;
  std::vector<ChatRequest> history_;
};

std::shared_ptr<MockBackend> script_mock(std::vector<ScriptEntry> script,
                                         std::string name = "mock",
                                         std::string model_id = "mock-model");

// Script file: one JSON object per line,
// {"match": {"substring": "..."} | {"checksum": "..."} | {"any": true},
//  "outcomes": [{"status": "ok", "text": "...", "usage": {...}, "latency_ms": 0}, ...]}
std::vector<ScriptEntry> parse_script(std::string_view text);
nlohmann::json outcome_to_json(const ChatOutcome& outcome);
ChatOutcome outcome_from_json(const nlohmann::json& j);

// ---- declarative HTTP adapter ---------------------------------------------

struct BackendConfig {
  std::string name;
  std::string kind;  // "mock" | "http"
  std::string model_id;

  // Description mapping: "self" means the backend writes its own video
  // descriptions; otherwise the name of the backend that does.
  std::string description_source = "self";
  bool video_input = false;  // full-video description requests vs 20-frame sets

  std::optional<double> temperature;
  std::optional<std::uint32_t> max_output_tokens;
  std::size_t concurrency_limit = 8;

  // mock
  std::filesystem::path script_path;

  // http
  std::string endpoint;
  bool requires_credential = true;
  nlohmann::json headers = nlohmann::json::object();
  nlohmann::json request_template;
  nlohmann::json text_part;
  nlohmann::json image_part;
  nlohmann::json video_part;
  nlohmann::json response_map = nlohmann::json::object();
  double timeout_seconds = 120.0;
};

BackendConfig backend_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

// THUMBTRUTH_API_KEY_<NAME>, name upper-cased with non-alphanumerics as '_'.
std::string credential_env_var(std::string_view backend_name);

// Declarative JSON-over-HTTP adapter. In request_template, a string that is
// exactly ${PARTS}, ${PROMPT}, ${ATTACHMENT}, ${TEMPERATURE} or
// ${MAX_OUTPUT_TOKENS} is replaced by a typed value (the key is dropped when
// the value is absent); ${MODEL} is substituted inside strings. Part mappings
// use ${TEXT} and ${URI}; headers use ${API_KEY}. response holds JSON
// pointers for text, input_tokens, output_tokens, block_reason and
// refusal_flag (compared with refusal_value).
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);

  void check_configuration() const override;
  ChatOutcome attempt(const ChatRequest& request) override;

  // Exposed for tests of the wire mapping.
  nlohmann::json build_body(const ChatRequest& request) const;
  ChatOutcome parse_response(int http_status, const std::string& body,
                             const ChatRequest& request) const;

 private:
  std::string api_key() const;
  BackendConfig config_;
};

std::shared_ptr<Backend> create_backend(const BackendConfig& config);

}  // namespace thumbtruth
