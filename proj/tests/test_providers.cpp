#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "error.hpp"
#include "providers.hpp"
#include "support.hpp"

using namespace thumbtruth;
using nlohmann::json;

namespace {

ChatRequest text_request(const std::string& text) {
  ChatRequest r;
  r.model_id = "m";
  r.parts = {TextSegment{text}, ImageAttachment{"https://img/x.jpg"}};
  return r;
}

SendOptions quiet(int attempts = 3) {
  SendOptions o;
  o.sleeper = no_sleep();
  o.retry.max_attempts = attempts;
  o.retry.base_delay_ms = 100;
  o.retry.max_delay_ms = 1000;
  return o;
}

// Local JSON endpoint whose replies are queued by the test.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lk(m_);
      bodies.push_back(req.body);
      auth.push_back(req.get_header_value("Authorization"));
      auto reply = replies.empty() ? std::make_tuple(200, std::string("{}"), std::string()) : replies.front();
      if (replies.size() > 1) replies.erase(replies.begin());
      res.status = std::get<0>(reply);
      if (!std::get<2>(reply).empty()) res.set_header("Retry-After", std::get<2>(reply));
      res.set_content(std::get<1>(reply), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat"; }

  std::mutex m_;
  std::vector<std::tuple<int, std::string, std::string>> replies;
  std::vector<std::string> bodies;
  std::vector<std::string> auth;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

BackendConfig http_config(const std::string& endpoint) {
  auto j = json::parse(R"({
    "name": "local-test", "kind": "http", "model_id": "model-x",
    "headers": {"Authorization": "Bearer ${API_KEY}"},
    "request_template": {"model": "${MODEL}", "temperature": "${TEMPERATURE}",
                         "max_tokens": "${MAX_OUTPUT_TOKENS}",
                         "messages": [{"role": "user", "content": "${PARTS}"}]},
    "text_part": {"type": "text", "text": "${TEXT}"},
    "image_part": {"type": "image_url", "image_url": {"url": "${URI}"}},
    "response": {"text": "/choices/0/message/content", "block_reason": "/block",
                 "refusal_flag": "/choices/0/finish_reason", "refusal_value": "content_filter",
                 "input_tokens": "/usage/prompt_tokens", "output_tokens": "/usage/completion_tokens"},
    "timeout_seconds": 5
  })");
  j["endpoint"] = endpoint;
  return backend_config_from_json(j, ".");
}

}  // namespace

TEST_CASE("mock replays by match") {
  auto mock = script_mock({{ScriptMatcher::substring("alpha"), {ChatOutcome::ok("A1"), ChatOutcome::ok("A2")}},
                           {ScriptMatcher::checksum(sha256_hex("beta")), {ChatOutcome::ok("B")}},
                           {ScriptMatcher::substring("img/x.jpg"), {ChatOutcome::ok("by uri")}}});
  CHECK(mock->attempt(text_request("alpha one")).text == "A1");
  CHECK(mock->attempt(text_request("alpha one")).text == "A2");
  CHECK(mock->attempt(text_request("alpha one")).text == "A2");
  // a different request on the same entry has its own counter
  CHECK(mock->attempt(text_request("alpha two")).text == "A1");
  CHECK(mock->attempt(text_request("beta")).text == "B");
  CHECK(mock->attempt(text_request("gamma")).text == "by uri");
  CHECK(mock->call_count() == 6);

  auto strict = script_mock({{ScriptMatcher::substring("delta force"), {ChatOutcome::ok("x")}}});
  try {
    ChatRequest r;
    r.parts = {TextSegment{"delta team"}};
    strict->attempt(r);
    FAIL("expected UnmatchedRequest");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnmatchedRequest);
    std::string msg = e.what();
    CHECK(msg.find(sha256_hex("delta team")) != std::string::npos);
    CHECK(msg.find("delta force") != std::string::npos);
  }
}

TEST_CASE("script file parsing") {
  auto script = parse_script(
      R"({"match":{"substring":"x"},"outcomes":[{"status":"ok","text":"hi","usage":{"input_tokens":5}}]})"
      "\n\n"
      R"({"match":{"any":true},"outcomes":[{"status":"blocked","reason":"SAFETY"},{"status":"transport_error","retry_after_ms":20}]})"
      "\n");
  REQUIRE(script.size() == 2);
  CHECK(script[0].outcomes[0].usage.input_tokens == 5);
  CHECK(script[1].outcomes[0].block_reason == BlockReason::Safety);
  CHECK(script[1].outcomes[1].retry_after_ms == std::optional<double>(20));
  CHECK_THROWS_AS(parse_script(R"({"match":{}})"), Error);
  CHECK_THROWS_AS(parse_script(R"({"match":{},"outcomes":[{"status":"weird"}]})"), Error);
  for (auto o : {ChatOutcome::ok("t", {1, 2, 3, 4.5}), ChatOutcome::blocked(BlockReason::Recitation),
                 ChatOutcome::refused("no"), ChatOutcome::transport_error("e", false)}) {
    auto back = outcome_from_json(outcome_to_json(o));
    CHECK(back.status == o.status);
    CHECK(back.text == o.text);
    CHECK(back.usage == o.usage);
    CHECK(back.retryable == o.retryable);
  }
}

TEST_CASE("retry backs off with full jitter") {
  int calls = 0;
  std::vector<double> slept;
  RetryPolicy policy{5, 100, 250};
  JitterSource jitter(42);
  auto result = with_retry(
      [&] {
        ++calls;
        return calls < 4 ? ChatOutcome::transport_error("flaky") : ChatOutcome::ok("done");
      },
      policy, jitter, [&](double ms) { slept.push_back(ms); });
  CHECK(result.attempts == 4);
  CHECK(result.outcome.text == "done");
  REQUIRE(slept.size() == 3);
  double caps[] = {100, 200, 250};
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(slept[i] >= 0);
    CHECK(slept[i] <= caps[i]);
  }
  CHECK(slept == result.delays_ms);

  // same seed, same delays
  JitterSource again(42);
  int calls2 = 0;
  auto r2 = with_retry([&] { return ++calls2 < 4 ? ChatOutcome::transport_error("x") : ChatOutcome::ok("y"); },
                       policy, again, no_sleep());
  CHECK(r2.delays_ms == result.delays_ms);
}

TEST_CASE("retry honours retry-after and stops on final outcomes") {
  RetryPolicy policy{3, 100, 1000};
  JitterSource jitter(1);
  int calls = 0;
  auto r = with_retry(
      [&] {
        if (++calls == 1) {
          auto o = ChatOutcome::transport_error("429");
          o.rate_limited = true;
          o.retry_after_ms = 1500;
          return o;
        }
        return ChatOutcome::ok("ok");
      },
      policy, jitter, no_sleep());
  CHECK(r.delays_ms == std::vector<double>{1500});

  for (auto final_outcome : {ChatOutcome::blocked(BlockReason::Safety), ChatOutcome::refused("no")}) {
    int n = 0;
    auto res = with_retry([&] { ++n; return final_outcome; }, policy, jitter, no_sleep());
    CHECK(n == 1);
    CHECK(res.outcome.status == final_outcome.status);
  }

  int n = 0;
  try {
    with_retry([&] { ++n; return ChatOutcome::transport_error("down"); }, policy, jitter, no_sleep());
    FAIL("expected RetryExhausted");
  } catch (const RetryExhausted& e) {
    CHECK(e.code() == ErrorCode::ProviderUnavailable);
    CHECK(e.result().attempts == 3);
  }
  CHECK(n == 3);

  int fatal = 0;
  CHECK_THROWS_AS(with_retry([&] { ++fatal; return ChatOutcome::transport_error("400", false); }, policy, jitter,
                             no_sleep()),
                  RetryExhausted);
  CHECK(fatal == 1);
  CHECK_THROWS_AS(with_retry([] { return ChatOutcome::ok("x"); }, RetryPolicy{0, 1, 1}, jitter, no_sleep()), Error);
}

TEST_CASE("send maps empty replies to blocked and trims") {
  auto mock = script_mock({{ScriptMatcher::substring("empty"), {ChatOutcome::ok("   \n")}},
                           {ScriptMatcher::any(), {ChatOutcome::ok("text \n")}}});
  auto e = send(text_request("empty"), *mock, quiet());
  CHECK(e.status == OutcomeStatus::Blocked);
  CHECK(e.block_reason == BlockReason::Other);
  CHECK(send(text_request("x"), *mock, quiet()).text == "text");

  auto down = script_mock({{ScriptMatcher::any(), {ChatOutcome::transport_error("503")}}});
  auto o = send(text_request("x"), *down, quiet(2));
  CHECK(o.status == OutcomeStatus::TransportError);
  CHECK(down->call_count() == 2);
}

TEST_CASE("credential checks happen before any request") {
  FakeServer server;
  auto cfg = http_config(server.endpoint());
  unsetenv(credential_env_var("local-test").c_str());
  HttpBackend backend(cfg);
  try {
    send(text_request("x"), backend, quiet());
    FAIL("expected ConfigurationError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigurationError);
    CHECK(std::string(e.what()).find("THUMBTRUTH_API_KEY_LOCAL_TEST") != std::string::npos);
  }
  CHECK(server.bodies.empty());
  CHECK(credential_env_var("gpt-4o") == "THUMBTRUTH_API_KEY_GPT_4O");
}

TEST_CASE("http adapter wire mapping") {
  FakeServer server;
  auto cfg = http_config(server.endpoint());
  setenv(credential_env_var("local-test").c_str(), "sekret", 1);
  HttpBackend backend(cfg);

  server.replies = {{200,
                     R"({"choices":[{"message":{"content":"Categorization: Misleading"},"finish_reason":"stop"}],
                        "usage":{"prompt_tokens":120,"completion_tokens":9}})",
                     ""}};
  auto req = text_request("hello");
  auto o = send(req, backend, quiet());
  CHECK(o.status == OutcomeStatus::Ok);
  CHECK(o.text == "Categorization: Misleading");
  CHECK(o.usage.input_tokens == 120);
  CHECK(o.usage.output_tokens == 9);
  CHECK(o.usage.image_count == 1);
  REQUIRE(server.bodies.size() == 1);
  auto body = json::parse(server.bodies[0]);
  CHECK_FALSE(body.contains("temperature"));
  CHECK_FALSE(body.contains("max_tokens"));
  CHECK(body["model"] == "m");
  CHECK(body["messages"][0]["content"][0]["text"] == "hello");
  CHECK(body["messages"][0]["content"][1]["image_url"]["url"] == "https://img/x.jpg");
  CHECK(server.auth[0] == "Bearer sekret");

  req.temperature = 0.0;
  req.max_output_tokens = 256;
  auto with_temp = backend.build_body(req);
  CHECK(with_temp["temperature"] == 0.0);
  CHECK(with_temp["max_tokens"] == 256);
}

TEST_CASE("http adapter rate limit, block and refusal") {
  FakeServer server;
  auto cfg = http_config(server.endpoint());
  setenv(credential_env_var("local-test").c_str(), "sekret", 1);
  HttpBackend backend(cfg);

  server.replies = {{429, "{}", "2"}, {200, R"({"choices":[{"message":{"content":"fine"}}]})", ""}};
  std::vector<double> slept;
  auto opts = quiet();
  opts.sleeper = [&](double ms) { slept.push_back(ms); };
  auto o = send(text_request("x"), backend, opts);
  CHECK(o.text == "fine");
  CHECK(slept == std::vector<double>{2000});

  server.replies = {{200, R"({"block":"PROHIBITED_CONTENT"})", ""}};
  auto b = send(text_request("y"), backend, quiet());
  CHECK(b.status == OutcomeStatus::Blocked);
  CHECK(b.block_reason == BlockReason::ProhibitedContent);

  server.replies = {{200, R"({"choices":[{"message":{"content":"I can't"},"finish_reason":"content_filter"}]})", ""}};
  auto r = send(text_request("z"), backend, quiet());
  CHECK(r.status == OutcomeStatus::Refused);

  server.replies = {{400, "bad request", ""}};
  std::size_t before = server.bodies.size();
  auto f = send(text_request("w"), backend, quiet());
  CHECK(f.status == OutcomeStatus::TransportError);
  CHECK(server.bodies.size() == before + 1);  // 4xx is not retried

  server.replies = {{200, "not json", ""}};
  CHECK(send(text_request("v"), backend, quiet(1)).status == OutcomeStatus::TransportError);
}

TEST_CASE("http slot templates for single-prompt endpoints") {
  auto j = json::parse(R"({"name":"video","kind":"http","model_id":"p1","endpoint":"http://x/y",
    "request_template":{"video_id":"${ATTACHMENT}","prompt":"${PROMPT}","engine":"${MODEL}-v"},
    "text_part":"${TEXT}","video_part":"${URI}","response":{"text":"/data"}})");
  HttpBackend backend(backend_config_from_json(j, "."));
  ChatRequest r;
  r.model_id = "p1";
  r.parts = {TextSegment{"describe it"}, VideoAttachment{"vid-123"}};
  auto body = backend.build_body(r);
  CHECK(body["video_id"] == "vid-123");
  CHECK(body["prompt"] == "describe it");
  CHECK(body["engine"] == "p1-v");
  r.parts = {TextSegment{"no media"}};
  CHECK_FALSE(backend.build_body(r).contains("video_id"));
  r.parts = {TextSegment{"img"}, ImageAttachment{"u"}};
  CHECK_THROWS_AS(backend.build_body(r), Error);  // no image_part mapping
  CHECK(backend.parse_response(200, R"({"data":"scene one"})", r).text == "scene one");
  CHECK_THROWS_AS(backend_config_from_json(json::parse(R"({"name":"q","kind":"ftp"})"), "."), Error);
}

TEST_CASE("concurrency gate bounds in-flight calls") {
  struct SlowBackend : Backend {
    SlowBackend() : Backend("slow", "m") {}
    std::atomic<int> in_flight{0}, peak{0};
    ChatOutcome attempt(const ChatRequest&) override {
      int now = ++in_flight;
      int p = peak.load();
      while (now > p && !peak.compare_exchange_weak(p, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --in_flight;
      return ChatOutcome::ok("x");
    }
  } backend;
  backend.gate().set_limit(3);
  std::vector<std::thread> threads;
  for (int i = 0; i < 12; ++i) threads.emplace_back([&] { send(text_request("x"), backend, quiet()); });
  for (auto& t : threads) t.join();
  CHECK(backend.peak.load() <= 3);
  CHECK(backend.peak.load() >= 1);
}
