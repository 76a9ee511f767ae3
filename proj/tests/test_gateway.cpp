#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <thread>

#include "httplib.h"
#include "support.hpp"

using namespace formforge;
using namespace fftest;
using namespace std::chrono_literals;

namespace {

std::string temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("formforge-gw-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::filesystem::remove(p);
  return p.string();
}

GatewayError transport(std::string msg = "down") { return {GatewayError::Kind::Transport, std::move(msg), 1}; }

struct GwFixture {
  std::shared_ptr<VirtualClock> clock = std::make_shared<VirtualClock>();
  LlmGateway gw{clock};
  ModelId model{"mock", "m"};
};

}  // namespace

TEST(Gateway, FixedReply) {
  GwFixture f;
  f.gw.add_provider("mock", MockProvider::fixed("hello"));
  auto r = f.gw.complete({f.model, "p"});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->text, "hello");
  EXPECT_EQ(r->attempt_count, 1);
}

TEST(Gateway, RetriesWithExponentialBackoff) {
  GwFixture f;
  auto mock = MockProvider::scripted({transport(), transport(), AttemptResult("ok")});
  f.gw.add_provider("mock", mock);
  auto r = f.gw.complete({f.model, "p", 60s, 2});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->attempt_count, 3);
  EXPECT_EQ(mock->calls(), 3);
  EXPECT_EQ(f.clock->total_slept(), Millis(500 + 1000));
}

TEST(Gateway, ExhaustedRetries) {
  GwFixture f;
  f.gw.add_provider("mock", MockProvider::scripted({transport()}));
  auto r = f.gw.complete({f.model, "p", 60s, 1});
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().kind, GatewayError::Kind::Transport);
  EXPECT_EQ(r.error().attempt_count, 2);
}

TEST(Gateway, NonTransientErrorsAreNotRetried) {
  GwFixture f;
  auto mock = MockProvider::scripted({GatewayError{GatewayError::Kind::Auth, "no key", 1}});
  f.gw.add_provider("mock", mock);
  auto r = f.gw.complete({f.model, "p", 60s, 5});
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().kind, GatewayError::Kind::Auth);
  EXPECT_EQ(mock->calls(), 1);
}

TEST(Gateway, BackoffIsCapped) {
  auto clock = std::make_shared<VirtualClock>();
  LlmGateway gw(clock, BackoffPolicy{Millis(500), 2.0, Millis(1500)});
  gw.add_provider("mock", MockProvider::scripted({transport()}));
  gw.complete({ModelId{"mock", "m"}, "p", 60s, 4});
  EXPECT_EQ(clock->total_slept(), Millis(500 + 1000 + 1500 + 1500));
}

TEST(Gateway, RejectsBadRequestsAndUnknownProviders) {
  GwFixture f;
  EXPECT_THROW(f.gw.complete({f.model, "p", 0ms}), std::invalid_argument);
  EXPECT_THROW(f.gw.complete({f.model, "p", 1s, -1}), std::invalid_argument);
  auto r = f.gw.complete({ModelId{"nobody", "x"}, "p"});
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().kind, GatewayError::Kind::Transport);
}

TEST(Gateway, RateLimitSlidingWindow) {
  GwFixture f;
  f.gw.add_provider("mock", MockProvider::fixed("x"), RateLimit{2, Millis(1000)});
  for (int i = 0; i < 5; ++i) ASSERT_TRUE(f.gw.complete({f.model, "p"}));
  // calls 3 and 5 each wait for the window to free a slot
  EXPECT_GE(f.clock->total_slept(), Millis(2000));
  EXPECT_LE(f.clock->total_slept(), Millis(2010));
}

TEST(Gateway, RouteAll) {
  GwFixture f;
  f.gw.add_provider("replay", MockProvider::fixed("from replay"));
  f.gw.route_all_to("replay");
  EXPECT_EQ(f.gw.complete({ModelId{"openai", "gpt-4"}, "p"})->text, "from replay");
}

TEST(Gateway, ModelIdParse) {
  auto m = ModelId::parse("zhipuai/glm-4");
  EXPECT_EQ(m.provider, "zhipuai");
  EXPECT_EQ(m.model, "glm-4");
  EXPECT_EQ(m.str(), "zhipuai/glm-4");
  EXPECT_THROW(ModelId::parse("glm-4"), Error);
}

// ---------------------------------------------------------------------------

TEST(Cassette, RecordThenReplay) {
  auto path = temp_file("rt.jsonl");
  LlmRequest req{ModelId{"openai", "gpt-4"}, "prompt text"};
  record_cassette(req, LlmReply{"the reply", Millis(3), 1}, path);
  auto r = replay_cassette(req, path);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->text, "the reply");

  auto mutated = req;
  mutated.prompt += " ";
  auto miss = replay_cassette(mutated, path);
  ASSERT_FALSE(miss);
  EXPECT_EQ(miss.error().kind, GatewayError::Kind::CassetteMiss);
}

TEST(Cassette, KeyIsSha256OfModelAndPrompt) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  ModelId m{"p", "m"};
  EXPECT_EQ(cassette_key(m, "x"), sha256_hex("p/m\nx"));
  EXPECT_NE(cassette_key(m, "x"), cassette_key(ModelId{"p", "n"}, "x"));
}

TEST(Cassette, RecordedErrorsReplayAsErrors) {
  auto path = temp_file("err.jsonl");
  LlmRequest req{ModelId{"iflytek", "spark-3"}, "p"};
  record_cassette_error(req, GatewayError{GatewayError::Kind::Timeout, "slow", 1}, path);
  auto r = replay_cassette(req, path);
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().kind, GatewayError::Kind::Timeout);
}

TEST(Cassette, EntryJsonRoundTrip) {
  auto e = make_cassette_entry({ModelId{"a", "b"}, "prompt"}, "reply \"quoted\"\n");
  auto back = cassette_entry_from_json(nlohmann::json::parse(to_json(e).dump()));
  EXPECT_EQ(back.key, e.key);
  EXPECT_EQ(back.reply_text, e.reply_text);
  EXPECT_EQ(back.model, "a/b");
  EXPECT_EQ(back.prompt_sha, sha256_hex("prompt"));
  EXPECT_FALSE(back.error);
}

TEST(Cassette, RecordingProviderWrapsAnotherProvider) {
  auto path = temp_file("rec.jsonl");
  auto clock = std::make_shared<VirtualClock>();
  LlmGateway gw(clock);
  gw.add_provider("mock", std::make_shared<RecordingProvider>(
                              MockProvider::scripted({transport(), AttemptResult("second")}), path));
  LlmRequest req{ModelId{"mock", "m"}, "hello"};
  ASSERT_TRUE(gw.complete({req.model, req.prompt, 60s, 1}));
  auto c = Cassette::load(path);
  EXPECT_EQ(c.size(), 1u);  // same key: the later success replaces the error
  EXPECT_EQ(c.find(req)->reply_text, "second");

  LlmGateway replay(clock);
  replay.add_provider("replay", std::make_shared<ReplayProvider>(c));
  replay.route_all_to("replay");
  EXPECT_EQ(replay.complete(req)->text, "second");
}

TEST(Cassette, BundledLoginGptFourRowExtractsThreePairs) {
  auto c = Cassette::load(data_path("cassettes/login.jsonl"));
  auto login = load_form_model(data_path("corpus/login.form.json"));
  LlmRequest req{ModelId{"openai", "gpt-4"}, offline_prompt(login, PromptVariant::PH_P)};
  auto r = replay_cassette(req, c);
  ASSERT_TRUE(r);
  auto a = extract_assignments(r->text);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->pairs.size(), 3u);
  EXPECT_EQ(a->pairs[0].value, "john.doe@example.com");
}

TEST(Cassette, BadLinesAreReported) {
  auto path = temp_file("bad.jsonl");
  std::ofstream(path) << "{\"key\": \"k\"}\nnot json\n";
  EXPECT_THROW(Cassette::load(path), Error);
  EXPECT_THROW(Cassette::load(temp_file("missing.jsonl")), Error);
}

// ---------------------------------------------------------------------------

TEST(HttpProvider, ConfigRejectsInlineCredentials) {
  auto ok = parse_gateway_config(nlohmann::json::parse(
      R"({"providers": [{"name": "openai", "base_url": "https://api.openai.com/v1", "rate_limit": {"requests": 3, "interval_ms": 1000}}]})"));
  ASSERT_EQ(ok.size(), 1u);
  EXPECT_EQ(ok[0].rate_limit.requests, 3);
  EXPECT_EQ(ok[0].rate_limit.interval, Millis(1000));
  EXPECT_THROW(parse_gateway_config(nlohmann::json::parse(
                   R"({"providers": [{"name": "x", "base_url": "http://h", "api_key": "sk-123"}]})")),
               Error);
  EXPECT_EQ(credential_env_var("zhipu-ai"), "FORMFORGE_KEY_ZHIPU_AI");
  EXPECT_EQ(split_url("http://127.0.0.1:8080/v1/").path, "/v1");
  EXPECT_EQ(split_url("https://h").origin, "https://h");
}

TEST(HttpProvider, MissingCredentialIsAuth) {
  ::unsetenv("FORMFORGE_KEY_NOKEY");
  HttpProvider p(ProviderConfig{"nokey", "http://127.0.0.1:1", "m", {}, {}});
  auto r = p.attempt({ModelId{"nokey", "m"}, "x"});
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().kind, GatewayError::Kind::Auth);
}

TEST(HttpProvider, TalksToAChatCompletionEndpoint) {
  httplib::Server srv;
  std::string seen_auth, seen_model;
  int next_status = 200;
  srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_model = nlohmann::json::parse(req.body)["model"];
    res.status = next_status;
    res.set_content(R"({"choices": [{"message": {"role": "assistant", "content": "hi there"}}]})", "application/json");
  });
  int port = srv.bind_to_any_port("127.0.0.1");
  std::thread t([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  ::setenv("FORMFORGE_KEY_LOCAL", "test-key", 1);
  HttpProvider p(ProviderConfig{"local", "http://127.0.0.1:" + std::to_string(port) + "/v1", "", {}, {}});
  LlmRequest req{ModelId{"local", "tiny"}, "hello", 5s};
  auto ok = p.attempt(req);
  ASSERT_TRUE(ok) << ok.error().message;
  EXPECT_EQ(ok.value(), "hi there");
  EXPECT_EQ(seen_auth, "Bearer test-key");
  EXPECT_EQ(seen_model, "tiny");

  const std::pair<int, GatewayError::Kind> cases[] = {{401, GatewayError::Kind::Auth},
                                                      {429, GatewayError::Kind::RateLimited},
                                                      {504, GatewayError::Kind::Timeout},
                                                      {500, GatewayError::Kind::Transport}};
  for (auto [status, kind] : cases) {
    next_status = status;
    auto r = p.attempt(req);
    ASSERT_FALSE(r);
    EXPECT_EQ(r.error().kind, kind) << status;
  }
  srv.stop();
  t.join();
  ::unsetenv("FORMFORGE_KEY_LOCAL");
}
