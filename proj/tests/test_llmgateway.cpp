#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "csk/hash.hpp"
#include "csk/llmgateway.hpp"

using namespace csk::gateway;

namespace {

namespace fs = std::filesystem;

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& stem) {
    path = fs::temp_directory_path() /
           (stem + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()) +
            ".jsonl");
  }
  ~TempFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

GatewayConfig test_config(const std::string& cache_path = "") {
  GatewayConfig cfg;
  cfg.base_url = "http://fake.test/v1";
  cfg.model_name = "test-model";
  cfg.api_key_env = "";  // no auth header against the fake server
  cfg.max_retries = 3;
  cfg.cache_path = cache_path;
  return cfg;
}

struct RecordingSleeper {
  std::shared_ptr<std::vector<std::chrono::milliseconds>> delays =
      std::make_shared<std::vector<std::chrono::milliseconds>>();
  Sleeper fn() {
    auto d = delays;
    return [d](std::chrono::milliseconds ms) { d->push_back(ms); };
  }
};

}  // namespace

TEST_CASE("complete returns the assistant text and caches it") {
  TempFile cache("csk-cache");
  auto fake = std::make_shared<FakeTransport>();
  fake->push_scripted({200, FakeTransport::chat_body("<C>a</C> tagged"), false, false});
  {
    GatewayClient client(test_config(cache.path.string()), fake);
    CHECK(client.complete("tag this") == "<C>a</C> tagged");
    CHECK(fake->calls() == 1);
    // Second call hits the in-memory cache.
    CHECK(client.complete("tag this") == "<C>a</C> tagged");
    CHECK(fake->calls() == 1);
  }
  // A fresh client with a cold transport replays from the cache file.
  auto cold = std::make_shared<FakeTransport>();
  GatewayClient replay(test_config(cache.path.string()), cold);
  CHECK(replay.complete("tag this") == "<C>a</C> tagged");
  CHECK(cold->calls() == 0);

  const std::string contents = slurp(cache.path);
  CHECK(contents.find("\"kind\":\"completion\"") != std::string::npos);
  CHECK(contents.find("test-model") != std::string::npos);
}

TEST_CASE("cache keys separate prompts, models and temperatures") {
  const auto k1 = GatewayClient::prompt_key("p", "m", 0.0);
  CHECK(GatewayClient::prompt_key("p", "m", 0.0) == k1);
  CHECK(GatewayClient::prompt_key("q", "m", 0.0) != k1);
  CHECK(GatewayClient::prompt_key("p", "m2", 0.0) != k1);
  CHECK(GatewayClient::prompt_key("p", "m", 0.7) != k1);
}

TEST_CASE("transient 429s retry on the 1s/2s backoff schedule") {
  auto fake = std::make_shared<FakeTransport>();
  fake->push_scripted({429, "slow down", false, false});
  fake->push_scripted({429, "slow down", false, false});
  fake->push_scripted({200, FakeTransport::chat_body("ok"), false, false});
  RecordingSleeper sleeper;
  GatewayClient client(test_config(), fake, sleeper.fn());
  CHECK(client.complete("prompt") == "ok");
  CHECK(fake->calls() == 3);
  REQUIRE(sleeper.delays->size() == 2);
  CHECK((*sleeper.delays)[0].count() >= 900);
  CHECK((*sleeper.delays)[0].count() <= 1100);
  CHECK((*sleeper.delays)[1].count() >= 1800);
  CHECK((*sleeper.delays)[1].count() <= 2200);
}

TEST_CASE("rate limit errors after retries are exhausted") {
  auto fake = std::make_shared<FakeTransport>();
  for (int i = 0; i < 4; ++i) fake->push_scripted({429, "nope", false, false});
  auto cfg = test_config();
  cfg.max_retries = 2;
  RecordingSleeper sleeper;
  GatewayClient client(cfg, fake, sleeper.fn());
  try {
    client.complete("p");
    FAIL("expected GatewayError");
  } catch (const GatewayError& e) {
    CHECK(e.kind() == ErrorKind::RateLimited);
  }
  CHECK(fake->calls() == 3);  // initial attempt + two retries
  CHECK(sleeper.delays->size() == 2);
}

TEST_CASE("auth failures never retry") {
  auto fake = std::make_shared<FakeTransport>();
  fake->push_scripted({401, "who are you", false, false});
  RecordingSleeper sleeper;
  GatewayClient client(test_config(), fake, sleeper.fn());
  try {
    client.complete("p");
    FAIL("expected GatewayError");
  } catch (const GatewayError& e) {
    CHECK(e.kind() == ErrorKind::Auth);
  }
  CHECK(fake->calls() == 1);
  CHECK(sleeper.delays->empty());

  // Missing key environment variable is also an auth error, before any call.
  auto cfg = test_config();
  cfg.api_key_env = "CSK_TEST_KEY_THAT_DOES_NOT_EXIST";
  ::unsetenv("CSK_TEST_KEY_THAT_DOES_NOT_EXIST");
  GatewayClient keyless(cfg, fake, sleeper.fn());
  try {
    keyless.complete("p");
    FAIL("expected GatewayError");
  } catch (const GatewayError& e) {
    CHECK(e.kind() == ErrorKind::Auth);
  }
  CHECK(fake->calls() == 1);
}

TEST_CASE("error taxonomy: malformed body, bad status, timeout") {
  RecordingSleeper sleeper;
  {
    auto fake = std::make_shared<FakeTransport>();
    fake->push_scripted({200, "this is not json", false, false});
    GatewayClient client(test_config(), fake, sleeper.fn());
    try {
      client.complete("p");
      FAIL("expected GatewayError");
    } catch (const GatewayError& e) {
      CHECK(e.kind() == ErrorKind::MalformedResponse);
    }
  }
  {
    auto fake = std::make_shared<FakeTransport>();
    fake->push_scripted({404, "gone", false, false});
    GatewayClient client(test_config(), fake, sleeper.fn());
    try {
      client.complete("p");
      FAIL("expected GatewayError");
    } catch (const GatewayError& e) {
      CHECK(e.kind() == ErrorKind::Http);
    }
  }
  {
    auto fake = std::make_shared<FakeTransport>();
    auto cfg = test_config();
    cfg.max_retries = 1;
    fake->push_scripted({0, "", false, true});  // timeout
    fake->push_scripted({0, "", false, true});
    GatewayClient client(cfg, fake, sleeper.fn());
    try {
      client.complete("p");
      FAIL("expected GatewayError");
    } catch (const GatewayError& e) {
      CHECK(e.kind() == ErrorKind::Timeout);
    }
  }
  {
    auto fake = std::make_shared<FakeTransport>();
    auto cfg = test_config();
    cfg.max_retries = 0;
    fake->push_scripted({0, "", true, false});  // connection refused
    GatewayClient client(cfg, fake, sleeper.fn());
    try {
      client.complete("p");
      FAIL("expected GatewayError");
    } catch (const GatewayError& e) {
      CHECK(e.kind() == ErrorKind::Network);
    }
  }
}

TEST_CASE("complete_batch honors the in-flight bound and aligns results") {
  auto fake = std::make_shared<FakeTransport>();
  fake->set_delay(std::chrono::milliseconds(25));
  fake->set_responder([](const std::string& prompt) { return "echo: " + prompt; });
  auto cfg = test_config();
  cfg.max_in_flight = 2;
  GatewayClient client(cfg, fake);

  std::vector<std::string> prompts;
  for (int i = 0; i < 5; ++i) prompts.push_back("prompt-" + std::to_string(i));
  const auto results = client.complete_batch(prompts);
  REQUIRE(results.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(results[i].ok);
    CHECK(results[i].text == "echo: prompt-" + std::to_string(i));
  }
  CHECK(fake->calls() == 5);
  CHECK(fake->max_concurrent() <= 2);
  CHECK(fake->max_concurrent() >= 1);
  CHECK(failed_indices(results).empty());
}

TEST_CASE("one failing prompt does not poison the batch") {
  auto fake = std::make_shared<FakeTransport>();
  fake->push_scripted({200, FakeTransport::chat_body("one"), false, false});
  fake->push_scripted({500, "boom", false, false});
  fake->push_scripted({200, FakeTransport::chat_body("three"), false, false});
  auto cfg = test_config();
  cfg.max_in_flight = 1;  // serial, so the script maps to prompt order
  cfg.max_retries = 0;
  GatewayClient client(cfg, fake);
  const auto results = client.complete_batch({"a", "b", "c"});
  REQUIRE(results.size() == 3);
  CHECK(results[0].ok);
  CHECK(results[0].text == "one");
  CHECK_FALSE(results[1].ok);
  CHECK(results[1].kind == ErrorKind::Network);
  CHECK(results[2].ok);
  CHECK(results[2].text == "three");
  CHECK(failed_indices(results) == std::vector<std::size_t>{1});
}

TEST_CASE("warm cache batch issues zero network calls") {
  TempFile cache("csk-batch-cache");
  const std::vector<std::string> prompts = {"p1", "p2", "p3"};
  {
    auto fake = std::make_shared<FakeTransport>();
    fake->set_responder([](const std::string& p) { return "r:" + p; });
    GatewayClient warm(test_config(cache.path.string()), fake);
    warm.complete_batch(prompts);
    CHECK(fake->calls() == 3);
  }
  auto cold = std::make_shared<FakeTransport>();
  GatewayClient client(test_config(cache.path.string()), cold);
  const auto results = client.complete_batch(prompts);
  CHECK(cold->calls() == 0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(results[i].ok);
    CHECK(results[i].text == "r:" + prompts[i]);
  }
}

TEST_CASE("embeddings are normalized and cached") {
  TempFile cache("csk-embed-cache");
  auto fake = std::make_shared<FakeTransport>();
  fake->push_scripted({200, FakeTransport::embeddings_body({{3.0, 4.0}}), false, false});
  GatewayClient client(test_config(cache.path.string()), fake);

  const auto vectors = client.embed({"increased risk"});
  REQUIRE(vectors.size() == 1);
  CHECK(vectors[0].values[0] == doctest::Approx(0.6));
  CHECK(vectors[0].values[1] == doctest::Approx(0.8));
  CHECK(std::abs(vectors[0].norm() - 1.0) <= 1e-6);
  CHECK(fake->calls() == 1);

  const auto again = client.embed({"increased risk"});
  CHECK(fake->calls() == 1);  // cached
  CHECK(again[0] == vectors[0]);

  CHECK(client.embed({}).empty());
  CHECK(fake->calls() == 1);

  RemoteEmbedder remote(client);
  CHECK(remote.embed({"increased risk"})[0] == vectors[0]);
}

TEST_CASE("api keys never reach the cache file") {
  TempFile cache("csk-secret-cache");
  ::setenv("CSK_TEST_KEY", "secret-token-12345", 1);
  auto cfg = test_config(cache.path.string());
  cfg.api_key_env = "CSK_TEST_KEY";
  auto fake = std::make_shared<FakeTransport>();
  fake->push_scripted({200, FakeTransport::chat_body("fine"), false, false});
  GatewayClient client(cfg, fake);
  CHECK(client.complete("sensitive prompt") == "fine");
  const std::string contents = slurp(cache.path);
  CHECK_FALSE(contents.empty());
  CHECK(contents.find("secret-token-12345") == std::string::npos);
  ::unsetenv("CSK_TEST_KEY");
}
