#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "csk/textsim.hpp"

// Client for an OpenAI-compatible chat-completions endpoint (plus an
// optional embeddings endpoint). Responses are cached in an append-only
// JSONL file keyed by a content hash of (prompt, model, temperature), so
// any run can be replayed without network access. Transport and sleeping
// are injectable; tests run entirely against an in-process fake server.

namespace csk::gateway {

struct GatewayConfig {
  std::string base_url = "http://127.0.0.1:8080/v1";
  std::string model_name = "gpt-4";
  // Name of the environment variable carrying the API key; empty means no
  // Authorization header is sent (local/fake servers).
  std::string api_key_env = "CSK_API_KEY";
  double temperature = 0.0;
  int max_output_tokens = 1024;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  int max_in_flight = 4;
  std::string cache_path;  // empty disables the cache
  std::string embed_model_name = "text-embedding-3-small";
};

enum class ErrorKind {
  Auth,              // 401/403 or missing key: never retried
  RateLimited,       // 429 after retries exhausted
  Timeout,
  Network,           // connection failures / 5xx after retries exhausted
  Http,              // other non-retryable status codes
  MalformedResponse,
};

std::string_view error_kind_name(ErrorKind kind);

class GatewayError : public std::runtime_error {
 public:
  GatewayError(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Connection-level failure (no HTTP status), e.g. refused or timed out.
struct TransportFailure {
  bool timeout = false;
  std::string message;
};

class Transport {
 public:
  virtual ~Transport() = default;
  // Throws TransportFailure on connection-level errors.
  virtual HttpResponse post(const std::string& url,
                            const std::vector<std::pair<std::string, std::string>>& headers,
                            const std::string& body) = 0;
};

// Real transport over cpp-httplib.
std::shared_ptr<Transport> make_http_transport(double timeout_seconds);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct BatchItem {
  bool ok = false;
  std::string text;
  ErrorKind kind = ErrorKind::Network;
  std::string error;
};

std::vector<std::size_t> failed_indices(const std::vector<BatchItem>& items);

class GatewayClient {
 public:
  // transport defaults to the real HTTP transport; sleeper to
  // std::this_thread::sleep_for.
  explicit GatewayClient(GatewayConfig config,
                         std::shared_ptr<Transport> transport = nullptr,
                         Sleeper sleeper = nullptr);

  // Assistant message text for the prompt; cache hits never touch the
  // network. Transient failures (429/5xx/connection) retry with
  // exponential backoff: 1s base, factor 2, +/-10% jitter.
  std::string complete(const std::string& prompt);

  // Positionally aligned results; at most max_in_flight concurrent
  // requests; one item's failure never aborts the rest.
  std::vector<BatchItem> complete_batch(const std::vector<std::string>& prompts);

  // One unit-norm vector per input text, cached like completions.
  std::vector<textsim::Embedding> embed(const std::vector<std::string>& texts);

  const GatewayConfig& config() const { return config_; }

  // Pure content hash used as the cache key.
  static std::uint64_t prompt_key(std::string_view prompt, std::string_view model,
                                  double temperature);

 private:
  HttpResponse post_with_retries(const std::string& url, const std::string& body,
                                 std::uint64_t jitter_seed);
  std::optional<std::string> cache_lookup(std::uint64_t key);
  void cache_store(std::uint64_t key, const std::string& prompt,
                   const std::string& response, const std::string& kind,
                   const std::string& model,
                   const nlohmann::json* usage = nullptr);
  std::vector<std::pair<std::string, std::string>> headers() const;

  GatewayConfig config_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  std::mutex cache_mutex_;
  std::map<std::uint64_t, std::string> cache_;
};

class RemoteEmbedder : public textsim::Embedder {
 public:
  explicit RemoteEmbedder(GatewayClient& client) : client_(client) {}
  std::vector<textsim::Embedding> embed(const std::vector<std::string>& texts) override {
    return client_.embed(texts);
  }

 private:
  GatewayClient& client_;
};

// In-process fake server used by tests and by the CLI's --fake-server
// mode. Scripted responses are consumed per call; otherwise the responder
// function builds the assistant text from the prompt. Tracks the maximum
// number of concurrent requests seen.
class FakeTransport : public Transport {
 public:
  struct Scripted {
    int status = 200;
    std::string body;
    bool fail_connection = false;
    bool fail_timeout = false;
  };

  // Assistant text -> full chat-completions response body.
  static std::string chat_body(const std::string& content);
  static std::string embeddings_body(const std::vector<std::vector<double>>& vectors);

  void push_scripted(Scripted s);
  // content_fn receives the user prompt and returns the assistant text.
  void set_responder(std::function<std::string(const std::string&)> content_fn);
  void set_delay(std::chrono::milliseconds delay) { delay_ = delay; }

  int calls() const { return calls_; }
  int max_concurrent() const { return max_concurrent_; }
  std::vector<std::string> request_bodies() const;

  HttpResponse post(const std::string& url,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    const std::string& body) override;

 private:
  mutable std::mutex mutex_;
  std::vector<Scripted> script_;
  std::function<std::string(const std::string&)> responder_;
  std::chrono::milliseconds delay_{0};
  std::vector<std::string> bodies_;
  int calls_ = 0;
  int in_flight_ = 0;
  int max_concurrent_ = 0;
};

}  // namespace csk::gateway
