#include "csk/llmgateway.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "csk/hash.hpp"

namespace csk::gateway {

using nlohmann::json;

namespace {

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_temperature(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", t);
  return buf;
}

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

class HttplibTransport : public Transport {
 public:
  explicit HttplibTransport(double timeout_seconds)
      : timeout_seconds_(timeout_seconds) {}

  HttpResponse post(const std::string& url,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    const std::string& body) override {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      throw TransportFailure{false, "malformed URL: " + url};
    }
    const auto path_begin = url.find('/', scheme_end + 3);
    const std::string origin =
        path_begin == std::string::npos ? url : url.substr(0, path_begin);
    const std::string path =
        path_begin == std::string::npos ? "/" : url.substr(path_begin);

    httplib::Client client(origin);
    const auto timeout = std::chrono::milliseconds(
        static_cast<long long>(timeout_seconds_ * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers hl;
    for (const auto& [k, v] : headers) hl.emplace(k, v);
    httplib::Result result = client.Post(path, hl, body, "application/json");
    if (!result) {
      const bool timed_out = result.error() == httplib::Error::ConnectionTimeout ||
                             result.error() == httplib::Error::Read ||
                             result.error() == httplib::Error::Write;
      throw TransportFailure{timed_out,
                             "transport error: " + httplib::to_string(result.error())};
    }
    return {result->status, result->body};
  }

 private:
  double timeout_seconds_;
};

}  // namespace

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Auth: return "auth";
    case ErrorKind::RateLimited: return "rate_limited";
    case ErrorKind::Timeout: return "timeout";
    case ErrorKind::Network: return "network";
    case ErrorKind::Http: return "http";
    case ErrorKind::MalformedResponse: return "malformed_response";
  }
  return "network";
}

std::shared_ptr<Transport> make_http_transport(double timeout_seconds) {
  return std::make_shared<HttplibTransport>(timeout_seconds);
}

std::vector<std::size_t> failed_indices(const std::vector<BatchItem>& items) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].ok) out.push_back(i);
  }
  return out;
}

std::uint64_t GatewayClient::prompt_key(std::string_view prompt,
                                        std::string_view model, double temperature) {
  std::uint64_t h = fnv1a64(prompt);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(model, h);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(format_temperature(temperature), h);
  return h;
}

GatewayClient::GatewayClient(GatewayConfig config,
                             std::shared_ptr<Transport> transport, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(transport ? std::move(transport)
                           : make_http_transport(config_.timeout_seconds)),
      sleeper_(sleeper ? std::move(sleeper) : [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
      }) {
  if (config_.cache_path.empty()) return;
  std::ifstream in(config_.cache_path);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.contains("prompt_hash") ||
        !record.contains("response")) {
      continue;  // tolerate partial writes from interrupted runs
    }
    const std::uint64_t key =
        std::strtoull(record["prompt_hash"].get<std::string>().c_str(), nullptr, 16);
    cache_[key] = record["response"].get<std::string>();
  }
}

std::vector<std::pair<std::string, std::string>> GatewayClient::headers() const {
  std::vector<std::pair<std::string, std::string>> h;
  h.emplace_back("Content-Type", "application/json");
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key) {
      throw GatewayError(ErrorKind::Auth, "environment variable " +
                                              config_.api_key_env +
                                              " is not set");
    }
    h.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  return h;
}

std::optional<std::string> GatewayClient::cache_lookup(std::uint64_t key) {
  std::lock_guard lock(cache_mutex_);
  const auto it = cache_.find(key);
  if (it == cache_.end()) return std::nullopt;
  return it->second;
}

void GatewayClient::cache_store(std::uint64_t key, const std::string& prompt,
                                const std::string& response, const std::string& kind,
                                const std::string& model, const json* usage) {
  std::lock_guard lock(cache_mutex_);
  cache_[key] = response;
  if (config_.cache_path.empty()) return;
  json record = {
      {"kind", kind},
      {"prompt_hash", hash_hex(key)},
      {"prompt", prompt},
      {"response", response},
      {"model", model},
      {"temperature", config_.temperature},
      {"timestamp", iso_timestamp()},
  };
  if (usage && usage->is_object()) record["usage"] = *usage;
  std::ofstream out(config_.cache_path, std::ios::app);
  out << record.dump() << "\n";
}

HttpResponse GatewayClient::post_with_retries(const std::string& url,
                                              const std::string& body,
                                              std::uint64_t jitter_seed) {
  SplitMix64 jitter_rng(jitter_seed);
  const auto request_headers = headers();
  int failures = 0;
  while (true) {
    ErrorKind kind = ErrorKind::Network;
    std::string message;
    try {
      HttpResponse response = transport_->post(url, request_headers, body);
      if (response.status >= 200 && response.status < 300) return response;
      if (response.status == 401 || response.status == 403) {
        throw GatewayError(ErrorKind::Auth,
                           "authentication failed (status " +
                               std::to_string(response.status) + ")");
      }
      if (response.status == 429) {
        kind = ErrorKind::RateLimited;
        message = "rate limited (429)";
      } else if (response.status >= 500) {
        kind = ErrorKind::Network;
        message = "server error (status " + std::to_string(response.status) + ")";
      } else {
        throw GatewayError(ErrorKind::Http, "unexpected status " +
                                                std::to_string(response.status) +
                                                ": " + response.body);
      }
    } catch (const TransportFailure& failure) {
      kind = failure.timeout ? ErrorKind::Timeout : ErrorKind::Network;
      message = failure.message;
    }
    if (failures >= config_.max_retries) {
      throw GatewayError(kind, message + " after " + std::to_string(failures) +
                                   " retries");
    }
    // Exponential backoff: 1s base, factor 2, +/-10% jitter.
    const double base_ms = 1000.0 * std::pow(2.0, failures);
    const double factor = 0.9 + 0.2 * jitter_rng.unit();
    sleeper_(std::chrono::milliseconds(
        static_cast<long long>(std::llround(base_ms * factor))));
    ++failures;
  }
}

std::string GatewayClient::complete(const std::string& prompt) {
  const std::uint64_t key =
      prompt_key(prompt, config_.model_name, config_.temperature);
  if (auto cached = cache_lookup(key)) return *cached;

  const json request = {
      {"model", config_.model_name},
      {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", config_.temperature},
      {"max_tokens", config_.max_output_tokens},
  };
  const HttpResponse response = post_with_retries(
      config_.base_url + "/chat/completions", request.dump(), key);

  const json body = json::parse(response.body, nullptr, false);
  if (body.is_discarded() || !body.contains("choices") || body["choices"].empty() ||
      !body["choices"][0].contains("message") ||
      !body["choices"][0]["message"].contains("content") ||
      !body["choices"][0]["message"]["content"].is_string()) {
    throw GatewayError(ErrorKind::MalformedResponse,
                       "response body is not a chat completion");
  }
  std::string text = body["choices"][0]["message"]["content"].get<std::string>();
  const json usage = body.value("usage", json());
  cache_store(key, prompt, text, "completion", config_.model_name,
              usage.is_object() ? &usage : nullptr);
  return text;
}

std::vector<BatchItem> GatewayClient::complete_batch(
    const std::vector<std::string>& prompts) {
  std::vector<BatchItem> results(prompts.size());
  if (prompts.empty()) return results;
  const auto workers = static_cast<std::size_t>(
      std::max(1, std::min<int>(config_.max_in_flight,
                                static_cast<int>(prompts.size()))));
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= prompts.size()) return;
      try {
        results[i].text = complete(prompts[i]);
        results[i].ok = true;
      } catch (const GatewayError& e) {
        results[i].ok = false;
        results[i].kind = e.kind();
        results[i].error = e.what();
      } catch (const std::exception& e) {
        results[i].ok = false;
        results[i].kind = ErrorKind::Network;
        results[i].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (std::thread& t : pool) t.join();
  return results;
}

std::vector<textsim::Embedding> GatewayClient::embed(
    const std::vector<std::string>& texts) {
  std::vector<textsim::Embedding> out(texts.size());
  if (texts.empty()) return out;

  const std::string cache_model = "embed:" + config_.embed_model_name;
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const std::uint64_t key = prompt_key(texts[i], cache_model, 0.0);
    if (auto cached = cache_lookup(key)) {
      const json values = json::parse(*cached, nullptr, false);
      if (!values.is_discarded() && values.is_array()) {
        out[i].values = values.get<std::vector<double>>();
        continue;
      }
    }
    missing.push_back(i);
  }
  if (missing.empty()) return out;

  json input = json::array();
  for (std::size_t i : missing) input.push_back(texts[i]);
  const json request = {{"model", config_.embed_model_name}, {"input", input}};
  const std::uint64_t batch_key =
      prompt_key(request.dump(), cache_model, 0.0);
  const HttpResponse response =
      post_with_retries(config_.base_url + "/embeddings", request.dump(), batch_key);

  const json body = json::parse(response.body, nullptr, false);
  if (body.is_discarded() || !body.contains("data") || !body["data"].is_array() ||
      body["data"].size() != missing.size()) {
    throw GatewayError(ErrorKind::MalformedResponse,
                       "response body is not an embeddings result");
  }
  for (std::size_t k = 0; k < missing.size(); ++k) {
    const json& item = body["data"][k];
    if (!item.contains("embedding") || !item["embedding"].is_array()) {
      throw GatewayError(ErrorKind::MalformedResponse,
                         "embeddings item missing vector");
    }
    textsim::Embedding e;
    e.values = item["embedding"].get<std::vector<double>>();
    const double norm = e.norm();
    if (norm > 0.0) {
      for (double& v : e.values) v /= norm;
    }
    const std::size_t i = missing[k];
    out[i] = e;
    cache_store(prompt_key(texts[i], cache_model, 0.0), texts[i],
                json(e.values).dump(), "embedding", cache_model);
  }
  return out;
}

std::string FakeTransport::chat_body(const std::string& content) {
  const json body = {
      {"id", "fake-1"},
      {"object", "chat.completion"},
      {"choices",
       json::array({{{"index", 0},
                     {"message", {{"role", "assistant"}, {"content", content}}},
                     {"finish_reason", "stop"}}})},
      {"usage", {{"prompt_tokens", 0}, {"completion_tokens", 0}}},
  };
  return body.dump();
}

std::string FakeTransport::embeddings_body(
    const std::vector<std::vector<double>>& vectors) {
  json data = json::array();
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    data.push_back({{"index", i}, {"embedding", vectors[i]}});
  }
  return json{{"object", "list"}, {"data", data}}.dump();
}

void FakeTransport::push_scripted(Scripted s) {
  std::lock_guard lock(mutex_);
  script_.push_back(std::move(s));
}

void FakeTransport::set_responder(
    std::function<std::string(const std::string&)> content_fn) {
  std::lock_guard lock(mutex_);
  responder_ = std::move(content_fn);
}

std::vector<std::string> FakeTransport::request_bodies() const {
  std::lock_guard lock(mutex_);
  return bodies_;
}

HttpResponse FakeTransport::post(
    const std::string& url,
    const std::vector<std::pair<std::string, std::string>>& /*headers*/,
    const std::string& body) {
  std::optional<Scripted> scripted;
  std::function<std::string(const std::string&)> responder;
  {
    std::lock_guard lock(mutex_);
    ++calls_;
    ++in_flight_;
    max_concurrent_ = std::max(max_concurrent_, in_flight_);
    bodies_.push_back(body);
    if (!script_.empty()) {
      scripted = std::move(script_.front());
      script_.erase(script_.begin());
    }
    responder = responder_;
  }
  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);

  auto leave = [this] {
    std::lock_guard lock(mutex_);
    --in_flight_;
  };
  if (scripted) {
    leave();
    if (scripted->fail_connection) {
      throw TransportFailure{false, "fake connection failure"};
    }
    if (scripted->fail_timeout) {
      throw TransportFailure{true, "fake timeout"};
    }
    return {scripted->status, scripted->body};
  }
  if (responder || url.ends_with("/embeddings")) {
    const json request = json::parse(body, nullptr, false);
    leave();
    if (url.ends_with("/embeddings")) {
      // Deterministic 8-dim vectors derived from each input text.
      std::vector<std::vector<double>> vectors;
      if (!request.is_discarded() && request.contains("input")) {
        for (const auto& text : request["input"]) {
          std::uint64_t h = fnv1a64(text.get<std::string>());
          std::vector<double> v(8);
          for (double& x : v) {
            SplitMix64 rng(h++);
            x = rng.unit() - 0.5;
          }
          vectors.push_back(std::move(v));
        }
      }
      return {200, embeddings_body(vectors)};
    }
    std::string content;
    if (!request.is_discarded() && request.contains("messages") &&
        !request["messages"].empty()) {
      content = responder(request["messages"][0].value("content", ""));
    } else {
      content = responder(body);
    }
    return {200, chat_body(content)};
  }
  leave();
  return {500, "fake transport has no scripted response"};
}

}  // namespace csk::gateway
