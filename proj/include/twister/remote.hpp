#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "twister/embedding.hpp"
#include "twister/generation.hpp"

namespace twister {

namespace detail {

// Split "http://host:port/some/path" into base and path.
inline std::pair<std::string, std::string> split_url(const std::string& url,
                                                     const std::string& default_path) {
  const std::size_t scheme = url.find("://");
  const std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const std::size_t slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, default_path};
  return {url.substr(0, slash), url.substr(slash)};
}

inline std::string env_or(const char* name, const std::string& fallback = {}) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

}  // namespace detail

struct RemoteConfig {
  std::string endpoint;  // full URL; path defaults to the API's usual route
  std::string model;
  std::string api_key;
  int max_retries = 3;
  double backoff_seconds = 0.5;
  int timeout_seconds = 120;
};

/// OpenAI-compatible chat-completions backend. Configuration comes from the
/// environment by default: TWISTER_LLM_ENDPOINT, TWISTER_LLM_MODEL,
/// TWISTER_LLM_API_KEY. Retries with exponential backoff live here; callers
/// see a single throw after the attempts are exhausted.
class RemoteGenerationBackend final : public GenerationBackend {
 public:
  explicit RemoteGenerationBackend(RemoteConfig config, std::size_t max_new_tokens = 250)
      : config_(std::move(config)), max_new_tokens_(max_new_tokens) {
    if (config_.endpoint.empty()) throw Error("remote generation: endpoint not configured");
    if (config_.model.empty()) throw Error("remote generation: model not configured");
  }

  static RemoteGenerationBackend from_env(std::size_t max_new_tokens = 250) {
    RemoteConfig config;
    config.endpoint = detail::env_or("TWISTER_LLM_ENDPOINT");
    config.model = detail::env_or("TWISTER_LLM_MODEL");
    config.api_key = detail::env_or("TWISTER_LLM_API_KEY");
    return RemoteGenerationBackend(std::move(config), max_new_tokens);
  }

  std::string name() const override { return "remote:" + config_.model; }
  std::size_t max_new_tokens() const override { return max_new_tokens_; }
  bool deterministic() const override { return false; }

  std::string generate(const std::string& prompt, std::uint64_t seed,
                       GenerationUsage& usage) override {
    nlohmann::json body;
    body["model"] = config_.model;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    body["max_tokens"] = max_new_tokens_;
    body["seed"] = seed;

    const auto [base, path] = detail::split_url(config_.endpoint, "/v1/chat/completions");
    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, config_.max_retries); ++attempt) {
      if (attempt > 0) {
        const double delay = config_.backoff_seconds * static_cast<double>(1 << (attempt - 1));
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      }
      const auto start = std::chrono::steady_clock::now();
      httplib::Client client(base);
      client.set_read_timeout(config_.timeout_seconds, 0);
      httplib::Headers headers;
      if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);
      auto res = client.Post(path, headers, body.dump(), "application/json");
      if (!res) {
        last_error = "connection failure to " + base;
        continue;
      }
      if (res->status != 200) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
      if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
        last_error = "malformed response body";
        continue;
      }
      const auto& choice = j["choices"][0];
      if (!choice.contains("message") || !choice["message"].contains("content")) {
        last_error = "no message content in response";
        continue;
      }
      const std::string text = choice["message"]["content"].get<std::string>();
      usage.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (j.contains("usage")) {
        usage.prompt_tokens = j["usage"].value<std::uint64_t>("prompt_tokens", 0);
        usage.completion_tokens = j["usage"].value<std::uint64_t>("completion_tokens", 0);
      } else {
        usage.prompt_tokens = count_tokens(prompt);
        usage.completion_tokens = count_tokens(text);
      }
      return text;
    }
    throw Error("remote generation failed after " + std::to_string(config_.max_retries) +
                " attempts: " + last_error);
  }

 private:
  RemoteConfig config_;
  std::size_t max_new_tokens_;
};

/// OpenAI-compatible embeddings backend (POST {model, input} -> data[i]
/// .embedding). Environment: TWISTER_EMBED_ENDPOINT, TWISTER_EMBED_MODEL,
/// TWISTER_EMBED_API_KEY (falls back to TWISTER_LLM_API_KEY). Failures after
/// the bounded retries throw with the failed input indices.
class RemoteEmbedder final : public EmbeddingBackend {
 public:
  RemoteEmbedder(RemoteConfig config, std::size_t dimension, std::size_t batch_size = 64)
      : config_(std::move(config)), dim_(dimension), batch_size_(batch_size) {
    if (config_.endpoint.empty()) throw Error("remote embedder: endpoint not configured");
    if (dim_ == 0) throw Error("remote embedder: dimension must be positive");
  }

  static RemoteEmbedder from_env(std::size_t dimension) {
    RemoteConfig config;
    config.endpoint = detail::env_or("TWISTER_EMBED_ENDPOINT");
    config.model = detail::env_or("TWISTER_EMBED_MODEL", "default");
    config.api_key =
        detail::env_or("TWISTER_EMBED_API_KEY", detail::env_or("TWISTER_LLM_API_KEY"));
    return RemoteEmbedder(std::move(config), dimension);
  }

  std::string name() const override { return "remote-embed:" + config_.model; }
  std::size_t dimension() const override { return dim_; }
  bool deterministic() const override { return false; }

  std::vector<std::vector<double>> encode(const std::vector<std::string>& texts) override {
    std::vector<std::vector<double>> out(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
      const std::size_t end = std::min(texts.size(), start + batch_size_);
      encode_batch(texts, start, end, out);
    }
    return out;
  }

 private:
  void encode_batch(const std::vector<std::string>& texts, std::size_t start, std::size_t end,
                    std::vector<std::vector<double>>& out) {
    nlohmann::json body;
    body["model"] = config_.model;
    auto& input = body["input"] = nlohmann::json::array();
    for (std::size_t i = start; i < end; ++i) input.push_back(texts[i]);

    const auto [base, path] = detail::split_url(config_.endpoint, "/v1/embeddings");
    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, config_.max_retries); ++attempt) {
      if (attempt > 0) {
        const double delay = config_.backoff_seconds * static_cast<double>(1 << (attempt - 1));
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      }
      httplib::Client client(base);
      client.set_read_timeout(config_.timeout_seconds, 0);
      httplib::Headers headers;
      if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);
      auto res = client.Post(path, headers, body.dump(), "application/json");
      if (!res || res->status != 200) {
        last_error = res ? "status " + std::to_string(res->status) : "connection failure";
        continue;
      }
      nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
      if (j.is_discarded() || !j.contains("data") || j["data"].size() != end - start) {
        last_error = "malformed embeddings response";
        continue;
      }
      bool ok = true;
      for (std::size_t i = start; i < end && ok; ++i) {
        const auto& item = j["data"][i - start];
        if (!item.contains("embedding")) {
          last_error = "row missing embedding";
          ok = false;
        } else {
          out[i] = item["embedding"].get<std::vector<double>>();
        }
      }
      if (ok) return;
    }
    throw Error("remote embeddings failed for inputs [" + std::to_string(start) + ", " +
                std::to_string(end - 1) + "]: " + last_error);
  }

  RemoteConfig config_;
  std::size_t dim_;
  std::size_t batch_size_;
};

}  // namespace twister
