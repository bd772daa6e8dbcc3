#pragma once

// Chat-completion backends. A backend turns one rendered prompt into model
// text. Hosted backends speak HTTP+JSON with bounded retries; the mock
// backend replays a script and is the only one used in tests.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "musrec/error.hpp"
#include "musrec/http.hpp"

namespace musrec::agents {

using json = nlohmann::json;
using LogSink = std::function<void(std::string_view)>;

inline LogSink stderr_log() {
  return [](std::string_view line) { std::cerr << "[musrec] " << line << '\n'; };
}

enum class BackendId { Gemini, Llama, Mock };

inline std::string_view to_string(BackendId id) {
  switch (id) {
    case BackendId::Gemini: return "gemini-2.0-flash";
    case BackendId::Llama: return "llama-3.3-70b-versatile";
    case BackendId::Mock: return "mock";
  }
  return "";
}

struct ChatRequest {
  std::string task_name;
  std::string system;  // may be empty
  std::string prompt;
};

struct ChatReply {
  std::string text;
  double latency_seconds = 0.0;
  int attempts = 1;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> completion_tokens;
};

class BackendError : public Error {
 public:
  BackendError(const std::string& message, int status, bool retryable)
      : Error(ErrorKind::Backend, message), status_(status), retryable_(retryable) {}

  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  int status_;
  bool retryable_;
};

/// Implementations must tolerate concurrent calls.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual BackendId id() const = 0;
  virtual ChatReply complete(const ChatRequest& request) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};  // doubles after every failed attempt
  LogSink log = stderr_log();
};

inline bool is_transient(int status) {
  return status == 0 || status == 408 || status == 429 || (status >= 500 && status < 600);
}

/// Runs `send` until it returns a non-transient response or attempts run out.
/// `attempts` receives the number of calls made.
template <typename Send>
http::Response send_with_retries(const RetryPolicy& policy, Send&& send, int& attempts) {
  auto delay = policy.base_delay;
  http::Response last;
  for (attempts = 1;; ++attempts) {
    last = send();
    if (!is_transient(last.status)) return last;
    if (attempts >= policy.max_attempts) break;
    if (policy.log) {
      policy.log("transient backend failure (status " + std::to_string(last.status) + (last.error.empty() ? "" : ", " + last.error) +
                 "), retry " + std::to_string(attempts) + "/" + std::to_string(policy.max_attempts - 1) +
                 " in " + std::to_string(delay.count()) + " ms");
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }
  throw BackendError("backend unavailable after " + std::to_string(attempts) + " attempts (last status " +
                         std::to_string(last.status) + ")",
                     last.status, true);
}

struct HttpBackendConfig {
  BackendId id = BackendId::Llama;
  std::string base_url;
  std::string api_key;
  std::string model;
  std::optional<double> temperature;  // unset: provider default
  std::chrono::seconds timeout{120};
  RetryPolicy retry;
  http::Post post;  // unset: real HTTP client
};

/// Gemini generateContent or an OpenAI-compatible chat endpoint (Groq),
/// selected by config.id.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.id == BackendId::Mock) {
      throw Error(ErrorKind::Configuration, "HttpChatBackend cannot serve the mock backend");
    }
    if (config_.api_key.empty()) {
      throw Error(ErrorKind::Configuration, std::string(to_string(config_.id)) + ": missing API key");
    }
    if (config_.model.empty()) config_.model = std::string(to_string(config_.id));
    if (!config_.post) config_.post = http::default_post(config_.timeout);
  }

  BackendId id() const override { return config_.id; }

  ChatReply complete(const ChatRequest& request) override {
    std::string url;
    http::Headers headers;
    json body;
    if (config_.id == BackendId::Gemini) {
      url = config_.base_url + "/v1beta/models/" + config_.model + ":generateContent";
      headers.emplace("x-goog-api-key", config_.api_key);
      body["contents"] = json::array({{{"role", "user"}, {"parts", json::array({{{"text", request.prompt}}})}}});
      if (!request.system.empty()) {
        body["systemInstruction"] = {{"parts", json::array({{{"text", request.system}}})}};
      }
      if (config_.temperature) body["generationConfig"] = {{"temperature", *config_.temperature}};
    } else {
      url = config_.base_url + "/openai/v1/chat/completions";
      headers.emplace("Authorization", "Bearer " + config_.api_key);
      json messages = json::array();
      if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
      messages.push_back({{"role", "user"}, {"content", request.prompt}});
      body = {{"model", config_.model}, {"messages", messages}};
      if (config_.temperature) body["temperature"] = *config_.temperature;
    }

    const auto payload = body.dump();
    const auto start = std::chrono::steady_clock::now();
    int attempts = 0;
    auto res = send_with_retries(config_.retry, [&] { return config_.post(url, headers, payload); }, attempts);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    if (!res.ok()) {
      throw BackendError(std::string(to_string(config_.id)) + " returned HTTP " + std::to_string(res.status) +
                             ": " + res.body.substr(0, 500),
                         res.status, false);
    }

    ChatReply reply;
    reply.latency_seconds = elapsed.count();
    reply.attempts = attempts;
    try {
      const auto j = json::parse(res.body);
      if (config_.id == BackendId::Gemini) {
        for (const auto& part : j.at("candidates").at(0).at("content").at("parts")) {
          reply.text += part.value("text", "");
        }
        if (auto u = j.find("usageMetadata"); u != j.end()) {
          if (u->contains("promptTokenCount")) reply.prompt_tokens = u->at("promptTokenCount").get<std::int64_t>();
          if (u->contains("candidatesTokenCount")) {
            reply.completion_tokens = u->at("candidatesTokenCount").get<std::int64_t>();
          }
        }
      } else {
        reply.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (auto u = j.find("usage"); u != j.end()) {
          if (u->contains("prompt_tokens")) reply.prompt_tokens = u->at("prompt_tokens").get<std::int64_t>();
          if (u->contains("completion_tokens")) {
            reply.completion_tokens = u->at("completion_tokens").get<std::int64_t>();
          }
        }
      }
    } catch (const json::exception& e) {
      throw BackendError(std::string(to_string(config_.id)) + ": unexpected response shape: " + e.what(),
                         res.status, false);
    }
    return reply;
  }

 private:
  HttpBackendConfig config_;
};

/// Replays scripted text keyed by task name, or delegates to a responder.
class MockBackend final : public ChatBackend {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;

  explicit MockBackend(std::map<std::string, std::string> script)
      : responder_([script = std::move(script)](const ChatRequest& r) {
          auto it = script.find(r.task_name);
          if (it == script.end()) throw BackendError("mock backend has no script for task " + r.task_name, 0, false);
          return it->second;
        }) {}

  explicit MockBackend(Responder responder) : responder_(std::move(responder)) {}

  BackendId id() const override { return BackendId::Mock; }

  ChatReply complete(const ChatRequest& request) override {
    {
      std::lock_guard lock(mutex_);
      calls_.push_back(request);
    }
    ChatReply reply;
    reply.text = responder_(request);
    return reply;
  }

  std::vector<ChatRequest> calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }

 private:
  Responder responder_;
  mutable std::mutex mutex_;
  std::vector<ChatRequest> calls_;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
}

/// Hosted backend configured from GEMINI_API_KEY / GROQ_API_KEY, with
/// GEMINI_BASE_URL / GROQ_BASE_URL overrides and ENGINE_TIMEOUT_SECONDS.
inline std::shared_ptr<ChatBackend> backend_from_env(BackendId id, const EnvLookup& env = process_env(),
                                                     RetryPolicy retry = {}) {
  HttpBackendConfig config;
  config.id = id;
  config.retry = std::move(retry);
  if (auto t = env("ENGINE_TIMEOUT_SECONDS")) {
    try {
      config.timeout = std::chrono::seconds(std::stol(*t));
    } catch (const std::exception&) {
      throw Error(ErrorKind::Configuration, "ENGINE_TIMEOUT_SECONDS is not an integer: " + *t);
    }
  }
  const bool gemini = id == BackendId::Gemini;
  if (id == BackendId::Mock) throw Error(ErrorKind::Configuration, "mock backend is not configured from env");
  const std::string key_var = gemini ? "GEMINI_API_KEY" : "GROQ_API_KEY";
  auto key = env(key_var);
  if (!key) throw Error(ErrorKind::Configuration, key_var + " is not set");
  config.api_key = *key;
  config.base_url = env(gemini ? "GEMINI_BASE_URL" : "GROQ_BASE_URL")
                        .value_or(gemini ? "https://generativelanguage.googleapis.com" : "https://api.groq.com");
  return std::make_shared<HttpChatBackend>(std::move(config));
}

}  // namespace musrec::agents
