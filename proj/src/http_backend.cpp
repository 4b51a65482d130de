// OpenAI-compatible HTTP backend: chat completions + embeddings with retry.

#include "e2c/gateway.hpp"

#include <cstdlib>

#include <httplib.h>

namespace e2c {

namespace {

// Splits "http://host:port/v1" into ("http://host:port", "/v1").
std::pair<std::string, std::string> split_base_url(const std::string& url) {
  std::size_t scheme = url.find("://");
  std::size_t path = scheme == std::string::npos
                         ? url.find('/')
                         : url.find('/', scheme + 3);
  if (path == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path), prefix};
}

bool retryable_status(int status) {
  return status == 429 || status >= 500;
}

}  // namespace

HttpBackend::HttpBackend(HttpConfig config, RetryPolicy retry)
    : config_(std::move(config)),
      retry_(retry),
      in_flight_(config_.max_in_flight) {
  auto [host, prefix] = split_base_url(config_.base_url);
  host_ = host;
  path_prefix_ = prefix;
}

nlohmann::json HttpBackend::post_json(const std::string& path,
                                      const nlohmann::json& body) {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<64>& sem;
    ~Release() { sem.release(); }
  } release{in_flight_};

  httplib::Client client(host_);
  client.set_read_timeout(300, 0);
  httplib::Headers headers;
  if (const char* key = std::getenv("E2C_API_KEY")) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string payload = body.dump();
  auto backoff = retry_.backoff_base;
  for (int attempt = 1;; ++attempt) {
    auto res = client.Post(path_prefix_ + path, headers, payload,
                           "application/json");
    if (res && res->status == 200) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        fail("MalformedResponse", e.what());
      }
    }
    bool transient = !res || retryable_status(res->status);
    if (!transient)
      fail("HttpError", "status " + std::to_string(res->status) + " from " +
                            path + ": " + res->body.substr(0, 200));
    if (attempt >= retry_.max_attempts)
      fail("BackendUnavailable",
           "POST " + path + " failed after " + std::to_string(attempt) +
               " attempts");
    std::this_thread::sleep_for(backoff);
    backoff = std::min(backoff * 2, retry_.backoff_cap);
  }
}

ChatResponse HttpBackend::chat(const ChatRequest& request) {
  validate(request);
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages)
    messages.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json body = {
      {"model", config_.model},
      {"messages", messages},
      {"temperature", request.params.temperature},
      {"max_tokens", request.params.max_tokens},
      {"n", request.params.n},
      {"seed", request.params.seed},
  };

  nlohmann::json j = post_json("/chat/completions", body);
  ChatResponse resp;
  try {
    for (const auto& choice : j.at("choices"))
      resp.completions.push_back(choice.at("message").at("content").get<std::string>());
    if (j.contains("usage")) {
      resp.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      resp.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
  } catch (const nlohmann::json::exception& e) {
    fail("MalformedResponse", e.what());
  }
  if (static_cast<int>(resp.completions.size()) != request.params.n)
    fail("MalformedResponse", "backend returned " +
                                  std::to_string(resp.completions.size()) +
                                  " completions, expected " +
                                  std::to_string(request.params.n));
  return resp;
}

EmbeddingResponse HttpBackend::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) fail("InvalidRequest", "embed requires non-empty input");
  nlohmann::json body = {{"model", config_.embed_model}, {"input", texts}};
  nlohmann::json j = post_json("/embeddings", body);

  EmbeddingResponse resp;
  try {
    for (const auto& item : j.at("data"))
      resp.vectors.push_back(item.at("embedding").get<std::vector<double>>());
    if (j.contains("usage"))
      resp.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
  } catch (const nlohmann::json::exception& e) {
    fail("MalformedResponse", e.what());
  }
  if (resp.vectors.size() != texts.size())
    fail("MalformedResponse", "embedding count mismatch");
  std::size_t dim = resp.vectors.empty() ? 0 : resp.vectors[0].size();
  for (const auto& v : resp.vectors) {
    if (v.size() != dim || dim == 0)
      fail("DimensionMismatch", "ragged embedding vectors from backend");
    for (double x : v)
      if (!std::isfinite(x)) fail("MalformedResponse", "non-finite embedding");
  }
  return resp;
}

}  // namespace e2c
