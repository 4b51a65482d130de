#pragma once

/**
 * Chat-completion and embedding backend contract, with two implementations:
 *
 *  - MockBackend: fully deterministic offline backend. Responses come either
 *    from a script (keyed by a stable request fingerprint) or from a seeded
 *    synthesizer that recognizes the shipped prompt templates and produces
 *    plausible plans / executions / judge outputs. Replaying the same request
 *    sequence with the same script and seed yields byte-identical transcripts.
 *
 *  - HttpBackend: OpenAI-compatible JSON over HTTP (POST {base}/chat/completions
 *    and {base}/embeddings), bearer auth from E2C_API_KEY, retry with capped
 *    exponential backoff, bounded in-flight requests.
 */

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "e2c/core.hpp"
#include "e2c/error.hpp"
#include "e2c/prompts.hpp"
#include "e2c/rng.hpp"

namespace e2c {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  GenerationParams params;
};

struct ChatResponse {
  std::vector<std::string> completions;  // length == params.n
  TokenUsage usage;
};

struct EmbeddingResponse {
  std::vector<std::vector<double>> vectors;
  TokenUsage usage;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{100};
  std::chrono::milliseconds backoff_cap{2000};
};

inline void validate(const ChatRequest& request) {
  validate(request.params);
  bool has_user = false;
  for (const auto& m : request.messages) {
    if (m.role != "system" && m.role != "user" && m.role != "assistant")
      fail("InvalidRequest", "unknown role: " + m.role);
    if (m.role == "user") has_user = true;
  }
  if (!has_user) fail("InvalidRequest", "at least one user message required");
}

// Stable hash of (rendered messages, temperature, n, seed). Pins mock scripts
// and golden transcripts to exact pipeline behavior.
inline std::uint64_t fingerprint(const ChatRequest& request) {
  char buf[64];
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& m : request.messages) {
    h = fnv1a64(m.role, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(m.content, h);
    h = fnv1a64("\x1e", h);
  }
  std::snprintf(buf, sizeof buf, "%.6g|%d|%llu", request.params.temperature,
                request.params.n,
                static_cast<unsigned long long>(request.params.seed));
  return fnv1a64(buf, h);
}

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse chat(const ChatRequest& request) = 0;
  virtual EmbeddingResponse embed(const std::vector<std::string>& texts) = 0;

  // Sequential batch; responses are delivered in request order.
  std::vector<ChatResponse> chat_batch(const std::vector<ChatRequest>& requests) {
    std::vector<ChatResponse> out;
    out.reserve(requests.size());
    for (const auto& r : requests) out.push_back(chat(r));
    return out;
  }
};

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

struct MockConfig {
  std::uint64_t seed = 0;
  int embed_dim = 16;
  int plan_tokens = 40;    // approximate completion tokens for plan outputs
  int exec_tokens = 120;   // approximate completion tokens for executions/CoT
  std::vector<std::string> answer_pool = {"36", "45", "27"};
};

class MockBackend : public Backend {
 public:
  explicit MockBackend(MockConfig config = {}, RetryPolicy retry = {})
      : config_(std::move(config)), retry_(retry) {}

  // Queue a scripted response (one vector of completions per call) for the
  // given request.
  void script(const ChatRequest& request, std::vector<std::string> completions) {
    std::lock_guard lock(mutex_);
    scripts_[fingerprint(request)].push_back(std::move(completions));
  }
  void script_fingerprint(std::uint64_t fp, std::vector<std::string> completions) {
    std::lock_guard lock(mutex_);
    scripts_[fp].push_back(std::move(completions));
  }

  // JSONL of {"fingerprint": "<u64>", "responses": [[c1, c2], ...]}
  void load_script_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open mock script " + path);
    std::string line;
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      auto j = nlohmann::json::parse(line);
      std::uint64_t fp = std::stoull(j.at("fingerprint").get<std::string>());
      for (const auto& resp : j.at("responses")) {
        script_fingerprint(fp, resp.get<std::vector<std::string>>());
      }
    }
  }

  // The next n chat/embed calls fail with a transient error (consumed by the
  // retry loop).
  void inject_transient_failures(int n) {
    std::lock_guard lock(mutex_);
    pending_failures_ = n;
  }

  // Total attempts observed, including failed ones.
  int attempts() const { return attempts_; }

  ChatResponse chat(const ChatRequest& request) override {
    validate(request);
    std::uint64_t fp = fingerprint(request);
    for (int attempt = 1;; ++attempt) {
      std::lock_guard lock(mutex_);
      ++attempts_;
      if (pending_failures_ > 0) {
        --pending_failures_;
        if (attempt >= retry_.max_attempts)
          fail("BackendUnavailable",
               "mock transient failure persisted for " +
                   std::to_string(attempt) + " attempts");
        continue;
      }
      return produce(request, fp);
    }
  }

  EmbeddingResponse embed(const std::vector<std::string>& texts) override {
    if (texts.empty()) fail("InvalidRequest", "embed requires non-empty input");
    for (const auto& t : texts)
      if (t.empty()) fail("InvalidRequest", "embed texts must be non-empty");

    EmbeddingResponse out;
    for (const auto& text : texts) {
      Rng rng(hash_combine(fnv1a64(text), config_.seed ^ 0xe2c0ffee));
      std::vector<double> v(config_.embed_dim);
      for (auto& x : v) x = rng.next_double() * 2.0 - 1.0;
      out.vectors.push_back(std::move(v));
      out.usage.prompt_tokens += count_ws_tokens(text);
    }
    return out;
  }

 private:
  ChatResponse produce(const ChatRequest& request, std::uint64_t fp) {
    ChatResponse resp;
    for (const auto& m : request.messages)
      resp.usage.prompt_tokens += count_ws_tokens(m.content);

    auto it = scripts_.find(fp);
    if (it != scripts_.end() && !it->second.empty()) {
      resp.completions = it->second.front();
      it->second.pop_front();
      if (static_cast<int>(resp.completions.size()) != request.params.n)
        fail("MalformedResponse", "scripted completion count != n");
    } else {
      std::string prompt;
      for (const auto& m : request.messages) prompt += m.content + "\n";
      for (int i = 0; i < request.params.n; ++i)
        resp.completions.push_back(synthesize(prompt, fp, i));
    }
    for (const auto& c : resp.completions)
      resp.usage.completion_tokens += count_ws_tokens(c);
    return resp;
  }

  // --- prompt-aware synthesis ----------------------------------------------

  static std::string_view section(std::string_view text, std::string_view from,
                                  std::string_view to) {
    std::size_t b = text.find(from);
    if (b == std::string_view::npos) return {};
    b += from.size();
    std::size_t e = text.find(to, b);
    if (e == std::string_view::npos) e = text.size();
    return text.substr(b, e - b);
  }

  std::string pick_answer(std::uint64_t fp, int idx) const {
    std::uint64_t h = hash_combine(fp, 0x9e3779b9u + static_cast<std::uint64_t>(idx));
    h = hash_combine(h, config_.seed);
    return config_.answer_pool[h % config_.answer_pool.size()];
  }

  static const std::vector<std::string>& phrase_bank() {
    static const std::vector<std::string> bank = {
        "Identify the given quantities and constraints",
        "Define variables for the unknowns",
        "Set up the governing equations",
        "Determine the relationship between the quantities",
        "Solve the resulting system for the unknown",
        "Test small integer candidates",
        "Estimate the answer by proportional reasoning",
        "Verify the result against the constraints",
        "Calculate the final quantity",
    };
    return bank;
  }

  // Pads a line with deterministic filler words up to roughly `words` tokens.
  static void pad_words(std::string& out, int words, std::uint64_t h) {
    static const std::vector<std::string> filler = {
        "we",        "compute",  "each",   "value",  "substitute", "into",
        "the",       "relation", "and",    "simplify", "terms",    "then",
        "combine",   "results",  "to",     "obtain", "a",          "consistent",
        "expression"};
    for (int i = 0; i < words; ++i) {
      out += filler[(h + i) % filler.size()];
      out.push_back((i + 1) % 12 == 0 ? '\n' : ' ');
    }
  }

  std::string make_numbered_plan(std::uint64_t h) const {
    const auto& bank = phrase_bank();
    int n_steps = 3 + static_cast<int>(h % 3);
    std::size_t offset = (h >> 8) % bank.size();
    std::string out;
    int per_step = config_.plan_tokens / n_steps;
    for (int i = 0; i < n_steps; ++i) {
      out += std::to_string(i + 1) + ". " + bank[(offset + i) % bank.size()] + ".";
      int used = 2 + static_cast<int>(count_ws_tokens(bank[(offset + i) % bank.size()]));
      if (per_step > used) {
        out.push_back(' ');
        pad_words(out, per_step - used, hash_combine(h, i));
      }
      out.push_back('\n');
    }
    return out;
  }

  std::string make_execution(std::string_view guideline, std::uint64_t h,
                             const std::string& answer) const {
    auto titles = prompts::extract_step_titles(guideline);
    std::string out = "### Execution\n";
    int idx = 1;
    int budget = config_.exec_tokens;
    int per_step = titles.empty() ? budget
                                  : budget / static_cast<int>(titles.size());
    for (const auto& t : titles) {
      out += std::to_string(idx) + ". " + t + ".\n";
      int used = 2 + static_cast<int>(count_ws_tokens(t));
      if (per_step > used) {
        pad_words(out, per_step - used, hash_combine(h, idx));
        out.push_back('\n');
      }
      ++idx;
    }
    if (titles.empty()) {
      pad_words(out, budget, h);
      out.push_back('\n');
    }
    out += "Final answer: \\boxed{" + answer + "}\n";
    return out;
  }

  std::string synthesize(std::string_view prompt, std::uint64_t fp, int idx) const {
    std::uint64_t h = hash_combine(hash_combine(fp, config_.seed),
                                   static_cast<std::uint64_t>(idx) + 1);

    if (prompt.find("impartial judge") != std::string_view::npos) {
      // echo one candidate plan verbatim
      std::vector<std::string> plans;
      std::string_view rest = prompt;
      std::size_t pos = rest.find("Candidate Plans");
      if (pos != std::string_view::npos) rest = rest.substr(pos);
      for (int k = 1;; ++k) {
        std::string from = "Plan " + std::to_string(k) + ": ";
        std::string to = "\nPlan " + std::to_string(k + 1) + ": ";
        std::size_t b = rest.find(from);
        if (b == std::string_view::npos) break;
        b += from.size();
        std::size_t e = rest.find(to, b);
        if (e == std::string_view::npos) {
          e = rest.find("\n\nInstructions:", b);
          if (e == std::string_view::npos) e = rest.size();
        }
        plans.emplace_back(rest.substr(b, e - b));
      }
      if (plans.empty()) return "no plans found";
      return plans[h % plans.size()];
    }

    if (prompt.find("rigorous evaluator") != std::string_view::npos) {
      auto plan = section(prompt, "Exploration (PLAN): ", "\n- Execution: ");
      auto exec = section(prompt, "\n- Execution: ", "\n\nEvaluation Criteria:");
      auto s1 = prompts::extract_step_titles(plan);
      auto s2 = prompts::extract_step_titles(exec);
      std::size_t common = 0;
      for (const auto& t : s1) common += s2.count(t);
      const char* score = "0.0";
      if (!s1.empty() && common == s1.size())
        score = "1.0";
      else if (common > 0)
        score = "0.5";
      return std::string("[RATIONALE]: step overlap ") + std::to_string(common) +
             "/" + std::to_string(s1.size()) + "\n[SCORE]: " + score;
    }

    if (prompt.find("Distill a complex reasoning process") != std::string_view::npos ||
        prompt.find("professional doctor") != std::string_view::npos ||
        prompt.find("high-level plan for solving") != std::string_view::npos) {
      return make_numbered_plan(h);
    }

    if (prompt.find("meticulous problem solver") != std::string_view::npos) {
      auto guideline = section(prompt, "- Guideline: ", "\nOutput Requirements:");
      return make_execution(guideline, h, pick_answer(fp, idx));
    }

    if (prompt.find("reasoning sketch") != std::string_view::npos) {
      const auto& bank = phrase_bank();
      std::size_t o = h % bank.size();
      return bank[o] + ", then " +
             static_cast<char>(std::tolower(bank[(o + 2) % bank.size()][0])) +
             bank[(o + 2) % bank.size()].substr(1) + ".";
    }

    if (prompt.find("combine their useful reasoning") != std::string_view::npos) {
      std::string out = "Execution:\n";
      pad_words(out, config_.exec_tokens, h);
      out += "\nFinal answer: \\boxed{" + pick_answer(fp, idx) + "}\n";
      return out;
    }

    if (prompt.find("Reason step by step") != std::string_view::npos) {
      std::string out = "Working through the problem.\n";
      pad_words(out, config_.exec_tokens, h);
      out += "\nFinal answer: \\boxed{" + pick_answer(fp, idx) + "}\n";
      return out;
    }

    std::string out;
    pad_words(out, 8, h);
    return out;
  }

  MockConfig config_;
  RetryPolicy retry_;
  mutable std::mutex mutex_;
  std::map<std::uint64_t, std::deque<std::vector<std::string>>> scripts_;
  int pending_failures_ = 0;
  int attempts_ = 0;
};

// ---------------------------------------------------------------------------
// HTTP backend (OpenAI-compatible)
// ---------------------------------------------------------------------------

struct HttpConfig {
  std::string base_url;    // e.g. http://localhost:8000/v1
  std::string model;
  std::string embed_model;
  int max_in_flight = 8;
};

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpConfig config, RetryPolicy retry = {});
  ChatResponse chat(const ChatRequest& request) override;
  EmbeddingResponse embed(const std::vector<std::string>& texts) override;

 private:
  nlohmann::json post_json(const std::string& path, const nlohmann::json& body);

  HttpConfig config_;
  RetryPolicy retry_;
  std::string host_;         // scheme://host:port
  std::string path_prefix_;  // e.g. /v1
  std::counting_semaphore<64> in_flight_{8};
};

}  // namespace e2c
