#pragma once

/**
 * Core domain types: questions, exploration plans, execution traces and the
 * plan/execution segmentation, canonical answers, token accounting.
 *
 * Everything here is an immutable value type and every operation is a pure
 * function, so unrestricted concurrent use is safe.
 */

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <numeric>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "e2c/error.hpp"

namespace e2c {

struct Question {
  std::string id;
  std::string text;
  std::optional<std::string> reference_answer;
};

struct PlanStep {
  int index = 0;           // 1-based
  std::string title;       // normalized head of the step line
  std::string body;        // continuation lines, possibly empty
};

struct ExplorationPlan {
  std::string raw_text;
  std::vector<PlanStep> steps;  // empty when the plan failed to parse
  std::int64_t token_count = 0;
};

struct ExecutionTrace {
  std::string raw_text;
  std::optional<std::string> boxed_answer;
  std::int64_t token_count = 0;
};

struct SegmentedTrace {
  ExplorationPlan plan;
  ExecutionTrace execution;
  std::size_t segment_boundary = 0;  // char offset into the concatenated text
};

struct GenerationParams {
  double temperature = 0.9;
  int max_tokens = 4096;
  int n = 1;
  std::uint64_t seed = 0;
};

inline void validate(const GenerationParams& p) {
  if (p.temperature < 0.0 || p.temperature > 2.0)
    fail("InvalidParams", "temperature must be in [0, 2]");
  if (p.max_tokens < 1) fail("InvalidParams", "max_tokens must be positive");
  if (p.n < 1) fail("InvalidParams", "n must be >= 1");
}

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  TokenUsage& operator+=(const TokenUsage& o) {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    return *this;
  }
  friend TokenUsage operator+(TokenUsage a, const TokenUsage& b) {
    return a += b;
  }
  bool operator==(const TokenUsage&) const = default;
};

// Whitespace-separated token count; the mock backend's usage model.
inline std::int64_t count_ws_tokens(std::string_view text) {
  std::int64_t n = 0;
  bool in_tok = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_tok = false;
    } else if (!in_tok) {
      in_tok = true;
      ++n;
    }
  }
  return n;
}

// ---------------------------------------------------------------------------
// Answers
// ---------------------------------------------------------------------------

// Exact rational in lowest terms, denominator > 0.
struct Rational {
  long long num = 0;
  long long den = 1;

  static Rational make(long long n, long long d) {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    long long g = std::gcd(n < 0 ? -n : n, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
    return Rational{n, d};
  }
  bool operator==(const Rational&) const = default;
};

struct Answer {
  std::string canonical;
  std::optional<Rational> numeric_value;
};

// Numeric equality when both sides parse as rationals, else exact canonical
// string equality.
inline bool answers_equal(const Answer& a, const Answer& b) {
  if (a.numeric_value && b.numeric_value)
    return *a.numeric_value == *b.numeric_value;
  return a.canonical == b.canonical;
}

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string collapse_ws(std::string_view s) {
  std::string out;
  bool pending = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending = !out.empty();
    } else {
      if (pending) out.push_back(' ');
      pending = false;
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

// Parses an optionally signed integer with overflow guard.
inline std::optional<long long> parse_ll(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  bool neg = false;
  if (s[0] == '+' || s[0] == '-') {
    neg = s[0] == '-';
    i = 1;
  }
  if (i >= s.size()) return std::nullopt;
  long long v = 0;
  for (; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
    if (v > (9223372036854775807LL - 9) / 10) return std::nullopt;
    v = v * 10 + (s[i] - '0');
  }
  return neg ? -v : v;
}

// integer | decimal | a/b | \frac{a}{b}
inline std::optional<Rational> parse_rational(std::string_view s) {
  if (auto v = parse_ll(s)) return Rational::make(*v, 1);

  auto slash = s.find('/');
  if (slash != std::string_view::npos) {
    auto n = parse_ll(trim(s.substr(0, slash)));
    auto d = parse_ll(trim(s.substr(slash + 1)));
    if (n && d && *d != 0) return Rational::make(*n, *d);
    return std::nullopt;
  }

  auto dot = s.find('.');
  if (dot != std::string_view::npos && s.find('.', dot + 1) == std::string_view::npos) {
    std::string_view head = s.substr(0, dot);
    std::string_view frac = s.substr(dot + 1);
    if (frac.size() > 12) return std::nullopt;
    bool neg = !head.empty() && head[0] == '-';
    if (!head.empty() && (head[0] == '+' || head[0] == '-')) head.remove_prefix(1);
    if (head.empty() && frac.empty()) return std::nullopt;
    auto ip = head.empty() ? std::optional<long long>(0) : parse_ll(head);
    auto fp = frac.empty() ? std::optional<long long>(0) : parse_ll(frac);
    if (!ip || !fp || *ip < 0 || *fp < 0) return std::nullopt;
    long long den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    long long num = *ip * den + *fp;
    return Rational::make(neg ? -num : num, den);
  }

  static const std::regex frac_re(R"(^\\d?frac\{([^{}]+)\}\{([^{}]+)\}$)");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_match(s.begin(), s.end(), m, frac_re)) {
    auto n = parse_ll(trim(m[1].str()));
    auto d = parse_ll(trim(m[2].str()));
    if (n && d && *d != 0) return Rational::make(*n, *d);
  }
  return std::nullopt;
}

}  // namespace detail

// Deterministic canonical form for answer comparison: trim, strip surrounding
// $, strip LaTeX spacing commands, collapse whitespace, strip leading zeros
// on pure integers, lowercase single option letters.
inline Answer canonicalize_answer(std::string_view raw) {
  std::string s = detail::trim(raw);
  if (s.empty()) fail("EmptyAnswer", "answer is whitespace-only");

  while (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
    s = detail::trim(std::string_view(s).substr(1, s.size() - 2));
  }
  if (s.empty()) fail("EmptyAnswer", "answer is empty after stripping $");

  static const std::regex spacing_re(R"(\\[,;:!]|\\qquad|\\quad|\\ )");
  s = std::regex_replace(s, spacing_re, "");
  s = detail::collapse_ws(s);
  if (s.empty()) fail("EmptyAnswer", "answer is empty after normalization");

  // "036" -> "36", "-07" -> "-7"
  if (auto v = detail::parse_ll(s)) {
    s = std::to_string(*v);
  }

  if (s.size() == 1 && std::isalpha(static_cast<unsigned char>(s[0]))) {
    s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  }

  Answer a;
  a.canonical = s;
  a.numeric_value = detail::parse_rational(s);
  return a;
}

// ---------------------------------------------------------------------------
// Plan parsing and step-title normalization
// ---------------------------------------------------------------------------

// Normalizes a step head: markdown bold stripped, cut at the first
// sentence-terminating period or colon, lowercased, punctuation stripped,
// whitespace collapsed.
inline std::string normalize_step_title(std::string_view head) {
  std::string s(head);
  std::string nobold;
  nobold.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '*') continue;
    nobold.push_back(s[i]);
  }
  s = nobold;

  std::size_t cut = s.size();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == ':') {
      cut = i;
      break;
    }
    if (s[i] == '.' &&
        (i + 1 == s.size() ||
         std::isspace(static_cast<unsigned char>(s[i + 1])))) {
      cut = i;
      break;
    }
  }
  s.resize(cut);

  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    if (std::isalnum(c) || std::isspace(c))
      out.push_back(static_cast<char>(std::tolower(c)));
    else
      out.push_back(' ');
  }
  return detail::collapse_ws(out);
}

// Splits text into numbered steps. Returns empty when the text is not a
// well-formed numbered list (indices must start at 1 and strictly increase);
// callers treat that as UnparseablePlan and keep the raw text.
inline std::vector<PlanStep> parse_plan_steps(std::string_view text) {
  static const std::regex step_re(R"(^\s*(\d+)[.)]\s*(.*)$)");
  std::vector<PlanStep> steps;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string line(text.substr(pos, eol == std::string_view::npos
                                          ? std::string_view::npos
                                          : eol - pos));
    std::smatch m;
    if (std::regex_match(line, m, step_re)) {
      PlanStep step;
      step.index = std::stoi(m[1].str());
      step.title = normalize_step_title(m[2].str());
      steps.push_back(std::move(step));
    } else if (!steps.empty()) {
      std::string t = detail::trim(line);
      if (!t.empty()) {
        if (!steps.back().body.empty()) steps.back().body.push_back('\n');
        steps.back().body += t;
      }
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }

  if (steps.empty() || steps.front().index != 1) return {};
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (steps[i].index <= steps[i - 1].index) return {};
  }
  for (const auto& s : steps) {
    if (s.title.empty()) return {};
  }
  return steps;
}

inline ExplorationPlan make_plan(std::string raw_text) {
  ExplorationPlan p;
  p.steps = parse_plan_steps(raw_text);
  p.token_count = count_ws_tokens(raw_text);
  p.raw_text = std::move(raw_text);
  return p;
}

// ---------------------------------------------------------------------------
// Trace segmentation
// ---------------------------------------------------------------------------

struct DelimiterConfig {
  // Matches the "### Execution" / "Execution:" style headers; case-insensitive,
  // anchored at line starts. First match wins.
  std::string pattern = R"(^#*[ \t]*execution\b)";
};

// Splits text at the first delimiter match: plan = text before the match,
// execution = text from the match onward. Reassembling the two spans
// reproduces the input byte-for-byte.
inline SegmentedTrace segment_trace(std::string_view text,
                                    const DelimiterConfig& config = {},
                                    std::vector<std::string>* warnings = nullptr) {
  std::regex re(config.pattern,
                std::regex::ECMAScript | std::regex::icase | std::regex::multiline);
  auto begin = std::cregex_iterator(text.data(), text.data() + text.size(), re);
  auto end = std::cregex_iterator();
  if (begin == end) fail("MissingBoundary", "no execution delimiter in text");

  std::size_t boundary = static_cast<std::size_t>(begin->position(0));
  if (std::next(begin) != end && warnings) {
    warnings->push_back("AmbiguousBoundary: multiple execution delimiters, "
                        "using first occurrence");
  }
  if (boundary == 0) fail("MissingBoundary", "plan span is empty");

  SegmentedTrace trace;
  trace.segment_boundary = boundary;
  trace.plan = make_plan(std::string(text.substr(0, boundary)));
  std::string exec_text(text.substr(boundary));
  trace.execution.token_count = count_ws_tokens(exec_text);
  trace.execution.raw_text = std::move(exec_text);
  return trace;
}

}  // namespace e2c
