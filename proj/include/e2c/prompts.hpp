#pragma once

/**
 * Prompt templates and model-output parsers: boxed answers, step titles,
 * adherence scores, judge selections.
 *
 * Templates use <name> placeholders and are embedded as versioned resources;
 * `e2c prompts render <name>` dumps them for inspection.
 */

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "e2c/core.hpp"
#include "e2c/error.hpp"

namespace e2c::prompts {

inline constexpr const char* kPromptVersion = "1";

struct PromptTemplate {
  std::string name;
  std::string body;
  std::set<std::string> required_placeholders;
};

inline const std::vector<PromptTemplate>& all_templates() {
  static const std::vector<PromptTemplate> templates = {
      {"exploration_summarize",
       "Role: You are an expert problem-solver.\n"
       "Task: Distill a complex reasoning process into a clear, actionable plan.\n"
       "\n"
       "Input:\n"
       "- Problem: <question>\n"
       "- Reasoning Process: <content>\n"
       "\n"
       "Output Requirements:\n"
       "1. Format: Present the summary as a numbered list (e.g., 1., 2., 3.).\n"
       "2. Content: For each step, describe only the essential action to be taken "
       "(e.g., \"Calculate X,\" \"Verify Y\"). Be concise and prescriptive.\n"
       "3. Focus: Omit explanations, justifications, or intermediate conclusions.\n"
       "\n"
       "Goal: Create a high-level plan that is easy to follow and execute.\n",
       {"question", "content"}},

      {"execution",
       "Role: You are a meticulous problem solver.\n"
       "Task: Solve the given question by strictly following the provided "
       "guideline, showing all detailed reasoning.\n"
       "\n"
       "Input:\n"
       "- Question: <question>\n"
       "- Guideline: <content>\n"
       "\n"
       "Output Requirements:\n"
       "1. Follow the guideline exactly, numbering each step accordingly "
       "(e.g., 1., 2., ...).\n"
       "2. Do not include any content outside the solution steps.\n"
       "3. Begin from Step 1, expanding each step with necessary calculations "
       "and logical reasoning.\n"
       "4. Conclude by placing the final answer within a `\\boxed{}` environment.\n"
       "\n"
       "Important: Ensure every mathematical or logical operation is explicitly "
       "shown.\n",
       {"question", "content"}},

      {"efsft_summarize_medical",
       "Role: You are a professional doctor.\n"
       "Task: Summarize the diagnostic reasoning process into a concise, "
       "actionable guideline.\n"
       "\n"
       "Input:\n"
       "- Question: <question>\n"
       "- Reasoning Process: <content>\n"
       "\n"
       "Output Requirements:\n"
       "1. Structure: Present the summary as a numbered list (1., 2., ...), "
       "starting directly with the first step.\n"
       "2. Conciseness: Use no more than 5 steps. Each step must be under 15 "
       "words and state only the critical objective (e.g., \"Assess cardiac "
       "function\").\n"
       "3. Focus: Highlight the most critical diagnostic step. Omit all "
       "explanations, justifications, or unrelated content.\n"
       "\n"
       "Goal: Create a concise and accurate diagnostic plan focused on key "
       "actions.\n",
       {"question", "content"}},

      {"judge_select",
       "Role: You are an expert mathematical reasoner and an impartial judge. "
       "Your task is to evaluate several proposed plans for solving a given "
       "math problem and identify the single best one.\n"
       "\n"
       "Input:\n"
       "- Problem: <problem>\n"
       "- Candidate Plans: A numbered list of K exploration plans.\n"
       "<plans>\n"
       "\n"
       "Instructions:\n"
       "1. Carefully analyze the problem and each of the K candidate plans.\n"
       "2. Assess the plans based on their logical soundness, potential for "
       "success, and efficiency.\n"
       "3. Select the single best plan that is most likely to lead to a correct "
       "and complete solution.\n"
       "\n"
       "Output Format:\n"
       "Output only the full text of the single best plan you have selected. "
       "Do not add any extra commentary, explanation, or formatting.\n",
       {"problem", "plans"}},

      {"adherence_judge",
       "Role: You are a rigorous evaluator. Your task is to judge if the "
       "execution strictly follows the exploration plan.\n"
       "\n"
       "Input:\n"
       "- Question: <question>\n"
       "- Exploration (PLAN): <exploration>\n"
       "- Execution: <execution>\n"
       "\n"
       "Evaluation Criteria:\n"
       "Provide a final score of 0, 0.5, or 1.0 based on the following:\n"
       "- 1.0 (Strictly Adheres): The execution follows the exploration's logic "
       "and key steps exactly. All critical reasoning or calculations in the "
       "exploration are present and correctly implemented in the execution.\n"
       "- 0.5 (Partially Adheres): The execution addresses the main goal but "
       "deviates in specifics: it may skip non-critical steps, change the order "
       "of minor steps, or contain minor logical gaps while reaching a correct "
       "conclusion.\n"
       "- 0.0 (Does Not Adhere): The execution ignores major exploration steps, "
       "follows a different approach, contains significant logical errors, or "
       "fails to implement the exploration's core intent.\n"
       "\n"
       "Output Format:\n"
       "First, provide a concise rationale comparing the exploration and "
       "execution. Then, output the score strictly as:\n"
       "[RATIONALE]: <your analysis>\n"
       "[SCORE]: <0.0, 0.5, or 1.0>\n",
       {"question", "exploration", "execution"}},

      {"pure_exploration",
       "Role: You are a careful math problem solver.\n"
       "\n"
       "Input:\n"
       "- Problem: <problem>\n"
       "\n"
       "Instructions:\n"
       "- Produce exactly one short reasoning sketch (an exploration) that "
       "helps approach the problem.\n"
       "- The exploration must be concise (about 2-4 short sentences).\n"
       "- Do not produce the final answer in this call.\n"
       "- Stop immediately after the single exploration text and do not append "
       "any extra commentary, labels, or formatting.\n"
       "\n"
       "Output format: A single short exploration paragraph (2-4 short "
       "sentences) and nothing else.\n",
       {"problem"}},

      {"pure_fusion_execution",
       "Role: You are a careful math problem solver.\n"
       "\n"
       "Input:\n"
       "- Problem: <problem>\n"
       "- Explorations:\n"
       "<explorations>\n"
       "\n"
       "Instructions:\n"
       "- Learn from the provided numbered explorations and combine their "
       "useful reasoning to compute the final answer.\n"
       "- Produce a single Execution: section that carries out the computation "
       "and presents the final answer within a `\\boxed{}` environment.\n"
       "- Stop immediately after the final answer. Do not append extra "
       "commentary, explanations, or any additional text beyond the required "
       "Execution section and the answer.\n",
       {"problem", "explorations"}},

      // Baseline chain-of-thought prompt for greedy / self-consistency runs.
      {"cot",
       "You are a careful problem solver.\n"
       "\n"
       "Problem: <question>\n"
       "\n"
       "Reason step by step, showing all work, and conclude by placing the "
       "final answer within a `\\boxed{}` environment.\n",
       {"question"}},

      // Plan-only sampling prompt for E2C-mode exploration.
      {"plan_sample",
       "You are an expert problem-solver.\n"
       "\n"
       "Problem: <question>\n"
       "\n"
       "Produce a concise, high-level plan for solving the problem as a "
       "numbered list (1., 2., 3., ...). For each step state only the "
       "essential action to be taken. Do not carry out the calculations and "
       "do not state the final answer.\n",
       {"question"}},
  };
  return templates;
}

inline const PromptTemplate& get_template(std::string_view name) {
  for (const auto& t : all_templates()) {
    if (t.name == name) return t;
  }
  fail("UnknownTemplate", std::string(name));
}

using Bindings = std::map<std::string, std::string>;

inline std::string render(std::string_view template_name, const Bindings& bindings) {
  const PromptTemplate& tpl = get_template(template_name);
  for (const auto& req : tpl.required_placeholders) {
    if (!bindings.count(req))
      fail("MissingBinding", tpl.name + " requires <" + req + ">");
  }
  std::string out = tpl.body;
  for (const auto& [key, value] : bindings) {
    std::string marker = "<" + key + ">";
    std::size_t pos = 0;
    while ((pos = out.find(marker, pos)) != std::string::npos) {
      out.replace(pos, marker.size(), value);
      pos += value.size();
    }
  }
  return out;
}

// "Plan 1: ...\nPlan 2: ..." block for the judge prompt.
inline std::string format_plan_list(const std::vector<std::string>& plans) {
  std::string out;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    out += "Plan " + std::to_string(i + 1) + ": " + plans[i];
    if (out.empty() || out.back() != '\n') out.push_back('\n');
  }
  return out;
}

// "Exploration 1: ..." block for the pure-prompt fusion execution.
inline std::string format_exploration_list(const std::vector<std::string>& explorations) {
  std::string out;
  for (std::size_t i = 0; i < explorations.size(); ++i) {
    out += "Exploration " + std::to_string(i + 1) + ": " + explorations[i];
    if (out.empty() || out.back() != '\n') out.push_back('\n');
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output parsers
// ---------------------------------------------------------------------------

// Content of the LAST balanced \boxed{...} group, canonicalized. Nested
// braces are handled; absence (or an empty box) is a value, not an error.
inline std::optional<Answer> extract_boxed_answer(std::string_view text) {
  const std::string_view marker = "\\boxed{";
  std::optional<Answer> result;
  std::size_t pos = 0;
  while ((pos = text.find(marker, pos)) != std::string_view::npos) {
    std::size_t start = pos + marker.size();
    int depth = 1;
    std::size_t i = start;
    for (; i < text.size() && depth > 0; ++i) {
      if (text[i] == '{') ++depth;
      else if (text[i] == '}') --depth;
    }
    if (depth == 0) {
      std::string_view content = text.substr(start, i - 1 - start);
      try {
        result = canonicalize_answer(content);
      } catch (const Error&) {
        // empty box: keep previous result
      }
    }
    pos = start;
  }
  return result;
}

using StepTitleSet = std::set<std::string>;

// Titles of numbered-list lines (and bold header lines), normalized; set
// semantics collapse duplicates.
inline StepTitleSet extract_step_titles(std::string_view text) {
  static const std::regex numbered_re(R"(^\s*(\d+)[.)]\s*(.+)$)");
  static const std::regex bold_re(R"(^\s*\*\*(.+)$)");
  StepTitleSet titles;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string line(text.substr(pos, eol == std::string_view::npos
                                          ? std::string_view::npos
                                          : eol - pos));
    std::smatch m;
    std::string head;
    if (std::regex_match(line, m, numbered_re)) {
      head = m[2].str();
    } else if (std::regex_match(line, m, bold_re)) {
      head = m[1].str();
    }
    if (!head.empty()) {
      std::string title = normalize_step_title(head);
      if (!title.empty()) titles.insert(std::move(title));
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  return titles;
}

struct AdherenceScore {
  double value = 0.0;  // exactly one of {0.0, 0.5, 1.0}
  std::string rationale;
};

inline AdherenceScore parse_adherence(std::string_view text) {
  const std::string_view score_marker = "[SCORE]:";
  std::size_t score_pos = text.rfind(score_marker);
  if (score_pos == std::string_view::npos)
    fail("NoScoreMarker", "no [SCORE]: marker in judge output");

  std::string tail = detail::trim(text.substr(score_pos + score_marker.size()));
  // take the leading number token
  std::size_t end = 0;
  while (end < tail.size() &&
         (std::isdigit(static_cast<unsigned char>(tail[end])) ||
          tail[end] == '.' || tail[end] == '-' || tail[end] == '+')) {
    ++end;
  }
  double parsed;
  try {
    parsed = std::stod(tail.substr(0, end));
  } catch (const std::exception&) {
    fail("NoScoreMarker", "unparseable score after [SCORE]:");
  }

  AdherenceScore score;
  bool bucketed = false;
  for (double bucket : {0.0, 0.5, 1.0}) {
    if (std::abs(parsed - bucket) <= 1e-9) {
      score.value = bucket;
      bucketed = true;
      break;
    }
  }
  if (!bucketed) fail("OutOfBucket", "score " + tail.substr(0, end) +
                                         " is not one of {0.0, 0.5, 1.0}");

  const std::string_view rationale_marker = "[RATIONALE]:";
  std::size_t rat_pos = text.rfind(rationale_marker, score_pos);
  if (rat_pos != std::string_view::npos) {
    std::size_t rat_start = rat_pos + rationale_marker.size();
    score.rationale = detail::trim(text.substr(rat_start, score_pos - rat_start));
  }
  return score;
}

struct JudgeSelection {
  int index = 1;  // 1-based plan index
  bool fallback = false;
};

namespace detail_judge {
inline std::string normalize(std::string_view s) {
  std::string lower;
  lower.reserve(s.size());
  for (unsigned char c : s)
    lower.push_back(static_cast<char>(std::tolower(c)));
  return e2c::detail::collapse_ws(e2c::detail::trim(lower));
}
}  // namespace detail_judge

// Fallback ladder: exact normalized match, then best common-prefix overlap
// >= 50% of the plan's length, then index 1 with a warning.
inline JudgeSelection match_judge_selection(
    std::string_view judge_output, const std::vector<std::string>& plans,
    std::vector<std::string>* warnings = nullptr) {
  if (plans.empty()) fail("EmptyPlanList", "judge selection over zero plans");
  std::string out = detail_judge::normalize(judge_output);

  for (std::size_t i = 0; i < plans.size(); ++i) {
    if (detail_judge::normalize(plans[i]) == out)
      return {static_cast<int>(i) + 1, false};
  }

  std::size_t best_i = 0, best_overlap = 0;
  bool found = false;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    std::string p = detail_judge::normalize(plans[i]);
    std::size_t overlap = 0;
    while (overlap < p.size() && overlap < out.size() &&
           p[overlap] == out[overlap]) {
      ++overlap;
    }
    if (!p.empty() && overlap * 2 >= p.size() && overlap > best_overlap) {
      best_overlap = overlap;
      best_i = i;
      found = true;
    }
  }
  if (found) return {static_cast<int>(best_i) + 1, false};

  if (warnings)
    warnings->push_back("JudgeFallback: judge output matched no plan, "
                        "defaulting to plan 1");
  return {1, true};
}

}  // namespace e2c::prompts
