#pragma once

/**
 * Verifiable-reward components: answer reward, length reward, instruction
 * reward, and their composition. The instruction reward applies only in
 * E2C mode; the plain GRPO baseline uses answer + length only.
 */

#include <algorithm>
#include <optional>

#include "e2c/core.hpp"
#include "e2c/error.hpp"
#include "e2c/prompts.hpp"

namespace e2c::reward {

struct LengthRewardInputs {
  std::int64_t length = 0;          // output length, tokens
  std::int64_t valid_length = 4096; // threshold before the penalty ramps
  std::int64_t buffer_length = 4096;
};

struct RewardComponents {
  double answer = 0.0;       // {0, 1}
  double length = 0.0;       // [-1, 0]
  double instruction = 0.0;  // [-0.1, 0]
  double total() const { return answer + length + instruction; }
};

// r_l = -clip(0, 1, (L - L_valid) / L_buffer)
inline double length_reward(const LengthRewardInputs& in) {
  if (in.buffer_length <= 0) fail("NonPositiveBuffer", "L_buffer must be > 0");
  double excess = static_cast<double>(in.length - in.valid_length) /
                  static_cast<double>(in.buffer_length);
  return -std::min(1.0, std::max(0.0, excess));
}

// r_instr = 0.1 * (|S1 n S2| / max(|S1|, |S2|) - 1); 0 when both sets empty.
inline double instruction_reward(const prompts::StepTitleSet& s1,
                                 const prompts::StepTitleSet& s2) {
  std::size_t max_size = std::max(s1.size(), s2.size());
  if (max_size == 0) return 0.0;
  std::size_t common = 0;
  for (const auto& t : s1) common += s2.count(t);
  return 0.1 * (static_cast<double>(common) / static_cast<double>(max_size) - 1.0);
}

inline double answer_reward(const std::optional<Answer>& predicted,
                            const Answer& reference) {
  if (!predicted) return 0.0;
  return answers_equal(*predicted, reference) ? 1.0 : 0.0;
}

// Sequence-level reward; callers broadcast it to every token of the rollout.
// e2c_mode=false (plain GRPO baseline) drops the instruction component.
inline RewardComponents total_reward(const SegmentedTrace& trace,
                                     const Answer& reference,
                                     const LengthRewardInputs& lengths,
                                     bool e2c_mode = true) {
  RewardComponents r;
  auto predicted = prompts::extract_boxed_answer(trace.execution.raw_text);
  r.answer = answer_reward(predicted, reference);
  r.length = length_reward(lengths);
  if (e2c_mode) {
    r.instruction = instruction_reward(
        prompts::extract_step_titles(trace.plan.raw_text),
        prompts::extract_step_titles(trace.execution.raw_text));
  }
  return r;
}

}  // namespace e2c::reward
