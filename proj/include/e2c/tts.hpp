#pragma once

/**
 * Inference strategies over a shared plan-sampling substrate:
 *
 *   greedy_cot         one full chain at temperature 0
 *   self_consistency   N full chains, unweighted majority vote
 *   e2c_judge          K plans -> LM judge -> single execution
 *   e2c_cluster        K plans -> embed -> k-means -> execute representatives,
 *                      vote with weight = cluster size
 *   e2c_sc             execute all K plans, unweighted vote
 *   e2c_rp             execute one uniformly chosen plan
 *   e2c_prompt_fusion  K prompt-only sketches -> one fused execution
 *
 * Aggregation is always performed in deterministic branch order; per-branch
 * failures degrade the record instead of aborting it.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "e2c/cluster.hpp"
#include "e2c/core.hpp"
#include "e2c/error.hpp"
#include "e2c/gateway.hpp"
#include "e2c/prompts.hpp"
#include "e2c/rng.hpp"

namespace e2c::tts {

enum class StrategyKind {
  GreedyCot,
  SelfConsistency,
  E2cJudge,
  E2cCluster,
  E2cSc,
  E2cRp,
  E2cPromptFusion,
};

inline const char* strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::GreedyCot: return "greedy_cot";
    case StrategyKind::SelfConsistency: return "self_consistency";
    case StrategyKind::E2cJudge: return "e2c_judge";
    case StrategyKind::E2cCluster: return "e2c_cluster";
    case StrategyKind::E2cSc: return "e2c_sc";
    case StrategyKind::E2cRp: return "e2c_rp";
    case StrategyKind::E2cPromptFusion: return "e2c_prompt_fusion";
  }
  return "unknown";
}

inline StrategyKind parse_strategy(std::string_view name) {
  for (StrategyKind k :
       {StrategyKind::GreedyCot, StrategyKind::SelfConsistency,
        StrategyKind::E2cJudge, StrategyKind::E2cCluster, StrategyKind::E2cSc,
        StrategyKind::E2cRp, StrategyKind::E2cPromptFusion}) {
    if (name == strategy_name(k)) return k;
  }
  fail("UnknownStrategy", std::string(name));
}

struct StrategyConfig {
  StrategyKind kind = StrategyKind::GreedyCot;
  int k_or_n = 1;
  int clusters = 3;  // e2c_cluster only
  GenerationParams plan_params{0.9, 1024, 1, 0};
  GenerationParams exec_params{0.9, 4096, 1, 0};
  std::uint64_t seed = 0;
};

inline void validate(const StrategyConfig& c) {
  if (c.k_or_n < 1) fail("InvalidParams", "K/N must be >= 1");
  if (c.kind == StrategyKind::GreedyCot && c.k_or_n != 1)
    fail("InvalidParams", "greedy_cot requires K=1");
  if (c.kind == StrategyKind::E2cCluster && c.clusters > c.k_or_n)
    fail("InvalidParams", "M must be <= K for e2c_cluster");
}

// ---------------------------------------------------------------------------
// Voting
// ---------------------------------------------------------------------------

struct VoteEntry {
  Answer answer;
  double weight = 1.0;
  int execution_index = 0;  // order of execution, for tie-breaking
};

struct TallyBucket {
  Answer answer;  // representative (first seen)
  double weight = 0.0;
  int first_index = 0;
  std::vector<int> contributors;
};

struct VoteTally {
  std::vector<TallyBucket> buckets;
  double total_weight = 0.0;
};

// Buckets entries by answer equivalence (numeric-aware), in execution order.
inline VoteTally tally_votes(const std::vector<VoteEntry>& entries) {
  VoteTally tally;
  for (const auto& e : entries) {
    if (e.weight <= 0) fail("InvalidParams", "vote weights must be > 0");
    bool merged = false;
    for (auto& b : tally.buckets) {
      if (answers_equal(b.answer, e.answer)) {
        b.weight += e.weight;
        b.contributors.push_back(e.execution_index);
        merged = true;
        break;
      }
    }
    if (!merged) {
      tally.buckets.push_back({e.answer, e.weight, e.execution_index,
                               {e.execution_index}});
    }
    tally.total_weight += e.weight;
  }
  return tally;
}

// Argmax of summed weights; ties broken by earliest contributing execution.
inline Answer weighted_vote(const std::vector<VoteEntry>& entries) {
  if (entries.empty()) fail("EmptyVote", "no answers to vote over");
  VoteTally tally = tally_votes(entries);
  const TallyBucket* best = &tally.buckets[0];
  for (const auto& b : tally.buckets) {
    if (b.weight > best->weight + 1e-12 ||
        (std::abs(b.weight - best->weight) <= 1e-12 &&
         b.first_index < best->first_index)) {
      best = &b;
    }
  }
  return best->answer;
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

struct PhaseTokens {
  TokenUsage plan;
  TokenUsage select;  // judge or embedding calls
  TokenUsage execute;

  TokenUsage total() const { return plan + select + execute; }
  std::int64_t completion_total() const {
    return total().completion_tokens;
  }
};

struct ExecutedBranch {
  int plan_index = 0;  // 1-based, into plans
  ExecutionTrace trace;
  double weight = 1.0;
};

struct RunRecord {
  std::string question_id;
  StrategyKind kind = StrategyKind::GreedyCot;
  int k_or_n = 1;
  std::vector<ExplorationPlan> plans;
  std::vector<ExecutedBranch> executed;
  std::optional<Answer> selected_answer;
  std::optional<bool> correct;  // unset when no reference answer
  PhaseTokens tokens;
  bool degraded = false;
  std::vector<std::string> warnings;
  double wall_time_ms = 0.0;  // informational; excluded from serialization
};

inline PhaseTokens account_tokens(const RunRecord& record) {
  return record.tokens;
}

// ---------------------------------------------------------------------------
// Strategy execution
// ---------------------------------------------------------------------------

// K plan samples in sample-index order. Unparseable plans are kept raw with
// empty steps and a per-plan warning.
inline std::vector<ExplorationPlan> sample_plans(
    const Question& question, int k, GenerationParams params, Backend& backend,
    TokenUsage* usage, std::vector<std::string>* warnings,
    bool pure_prompt = false) {
  if (k < 1) fail("InvalidParams", "K must be >= 1");
  std::string prompt =
      pure_prompt
          ? prompts::render("pure_exploration", {{"problem", question.text}})
          : prompts::render("plan_sample", {{"question", question.text}});
  params.n = k;
  ChatRequest req{{{"user", prompt}}, params};
  ChatResponse resp = backend.chat(req);
  if (usage) *usage += resp.usage;

  std::vector<ExplorationPlan> plans;
  for (int i = 0; i < k; ++i) {
    ExplorationPlan plan = make_plan(resp.completions[i]);
    if (!pure_prompt && plan.steps.empty() && warnings) {
      warnings->push_back("UnparseablePlan: sample " + std::to_string(i + 1) +
                          " kept raw");
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

namespace detail_tts {

inline ExecutionTrace make_trace(const std::string& text) {
  ExecutionTrace trace;
  trace.raw_text = text;
  trace.token_count = count_ws_tokens(text);
  trace.boxed_answer.reset();
  if (auto a = prompts::extract_boxed_answer(text)) trace.boxed_answer = a->canonical;
  return trace;
}

// One plan-conditioned execution; returns false on branch failure.
inline bool execute_plan(const Question& question, const std::string& plan_text,
                         int plan_index, double weight,
                         const StrategyConfig& config, Backend& backend,
                         RunRecord& record) {
  try {
    std::string prompt = prompts::render(
        "execution", {{"question", question.text}, {"content", plan_text}});
    GenerationParams params = config.exec_params;
    params.n = 1;
    params.seed = hash_combine(config.seed, static_cast<std::uint64_t>(plan_index));
    ChatResponse resp = backend.chat({{{"user", prompt}}, params});
    record.tokens.execute += resp.usage;
    record.executed.push_back(
        {plan_index, make_trace(resp.completions[0]), weight});
    return true;
  } catch (const Error& e) {
    record.degraded = true;
    record.warnings.push_back("BranchFailed: plan " + std::to_string(plan_index) +
                              ": " + e.code());
    return false;
  }
}

inline void finalize_vote(const Question& question, RunRecord& record) {
  std::vector<VoteEntry> entries;
  for (std::size_t i = 0; i < record.executed.size(); ++i) {
    const auto& branch = record.executed[i];
    if (!branch.trace.boxed_answer) continue;
    entries.push_back({canonicalize_answer(*branch.trace.boxed_answer),
                       branch.weight, static_cast<int>(i)});
  }
  if (!entries.empty()) record.selected_answer = weighted_vote(entries);
  if (question.reference_answer) {
    Answer ref = canonicalize_answer(*question.reference_answer);
    record.correct = record.selected_answer &&
                     answers_equal(*record.selected_answer, ref);
  }
}

}  // namespace detail_tts

inline RunRecord run_strategy(const Question& question,
                              const StrategyConfig& config, Backend& backend) {
  validate(config);
  RunRecord record;
  record.question_id = question.id;
  record.kind = config.kind;
  record.k_or_n = config.k_or_n;

  const int k = config.k_or_n;

  switch (config.kind) {
    case StrategyKind::GreedyCot:
    case StrategyKind::SelfConsistency: {
      std::string prompt =
          prompts::render("cot", {{"question", question.text}});
      GenerationParams params = config.exec_params;
      params.n = k;
      if (config.kind == StrategyKind::GreedyCot) params.temperature = 0.0;
      params.seed = config.seed;
      ChatResponse resp = backend.chat({{{"user", prompt}}, params});
      record.tokens.execute += resp.usage;
      for (int i = 0; i < k; ++i) {
        record.executed.push_back(
            {i + 1, detail_tts::make_trace(resp.completions[i]), 1.0});
      }
      break;
    }

    case StrategyKind::E2cJudge: {
      GenerationParams pp = config.plan_params;
      pp.seed = config.seed;
      record.plans = sample_plans(question, k, pp, backend, &record.tokens.plan,
                                  &record.warnings);
      std::vector<std::string> plan_texts;
      for (const auto& p : record.plans) plan_texts.push_back(p.raw_text);

      std::string judge_prompt = prompts::render(
          "judge_select", {{"problem", question.text},
                           {"plans", prompts::format_plan_list(plan_texts)}});
      GenerationParams jp;
      jp.temperature = 0.0;  // selection is deterministic given the plans
      jp.n = 1;
      jp.seed = config.seed;
      ChatResponse judge = backend.chat({{{"user", judge_prompt}}, jp});
      record.tokens.select += judge.usage;

      auto selection = prompts::match_judge_selection(
          judge.completions[0], plan_texts, &record.warnings);
      detail_tts::execute_plan(question, plan_texts[selection.index - 1],
                               selection.index, 1.0, config, backend, record);
      break;
    }

    case StrategyKind::E2cCluster: {
      GenerationParams pp = config.plan_params;
      pp.seed = config.seed;
      record.plans = sample_plans(question, k, pp, backend, &record.tokens.plan,
                                  &record.warnings);
      std::vector<std::string> plan_texts;
      for (const auto& p : record.plans) plan_texts.push_back(p.raw_text);

      EmbeddingResponse emb = backend.embed(plan_texts);
      record.tokens.select += emb.usage;
      auto matrix = cluster::normalize_rows(emb.vectors);
      auto clusters = cluster::kmeans(matrix, config.clusters, config.seed);
      for (const auto& w : clusters.warnings) record.warnings.push_back(w);

      for (int c = 0; c < clusters.num_clusters; ++c) {
        int rep = clusters.representatives[c];
        detail_tts::execute_plan(question, plan_texts[rep - 1], rep,
                                 static_cast<double>(clusters.sizes[c]), config,
                                 backend, record);
      }
      break;
    }

    case StrategyKind::E2cSc: {
      GenerationParams pp = config.plan_params;
      pp.seed = config.seed;
      record.plans = sample_plans(question, k, pp, backend, &record.tokens.plan,
                                  &record.warnings);
      for (int i = 0; i < k; ++i) {
        detail_tts::execute_plan(question, record.plans[i].raw_text, i + 1, 1.0,
                                 config, backend, record);
      }
      break;
    }

    case StrategyKind::E2cRp: {
      GenerationParams pp = config.plan_params;
      pp.seed = config.seed;
      record.plans = sample_plans(question, k, pp, backend, &record.tokens.plan,
                                  &record.warnings);
      Rng rng(hash_combine(config.seed, fnv1a64(question.id)));
      int chosen = static_cast<int>(rng.next_below(k)) + 1;
      detail_tts::execute_plan(question, record.plans[chosen - 1].raw_text,
                               chosen, 1.0, config, backend, record);
      break;
    }

    case StrategyKind::E2cPromptFusion: {
      GenerationParams pp = config.plan_params;
      pp.seed = config.seed;
      record.plans = sample_plans(question, k, pp, backend, &record.tokens.plan,
                                  &record.warnings, /*pure_prompt=*/true);
      std::vector<std::string> sketches;
      for (const auto& p : record.plans) sketches.push_back(p.raw_text);
      try {
        std::string prompt = prompts::render(
            "pure_fusion_execution",
            {{"problem", question.text},
             {"explorations", prompts::format_exploration_list(sketches)}});
        GenerationParams params = config.exec_params;
        params.n = 1;
        params.seed = hash_combine(config.seed, 1);
        ChatResponse resp = backend.chat({{{"user", prompt}}, params});
        record.tokens.execute += resp.usage;
        // the fused branch carries weight 1
        record.executed.push_back(
            {1, detail_tts::make_trace(resp.completions[0]), 1.0});
      } catch (const Error& e) {
        record.degraded = true;
        record.warnings.push_back(std::string("BranchFailed: fusion: ") + e.code());
      }
      break;
    }
  }

  if (record.executed.empty())
    fail("StrategyFailed", "no branch survived for question " + question.id);

  detail_tts::finalize_vote(question, record);
  return record;
}

}  // namespace e2c::tts
