#pragma once

/**
 * Synthetic SFT data pipelines.
 *
 * Causal record generation: solution -> distilled exploration -> execution
 * generated from a prompt that contains the exploration, so the execution
 * genuinely conditions on it. The flawed ablation keeps the original solution
 * as the execution and only summarizes after the fact.
 *
 * EF-SFT construction mixes exploration-only domain records with base
 * records at ratio alpha, subsampled and shuffled deterministically.
 */

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "e2c/core.hpp"
#include "e2c/error.hpp"
#include "e2c/gateway.hpp"
#include "e2c/prompts.hpp"
#include "e2c/rng.hpp"

namespace e2c::datagen {

struct Provenance {
  std::string model = "mock";
  std::string prompt_version = prompts::kPromptVersion;
  std::uint64_t seed = 0;
  std::string solution_source = "model";  // model | ground_truth
};

struct SftRecord {
  std::string question_id;
  std::string question;
  ExplorationPlan exploration;
  ExecutionTrace execution;
  std::string solution;          // stage-1 full solution text
  std::string execution_prompt;  // prompt that produced the execution
  bool causal = true;
  bool exploration_only = false;  // EF-SFT domain records drop the execution
  Provenance provenance;
};

inline void to_json(nlohmann::json& j, const SftRecord& r) {
  j = nlohmann::json{
      {"question_id", r.question_id},
      {"question", r.question},
      {"exploration", r.exploration.raw_text},
      {"execution", r.execution.raw_text},
      {"solution", r.solution},
      {"execution_prompt", r.execution_prompt},
      {"causal", r.causal},
      {"exploration_only", r.exploration_only},
      {"provenance",
       {{"model", r.provenance.model},
        {"prompt_version", r.provenance.prompt_version},
        {"seed", r.provenance.seed},
        {"solution_source", r.provenance.solution_source}}},
  };
}

inline void from_json(const nlohmann::json& j, SftRecord& r) {
  r.question_id = j.at("question_id").get<std::string>();
  r.question = j.at("question").get<std::string>();
  r.exploration = make_plan(j.at("exploration").get<std::string>());
  std::string exec = j.at("execution").get<std::string>();
  r.execution.token_count = count_ws_tokens(exec);
  if (auto a = prompts::extract_boxed_answer(exec))
    r.execution.boxed_answer = a->canonical;
  r.execution.raw_text = std::move(exec);
  r.solution = j.at("solution").get<std::string>();
  r.execution_prompt = j.at("execution_prompt").get<std::string>();
  r.causal = j.at("causal").get<bool>();
  r.exploration_only = j.value("exploration_only", false);
  const auto& p = j.at("provenance");
  r.provenance.model = p.at("model").get<std::string>();
  r.provenance.prompt_version = p.at("prompt_version").get<std::string>();
  r.provenance.seed = p.at("seed").get<std::uint64_t>();
  r.provenance.solution_source = p.at("solution_source").get<std::string>();
}

struct GenOptions {
  std::uint64_t seed = 0;
  GenerationParams params{0.9, 4096, 1, 0};
  // When set, stage 1 is skipped and this text is used as the solution.
  std::optional<std::string> ground_truth_solution;
  bool medical = false;  // use the domain summarize prompt
};

namespace detail_dg {

inline ChatResponse single(Backend& backend, const std::string& prompt,
                           GenerationParams params, std::uint64_t seed) {
  params.n = 1;
  params.seed = seed;
  return backend.chat({{{"user", prompt}}, params});
}

}  // namespace detail_dg

// Causal generation: per-call failures abort the whole record.
inline SftRecord generate_sft_record(const Question& question, Backend& backend,
                                     const GenOptions& opts = {}) {
  if (question.text.empty()) fail("InvalidParams", "question text empty");
  SftRecord record;
  record.question_id = question.id;
  record.question = question.text;
  record.provenance.seed = opts.seed;

  if (opts.ground_truth_solution) {
    record.solution = *opts.ground_truth_solution;
    record.provenance.solution_source = "ground_truth";
  } else {
    std::string prompt = prompts::render("cot", {{"question", question.text}});
    record.solution = detail_dg::single(backend, prompt, opts.params,
                                        hash_combine(opts.seed, 1))
                          .completions[0];
  }

  std::string summarize_prompt = prompts::render(
      opts.medical ? "efsft_summarize_medical" : "exploration_summarize",
      {{"question", question.text}, {"content", record.solution}});
  std::string exploration_text =
      detail_dg::single(backend, summarize_prompt, opts.params,
                        hash_combine(opts.seed, 2))
          .completions[0];
  record.exploration = make_plan(exploration_text);
  if (record.exploration.steps.empty())
    fail("UnparseablePlan", "summarize stage produced no numbered steps for " +
                                question.id);

  record.execution_prompt = prompts::render(
      "execution",
      {{"question", question.text}, {"content", exploration_text}});
  std::string exec = detail_dg::single(backend, record.execution_prompt,
                                       opts.params, hash_combine(opts.seed, 3))
                         .completions[0];
  record.execution.token_count = count_ws_tokens(exec);
  if (auto a = prompts::extract_boxed_answer(exec))
    record.execution.boxed_answer = a->canonical;
  record.execution.raw_text = std::move(exec);
  record.causal = true;
  return record;
}

// Flawed ablation: the execution is the original solution, never conditioned
// on the exploration; the exploration is summarized after the fact.
inline SftRecord flawed_sft_record(const Question& question, Backend& backend,
                                   const GenOptions& opts = {}) {
  if (question.text.empty()) fail("InvalidParams", "question text empty");
  SftRecord record;
  record.question_id = question.id;
  record.question = question.text;
  record.provenance.seed = opts.seed;

  std::string solution_prompt =
      prompts::render("cot", {{"question", question.text}});
  if (opts.ground_truth_solution) {
    record.solution = *opts.ground_truth_solution;
    record.provenance.solution_source = "ground_truth";
  } else {
    record.solution = detail_dg::single(backend, solution_prompt, opts.params,
                                        hash_combine(opts.seed, 1))
                          .completions[0];
  }

  std::string summarize_prompt = prompts::render(
      opts.medical ? "efsft_summarize_medical" : "exploration_summarize",
      {{"question", question.text}, {"content", record.solution}});
  std::string exploration_text =
      detail_dg::single(backend, summarize_prompt, opts.params,
                        hash_combine(opts.seed, 2))
          .completions[0];
  record.exploration = make_plan(exploration_text);
  if (record.exploration.steps.empty())
    fail("UnparseablePlan", "summarize stage produced no numbered steps for " +
                                question.id);

  record.execution_prompt = solution_prompt;  // does not contain the plan
  record.execution.raw_text = record.solution;
  record.execution.token_count = count_ws_tokens(record.solution);
  if (auto a = prompts::extract_boxed_answer(record.solution))
    record.execution.boxed_answer = a->canonical;
  record.causal = false;
  return record;
}

// ---------------------------------------------------------------------------
// EF-SFT mixing
// ---------------------------------------------------------------------------

struct EfSftConfig {
  double alpha = 0.1;  // share drawn from the base dataset
  int n_target = 1;
  std::uint64_t seed = 0;
};

struct DomainExample {
  std::string id;
  std::string question;
  std::string answer;  // full reasoning text
};

// ExtractExploration: the plan span when the answer is already segmented,
// otherwise a backend summarize call.
inline std::string extract_exploration(const DomainExample& example,
                                       Backend& backend, bool medical,
                                       std::uint64_t seed) {
  try {
    SegmentedTrace trace = segment_trace(example.answer);
    return trace.plan.raw_text;
  } catch (const Error&) {
    // unsegmented reasoning text: summarize
  }
  std::string prompt = prompts::render(
      medical ? "efsft_summarize_medical" : "exploration_summarize",
      {{"question", example.question}, {"content", example.answer}});
  GenerationParams params;
  return detail_dg::single(backend, prompt, params, seed).completions[0];
}

// n_base = round-half-up(alpha * n_target), remainder to exploration data;
// shares are clamped to availability with a warning. Fixed seed implies an
// identical selection and order.
inline std::vector<SftRecord> build_efsft_dataset(
    const std::vector<SftRecord>& base, const std::vector<DomainExample>& domain,
    const EfSftConfig& config, Backend& backend, bool medical = false,
    std::vector<std::string>* warnings = nullptr) {
  if (config.alpha < 0.0 || config.alpha > 1.0)
    fail("InvalidParams", "alpha must be in [0, 1]");
  if (config.n_target < 1) fail("InvalidParams", "n_target must be >= 1");

  int n_base = static_cast<int>(config.alpha * config.n_target + 0.5);
  int n_explore = config.n_target - n_base;
  if (n_base > 0 && base.empty()) fail("EmptySource", "base dataset is empty");
  if (n_explore > 0 && domain.empty())
    fail("EmptySource", "domain dataset is empty");

  if (n_base > static_cast<int>(base.size())) {
    if (warnings)
      warnings->push_back("ClampedBase: " + std::to_string(n_base) + " -> " +
                          std::to_string(base.size()));
    n_base = static_cast<int>(base.size());
  }
  if (n_explore > static_cast<int>(domain.size())) {
    if (warnings)
      warnings->push_back("ClampedExplore: " + std::to_string(n_explore) +
                          " -> " + std::to_string(domain.size()));
    n_explore = static_cast<int>(domain.size());
  }

  std::vector<SftRecord> mixed;
  {
    Rng rng(hash_combine(config.seed, fnv1a64("base")));
    for (std::size_t i : rng.sample_indices(base.size(), n_base))
      mixed.push_back(base[i]);
  }
  {
    Rng rng(hash_combine(config.seed, fnv1a64("explore")));
    for (std::size_t i : rng.sample_indices(domain.size(), n_explore)) {
      const auto& ex = domain[i];
      SftRecord r;
      r.question_id = ex.id;
      r.question = ex.question;
      r.exploration = make_plan(extract_exploration(
          ex, backend, medical, hash_combine(config.seed, fnv1a64(ex.id))));
      r.exploration_only = true;
      r.provenance.seed = config.seed;
      mixed.push_back(std::move(r));
    }
  }
  Rng rng(config.seed);
  rng.shuffle(mixed);
  return mixed;
}

// ---------------------------------------------------------------------------
// Adherence auditing
// ---------------------------------------------------------------------------

struct AdherenceReport {
  std::vector<prompts::AdherenceScore> scores;
  double mean = 0.0;
  std::map<double, int> histogram;  // bucket -> count
  int unparseable = 0;
};

// One judge call per pair; unparseable judge outputs are counted and excluded
// from the mean.
inline AdherenceReport audit_adherence(const std::vector<SftRecord>& pairs,
                                       Backend& backend,
                                       std::uint64_t seed = 0) {
  AdherenceReport report;
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& pair = pairs[i];
    std::string prompt = prompts::render(
        "adherence_judge", {{"question", pair.question},
                            {"exploration", pair.exploration.raw_text},
                            {"execution", pair.execution.raw_text}});
    GenerationParams params;
    params.temperature = 0.0;
    try {
      auto resp = detail_dg::single(backend, prompt, params,
                                    hash_combine(seed, i));
      auto score = prompts::parse_adherence(resp.completions[0]);
      report.histogram[score.value]++;
      sum += score.value;
      report.scores.push_back(std::move(score));
    } catch (const Error&) {
      report.unparseable++;
    }
  }
  if (!report.scores.empty()) sum /= static_cast<double>(report.scores.size());
  report.mean = report.scores.empty() ? 0.0 : sum;
  return report;
}

// ---------------------------------------------------------------------------
// JSONL io with resume support
// ---------------------------------------------------------------------------

inline std::vector<SftRecord> load_sft_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("IoError", "cannot open " + path);
  std::vector<SftRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      records.push_back(nlohmann::json::parse(line).get<SftRecord>());
    } catch (const nlohmann::json::exception& e) {
      fail("ParseError", path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

inline void append_sft_jsonl(const std::string& path, const SftRecord& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) fail("IoError", "cannot open " + path + " for append");
  out << nlohmann::json(record).dump() << "\n";
}

// Question ids already present in an output file; lets interrupted runs
// continue where they stopped.
inline std::set<std::string> completed_ids(const std::string& path) {
  std::set<std::string> ids;
  std::ifstream in(path);
  if (!in) return ids;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    try {
      ids.insert(nlohmann::json::parse(line).at("question_id").get<std::string>());
    } catch (const nlohmann::json::exception&) {
      // partial trailing line from an interrupted write: ignore
    }
  }
  return ids;
}

}  // namespace e2c::datagen
