#pragma once

/**
 * Benchmark harness: dataset loading, budget sweeps over strategies, and
 * report emission (CSV, plain text, plot data, per-run traces).
 *
 * Serialized outputs never include wall-clock time, so a rerun with the same
 * seed produces byte-identical files.
 */

#include <chrono>
#include <cstdint>
#include <cstdio>
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
#include "e2c/rng.hpp"
#include "e2c/tts.hpp"

namespace e2c::harness {

// ---------------------------------------------------------------------------
// Datasets: JSONL with {"id": ..., "question": ..., "answer": ...}
// ---------------------------------------------------------------------------

inline std::vector<Question> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("IoError", "cannot open dataset " + path);
  std::vector<Question> questions;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail("ParseError", path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("id") || !j.contains("question"))
      fail("ParseError",
           path + ":" + std::to_string(line_no) + ": missing id or question");
    Question q;
    q.id = j.at("id").is_string() ? j.at("id").get<std::string>()
                                  : j.at("id").dump();
    q.text = j.at("question").get<std::string>();
    if (j.contains("answer") && !j.at("answer").is_null()) {
      q.reference_answer = j.at("answer").is_string()
                               ? j.at("answer").get<std::string>()
                               : j.at("answer").dump();
    }
    if (!seen.insert(q.id).second)
      fail("DuplicateId",
           path + ":" + std::to_string(line_no) + ": duplicate id " + q.id);
    questions.push_back(std::move(q));
  }
  if (questions.empty()) fail("ParseError", path + ": no records");
  return questions;
}

// ---------------------------------------------------------------------------
// Sweep configuration and report structures
// ---------------------------------------------------------------------------

struct BudgetSweep {
  std::vector<int> budgets{4, 8, 16, 32};  // K or N per strategy
  std::vector<tts::StrategyKind> strategies{
      tts::StrategyKind::SelfConsistency, tts::StrategyKind::E2cJudge,
      tts::StrategyKind::E2cCluster, tts::StrategyKind::E2cSc};
  int samples = 8;  // Pass@1 averaging runs per (question, cell)
  int clusters = 3;
  GenerationParams plan_params{0.9, 1024, 1, 0};
  GenerationParams exec_params{0.9, 4096, 1, 0};
};

struct ReportCell {
  std::string strategy;
  int budget = 0;
  int records = 0;   // successful runs
  int failures = 0;  // runs that threw
  int degraded_runs = 0;
  double accuracy = 0.0;               // mean Pass@1 over successful runs
  double mean_completion_tokens = 0.0; // headline cost figure
  double mean_total_tokens = 0.0;
  bool degraded = false;  // >10% of runs failed
};

struct Report {
  std::vector<ReportCell> cells;
  std::uint64_t seed = 0;
  int samples = 0;
  int questions = 0;
  double wall_time_ms = 0.0;  // report.txt only, never in csv/json
};

// ---------------------------------------------------------------------------
// Trace serialization (wall time deliberately excluded)
// ---------------------------------------------------------------------------

inline nlohmann::json trace_json(const tts::RunRecord& r, int sample,
                                 std::uint64_t run_seed) {
  nlohmann::json plans = nlohmann::json::array();
  for (const auto& p : r.plans) plans.push_back(p.raw_text);
  nlohmann::json executed = nlohmann::json::array();
  for (const auto& b : r.executed) {
    executed.push_back({{"plan_index", b.plan_index},
                        {"weight", b.weight},
                        {"answer", b.trace.boxed_answer
                                       ? nlohmann::json(*b.trace.boxed_answer)
                                       : nlohmann::json()},
                        {"tokens", b.trace.token_count}});
  }
  auto usage = [](const TokenUsage& u) {
    return nlohmann::json{{"prompt", u.prompt_tokens},
                          {"completion", u.completion_tokens}};
  };
  return nlohmann::json{
      {"question_id", r.question_id},
      {"strategy", tts::strategy_name(r.kind)},
      {"k_or_n", r.k_or_n},
      {"sample", sample},
      {"seed", run_seed},
      {"plans", plans},
      {"executed", executed},
      {"selected_answer", r.selected_answer
                              ? nlohmann::json(r.selected_answer->canonical)
                              : nlohmann::json()},
      {"correct", r.correct ? nlohmann::json(*r.correct) : nlohmann::json()},
      {"tokens",
       {{"plan", usage(r.tokens.plan)},
        {"select", usage(r.tokens.select)},
        {"execute", usage(r.tokens.execute)},
        {"completion_total", r.tokens.completion_total()}}},
      {"degraded", r.degraded},
      {"warnings", r.warnings},
  };
}

// ---------------------------------------------------------------------------
// Benchmark loop
// ---------------------------------------------------------------------------

inline std::uint64_t run_seed_for(std::uint64_t seed, const std::string& qid,
                                  int sample) {
  return hash_combine(hash_combine(seed, fnv1a64(qid)),
                      static_cast<std::uint64_t>(sample));
}

// Iterates strategy x budget x question x sample in a fixed order. Per-run
// failures are counted; a cell with more than 10% failed runs is flagged
// degraded. Traces are streamed to the sink in loop order when provided.
inline Report run_benchmark(const std::vector<Question>& questions,
                            const BudgetSweep& sweep, Backend& backend,
                            std::uint64_t seed,
                            std::ostream* trace_sink = nullptr) {
  if (questions.empty()) fail("InvalidParams", "empty question set");
  if (sweep.samples < 1) fail("InvalidParams", "samples must be >= 1");
  auto start = std::chrono::steady_clock::now();

  Report report;
  report.seed = seed;
  report.samples = sweep.samples;
  report.questions = static_cast<int>(questions.size());

  for (tts::StrategyKind kind : sweep.strategies) {
    for (int budget : sweep.budgets) {
      ReportCell cell;
      cell.strategy = tts::strategy_name(kind);
      cell.budget = kind == tts::StrategyKind::GreedyCot ? 1 : budget;

      double correct_sum = 0.0;
      double completion_sum = 0.0;
      double total_sum = 0.0;
      for (const auto& question : questions) {
        for (int s = 0; s < sweep.samples; ++s) {
          tts::StrategyConfig config;
          config.kind = kind;
          config.k_or_n = cell.budget;
          config.clusters = std::min(sweep.clusters, cell.budget);
          config.plan_params = sweep.plan_params;
          config.exec_params = sweep.exec_params;
          config.seed = run_seed_for(seed, question.id, s);
          try {
            tts::RunRecord record = tts::run_strategy(question, config, backend);
            cell.records++;
            if (record.degraded) cell.degraded_runs++;
            if (record.correct.value_or(false)) correct_sum += 1.0;
            completion_sum +=
                static_cast<double>(record.tokens.completion_total());
            TokenUsage total = record.tokens.total();
            total_sum +=
                static_cast<double>(total.prompt_tokens + total.completion_tokens);
            if (trace_sink)
              *trace_sink << trace_json(record, s, config.seed).dump() << "\n";
          } catch (const Error&) {
            cell.failures++;
          }
        }
      }
      if (cell.records > 0) {
        cell.accuracy = correct_sum / cell.records;
        cell.mean_completion_tokens = completion_sum / cell.records;
        cell.mean_total_tokens = total_sum / cell.records;
      }
      int attempted = cell.records + cell.failures;
      cell.degraded = attempted > 0 && cell.failures * 10 > attempted;
      report.cells.push_back(std::move(cell));

      // greedy_cot ignores the budget axis; one cell is enough
      if (kind == tts::StrategyKind::GreedyCot) break;
    }
  }

  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                start)
          .count();
  return report;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

namespace detail_h {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail_h

inline void emit_report(const Report& report, const std::string& dir) {
  {
    std::ofstream csv(dir + "/report.csv");
    if (!csv) fail("IoError", "cannot write " + dir + "/report.csv");
    csv << "strategy,budget,records,failures,degraded,accuracy,"
           "mean_completion_tokens,mean_total_tokens\n";
    for (const auto& c : report.cells) {
      csv << c.strategy << ',' << c.budget << ',' << c.records << ','
          << c.failures << ',' << (c.degraded ? 1 : 0) << ','
          << detail_h::fmt(c.accuracy) << ','
          << detail_h::fmt(c.mean_completion_tokens) << ','
          << detail_h::fmt(c.mean_total_tokens) << '\n';
    }
  }
  {
    std::ofstream txt(dir + "/report.txt");
    if (!txt) fail("IoError", "cannot write " + dir + "/report.txt");
    txt << "benchmark seed=" << report.seed << " questions=" << report.questions
        << " samples=" << report.samples << "\n";
    txt << "wall_time_ms=" << detail_h::fmt(report.wall_time_ms) << "\n\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%-18s %6s %8s %10s %16s\n", "strategy",
                  "budget", "records", "accuracy", "compl_tokens");
    txt << line;
    for (const auto& c : report.cells) {
      std::snprintf(line, sizeof(line), "%-18s %6d %8d %10.4f %16.1f%s\n",
                    c.strategy.c_str(), c.budget, c.records, c.accuracy,
                    c.mean_completion_tokens, c.degraded ? "  [degraded]" : "");
      txt << line;
    }
  }
  {
    // accuracy-vs-completion-tokens curves, one series per strategy
    nlohmann::json series = nlohmann::json::object();
    for (const auto& c : report.cells) {
      series[c.strategy].push_back({{"budget", c.budget},
                                    {"accuracy", c.accuracy},
                                    {"completion_tokens",
                                     c.mean_completion_tokens}});
    }
    nlohmann::json plot{{"seed", report.seed}, {"series", series}};
    std::ofstream out(dir + "/plot.json");
    if (!out) fail("IoError", "cannot write " + dir + "/plot.json");
    out << plot.dump(2) << "\n";
  }
}

}  // namespace e2c::harness
