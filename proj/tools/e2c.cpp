// Command line front end for the E2C library: single runs, benchmark sweeps,
// SFT data generation, adherence audits, RL objective verification, and
// prompt inspection. All subcommands default to the deterministic mock
// backend; pass --base-url to talk to an OpenAI-compatible server.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "e2c/datagen.hpp"
#include "e2c/gateway.hpp"
#include "e2c/harness.hpp"
#include "e2c/prompts.hpp"
#include "e2c/rlmath.hpp"
#include "e2c/tts.hpp"

namespace {

struct BackendOptions {
  std::string base_url;
  std::string model = "default";
  std::string embed_model = "default-embed";
  std::string script_file;
  std::uint64_t mock_seed = 0;
  int mock_plan_tokens = 40;
  int mock_exec_tokens = 120;
  std::vector<std::string> mock_answers;
};

void add_backend_flags(CLI::App* cmd, BackendOptions& opts) {
  cmd->add_option("--base-url", opts.base_url,
                  "OpenAI-compatible endpoint; omit for the mock backend");
  cmd->add_option("--model", opts.model, "chat model name");
  cmd->add_option("--embed-model", opts.embed_model, "embedding model name");
  cmd->add_option("--script", opts.script_file,
                  "mock script JSONL keyed by request fingerprint");
  cmd->add_option("--mock-seed", opts.mock_seed, "mock synthesizer seed");
  cmd->add_option("--mock-plan-tokens", opts.mock_plan_tokens,
                  "approximate mock plan length");
  cmd->add_option("--mock-exec-tokens", opts.mock_exec_tokens,
                  "approximate mock execution length");
  cmd->add_option("--mock-answer", opts.mock_answers,
                  "override the mock answer pool (repeatable)");
}

std::unique_ptr<e2c::Backend> make_backend(const BackendOptions& opts) {
  if (!opts.base_url.empty()) {
    e2c::HttpConfig config;
    config.base_url = opts.base_url;
    config.model = opts.model;
    config.embed_model = opts.embed_model;
    return std::make_unique<e2c::HttpBackend>(config);
  }
  e2c::MockConfig config;
  config.seed = opts.mock_seed;
  config.plan_tokens = opts.mock_plan_tokens;
  config.exec_tokens = opts.mock_exec_tokens;
  if (!opts.mock_answers.empty()) config.answer_pool = opts.mock_answers;
  auto mock = std::make_unique<e2c::MockBackend>(config);
  if (!opts.script_file.empty()) mock->load_script_file(opts.script_file);
  return mock;
}

std::vector<e2c::tts::StrategyKind> parse_strategies(
    const std::vector<std::string>& names) {
  std::vector<e2c::tts::StrategyKind> kinds;
  for (const auto& n : names) kinds.push_back(e2c::tts::parse_strategy(n));
  return kinds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explore-Execute Chain toolkit"};
  app.require_subcommand(1);

  // ---- run ----------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "run one strategy on one question");
  BackendOptions run_backend;
  std::string run_id = "q1", run_question, run_answer, run_strategy = "e2c_cluster";
  int run_k = 8, run_m = 3;
  std::uint64_t run_seed = 0;
  run_cmd->add_option("--id", run_id, "question id");
  run_cmd->add_option("--question", run_question, "question text")->required();
  run_cmd->add_option("--answer", run_answer, "reference answer (optional)");
  run_cmd->add_option("--strategy", run_strategy, "strategy name");
  run_cmd->add_option("-k,--budget", run_k, "K plans / N chains");
  run_cmd->add_option("-m,--clusters", run_m, "cluster count (e2c_cluster)");
  run_cmd->add_option("--seed", run_seed, "run seed");
  add_backend_flags(run_cmd, run_backend);

  // ---- bench --------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "budget sweep over a dataset");
  BackendOptions bench_backend;
  std::string bench_dataset, bench_out = ".";
  std::vector<int> bench_budgets = {4, 8, 16, 32};
  std::vector<std::string> bench_strategies = {"self_consistency", "e2c_judge",
                                               "e2c_cluster", "e2c_sc"};
  int bench_samples = 8, bench_clusters = 3;
  std::uint64_t bench_seed = 0;
  bench_cmd->add_option("--dataset", bench_dataset, "JSONL dataset")->required();
  bench_cmd->add_option("--out", bench_out, "output directory");
  bench_cmd->add_option("--budgets", bench_budgets, "K/N values")
      ->delimiter(',');
  bench_cmd->add_option("--strategies", bench_strategies, "strategy names")
      ->delimiter(',');
  bench_cmd->add_option("--samples", bench_samples, "runs per question and cell");
  bench_cmd->add_option("--clusters", bench_clusters, "cluster count");
  bench_cmd->add_option("--seed", bench_seed, "sweep seed");
  add_backend_flags(bench_cmd, bench_backend);

  // ---- datagen ------------------------------------------------------------
  auto* datagen_cmd = app.add_subcommand("datagen", "SFT data pipelines");
  datagen_cmd->require_subcommand(1);

  auto* sft_cmd = datagen_cmd->add_subcommand("sft", "causal SFT records");
  BackendOptions sft_backend;
  std::string sft_dataset, sft_out = "sft.jsonl";
  bool sft_flawed = false, sft_resume = false, sft_medical = false;
  std::uint64_t sft_seed = 0;
  sft_cmd->add_option("--dataset", sft_dataset, "JSONL questions")->required();
  sft_cmd->add_option("--out", sft_out, "output JSONL");
  sft_cmd->add_flag("--flawed", sft_flawed,
                    "reverse-causal ablation (summarize after the fact)");
  sft_cmd->add_flag("--resume", sft_resume, "skip ids already in the output");
  sft_cmd->add_flag("--medical", sft_medical, "domain summarize prompt");
  sft_cmd->add_option("--seed", sft_seed, "generation seed");
  add_backend_flags(sft_cmd, sft_backend);

  auto* efsft_cmd = datagen_cmd->add_subcommand("efsft", "EF-SFT mixing");
  BackendOptions efsft_backend;
  std::string efsft_base, efsft_domain, efsft_out = "efsft.jsonl";
  double efsft_alpha = 0.1;
  int efsft_n = 100;
  bool efsft_medical = false;
  std::uint64_t efsft_seed = 0;
  efsft_cmd->add_option("--base", efsft_base, "base SFT JSONL")->required();
  efsft_cmd
      ->add_option("--domain", efsft_domain,
                   "domain JSONL of {id, question, answer}")
      ->required();
  efsft_cmd->add_option("--out", efsft_out, "output JSONL");
  efsft_cmd->add_option("--alpha", efsft_alpha, "base-data share");
  efsft_cmd->add_option("--n-target", efsft_n, "target record count");
  efsft_cmd->add_flag("--medical", efsft_medical, "domain summarize prompt");
  efsft_cmd->add_option("--seed", efsft_seed, "mixing seed");
  add_backend_flags(efsft_cmd, efsft_backend);

  auto* audit_cmd = datagen_cmd->add_subcommand("audit", "adherence audit");
  BackendOptions audit_backend;
  std::string audit_records;
  std::uint64_t audit_seed = 0;
  audit_cmd->add_option("--records", audit_records, "SFT JSONL")->required();
  audit_cmd->add_option("--seed", audit_seed, "judge seed");
  add_backend_flags(audit_cmd, audit_backend);

  // ---- rl-verify ----------------------------------------------------------
  auto* rl_cmd = app.add_subcommand(
      "rl-verify", "verify GRPO objective properties on toy policies");
  std::uint64_t rl_seed = 7;
  int rl_samples = 2000;
  rl_cmd->add_option("--seed", rl_seed, "verification seed");
  rl_cmd->add_option("--samples", rl_samples, "samples per estimator");

  // ---- prompts ------------------------------------------------------------
  auto* prompts_cmd = app.add_subcommand("prompts", "inspect prompt templates");
  prompts_cmd->require_subcommand(1);
  prompts_cmd->add_subcommand("list", "list template names");
  auto* render_cmd = prompts_cmd->add_subcommand("render", "render a template");
  std::string render_name;
  std::vector<std::string> render_bindings;
  render_cmd->add_option("name", render_name, "template name")->required();
  render_cmd->add_option("--set", render_bindings, "key=value binding");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      auto backend = make_backend(run_backend);
      e2c::Question question{run_id, run_question,
                             run_answer.empty()
                                 ? std::nullopt
                                 : std::optional<std::string>(run_answer)};
      e2c::tts::StrategyConfig config;
      config.kind = e2c::tts::parse_strategy(run_strategy);
      config.k_or_n = run_k;
      config.clusters = run_m;
      config.seed = run_seed;
      auto record = e2c::tts::run_strategy(question, config, *backend);
      std::cout << e2c::harness::trace_json(record, 0, run_seed).dump(2) << "\n";
      return 0;
    }

    if (*bench_cmd) {
      auto backend = make_backend(bench_backend);
      auto questions = e2c::harness::load_dataset(bench_dataset);
      e2c::harness::BudgetSweep sweep;
      sweep.budgets = bench_budgets;
      sweep.strategies = parse_strategies(bench_strategies);
      sweep.samples = bench_samples;
      sweep.clusters = bench_clusters;
      std::filesystem::create_directories(bench_out);
      std::ofstream traces(bench_out + "/traces.jsonl");
      if (!traces) e2c::fail("IoError", "cannot write " + bench_out + "/traces.jsonl");
      auto report = e2c::harness::run_benchmark(questions, sweep, *backend,
                                                bench_seed, &traces);
      e2c::harness::emit_report(report, bench_out);
      std::cout << "wrote report.csv, report.txt, plot.json, traces.jsonl to "
                << bench_out << "\n";
      return 0;
    }

    if (*sft_cmd) {
      auto backend = make_backend(sft_backend);
      auto questions = e2c::harness::load_dataset(sft_dataset);
      auto done = sft_resume ? e2c::datagen::completed_ids(sft_out)
                             : std::set<std::string>{};
      int written = 0, skipped = 0, failed = 0;
      for (const auto& q : questions) {
        if (done.count(q.id)) {
          ++skipped;
          continue;
        }
        e2c::datagen::GenOptions opts;
        opts.seed = e2c::hash_combine(sft_seed, e2c::fnv1a64(q.id));
        opts.medical = sft_medical;
        try {
          auto record = sft_flawed
                            ? e2c::datagen::flawed_sft_record(q, *backend, opts)
                            : e2c::datagen::generate_sft_record(q, *backend, opts);
          e2c::datagen::append_sft_jsonl(sft_out, record);
          ++written;
        } catch (const e2c::Error& e) {
          ++failed;
          std::cerr << "skip " << q.id << ": " << e.code() << "\n";
        }
      }
      std::cout << "written=" << written << " skipped=" << skipped
                << " failed=" << failed << "\n";
      return 0;
    }

    if (*efsft_cmd) {
      auto backend = make_backend(efsft_backend);
      auto base = e2c::datagen::load_sft_jsonl(efsft_base);
      std::vector<e2c::datagen::DomainExample> domain;
      {
        std::ifstream in(efsft_domain);
        if (!in) e2c::fail("IoError", "cannot open " + efsft_domain);
        std::string line;
        while (std::getline(in, line)) {
          if (line.empty()) continue;
          auto j = nlohmann::json::parse(line);
          domain.push_back({j.at("id").get<std::string>(),
                            j.at("question").get<std::string>(),
                            j.at("answer").get<std::string>()});
        }
      }
      e2c::datagen::EfSftConfig config{efsft_alpha, efsft_n, efsft_seed};
      std::vector<std::string> warnings;
      auto mixed = e2c::datagen::build_efsft_dataset(base, domain, config,
                                                     *backend, efsft_medical,
                                                     &warnings);
      std::ofstream out(efsft_out);
      for (const auto& r : mixed) out << nlohmann::json(r).dump() << "\n";
      for (const auto& w : warnings) std::cerr << w << "\n";
      std::cout << "wrote " << mixed.size() << " records to " << efsft_out << "\n";
      return 0;
    }

    if (*audit_cmd) {
      auto backend = make_backend(audit_backend);
      auto records = e2c::datagen::load_sft_jsonl(audit_records);
      auto report = e2c::datagen::audit_adherence(records, *backend, audit_seed);
      std::cout << "scored=" << report.scores.size()
                << " unparseable=" << report.unparseable
                << " mean=" << report.mean << "\n";
      for (const auto& [bucket, count] : report.histogram)
        std::cout << "  " << bucket << ": " << count << "\n";
      return 0;
    }

    if (*rl_cmd) {
      using namespace e2c::rlmath;
      auto policy = ToyPolicy::make(4, 5);
      e2c::Rng init(rl_seed);
      for (auto& l : policy.logits) l = init.next_gaussian() * 0.5;

      for (double lambda : {2.0, 3.0}) {
        GrpoConfig cfg;
        cfg.lambda_exp = lambda;
        auto group = make_matched_group(policy, rl_samples, rl_seed);
        auto adv = normalize_advantages(group);
        double ratio = grad_emphasis_ratio(policy, group, adv, cfg);
        std::cout << "emphasis lambda=" << lambda << " ratio=" << ratio
                  << " (expected " << lambda * lambda << ")\n";
      }

      auto bandit = ToyPolicy::make(1, 2);
      bandit.logit(0, 0) = 0.405465;  // p ~ (0.6, 0.4)
      RolloutGroup group;
      for (int i = 0; i < 8; ++i) {
        Rollout r;
        int a = i % 2;
        r.tokens.push_back({0, a, Segment::Execution, bandit.log_prob(0, a)});
        r.reward = a == 0 ? 1.0 : 0.0;
        group.rollouts.push_back(std::move(r));
      }
      GrpoConfig stage2;
      stage2.beta = 0.0;
      for (double step : {0.05, 0.1, 0.5}) {
        auto res = simulate_stage2_step(bandit, group, stage2, step);
        std::cout << "stage2 step=" << step << " margin " << res.before.mean_margin
                  << " -> " << res.after.mean_margin << ", entropy "
                  << res.before.mean_entropy << " -> " << res.after.mean_entropy
                  << "\n";
      }
      return 0;
    }

    if (*prompts_cmd) {
      if (render_cmd->parsed()) {
        e2c::prompts::Bindings bindings;
        for (const auto& kv : render_bindings) {
          auto eq = kv.find('=');
          if (eq == std::string::npos)
            e2c::fail("InvalidParams", "--set expects key=value");
          bindings[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
        if (bindings.empty()) {
          std::cout << e2c::prompts::get_template(render_name).body;
        } else {
          std::cout << e2c::prompts::render(render_name, bindings);
        }
      } else {
        for (const auto& t : e2c::prompts::all_templates())
          std::cout << t.name << "\n";
      }
      return 0;
    }
  } catch (const e2c::Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
