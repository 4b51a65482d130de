#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "e2c/datagen.hpp"

using namespace e2c;
using namespace e2c::datagen;

namespace {

Question make_question(const std::string& id) {
  return {id, "Question " + id + ": compute the value. Provide the final answer "
                  "in the boxed{}.",
          "36"};
}

std::vector<SftRecord> make_base(int n, MockBackend& backend) {
  std::vector<SftRecord> base;
  for (int i = 0; i < n; ++i) {
    GenOptions opts;
    opts.seed = static_cast<std::uint64_t>(i);
    base.push_back(
        generate_sft_record(make_question("base" + std::to_string(i)), backend, opts));
  }
  return base;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
    std::remove(path.c_str());
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("causal record generation") {
  MockBackend backend;
  GenOptions opts;
  opts.seed = 5;
  auto record = generate_sft_record(make_question("q1"), backend, opts);

  CHECK(record.causal);
  CHECK_FALSE(record.solution.empty());
  CHECK(record.exploration.steps.size() >= 3);
  CHECK_FALSE(record.execution.raw_text.empty());
  CHECK(record.execution.boxed_answer.has_value());
  CHECK(record.provenance.solution_source == "model");

  // the causal-flag property: the execution prompt contains the exploration
  CHECK(record.execution_prompt.find(record.exploration.raw_text) !=
        std::string::npos);

  // deterministic regeneration
  MockBackend backend2;
  auto again = generate_sft_record(make_question("q1"), backend2, opts);
  CHECK(again.solution == record.solution);
  CHECK(again.exploration.raw_text == record.exploration.raw_text);
  CHECK(again.execution.raw_text == record.execution.raw_text);
}

TEST_CASE("ground truth solutions skip stage one") {
  MockBackend backend;
  GenOptions opts;
  opts.ground_truth_solution =
      "1. Identify the given quantities and constraints. First note the values.\n"
      "2. Calculate the final quantity. Multiply them.\n";
  auto record = generate_sft_record(make_question("q2"), backend, opts);
  CHECK(record.solution == *opts.ground_truth_solution);
  CHECK(record.provenance.solution_source == "ground_truth");
  CHECK(record.causal);
}

TEST_CASE("flawed records summarize after the fact") {
  MockBackend backend;
  GenOptions opts;
  opts.seed = 5;
  auto record = flawed_sft_record(make_question("q3"), backend, opts);

  CHECK_FALSE(record.causal);
  CHECK(record.execution.raw_text == record.solution);
  // reverse-causal: the execution prompt never saw the exploration
  CHECK(record.execution_prompt.find(record.exploration.raw_text) ==
        std::string::npos);
  CHECK(record.exploration.steps.size() >= 3);
}

TEST_CASE("sft jsonl round trip is lossless") {
  MockBackend backend;
  auto records = make_base(3, backend);
  records[1] = flawed_sft_record(make_question("f1"), backend, {});

  TempFile file("e2c_test_sft_roundtrip.jsonl");
  for (const auto& r : records) append_sft_jsonl(file.path, r);
  auto loaded = load_sft_jsonl(file.path);

  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].question_id == records[i].question_id);
    CHECK(loaded[i].question == records[i].question);
    CHECK(loaded[i].exploration.raw_text == records[i].exploration.raw_text);
    CHECK(loaded[i].exploration.steps.size() == records[i].exploration.steps.size());
    CHECK(loaded[i].execution.raw_text == records[i].execution.raw_text);
    CHECK(loaded[i].execution.boxed_answer == records[i].execution.boxed_answer);
    CHECK(loaded[i].solution == records[i].solution);
    CHECK(loaded[i].execution_prompt == records[i].execution_prompt);
    CHECK(loaded[i].causal == records[i].causal);
    CHECK(loaded[i].provenance.seed == records[i].provenance.seed);
  }
}

TEST_CASE("resume support tracks completed question ids") {
  MockBackend backend;
  TempFile file("e2c_test_sft_resume.jsonl");
  CHECK(completed_ids(file.path).empty());  // missing file is fine

  append_sft_jsonl(file.path, generate_sft_record(make_question("a"), backend, {}));
  append_sft_jsonl(file.path, generate_sft_record(make_question("b"), backend, {}));
  // simulate an interrupted trailing write
  {
    std::ofstream out(file.path, std::ios::app);
    out << "{\"question_id\": \"c\", \"trunc";
  }
  auto ids = completed_ids(file.path);
  CHECK(ids == std::set<std::string>{"a", "b"});
}

TEST_CASE("efsft sizes follow round half up") {
  MockBackend backend;
  auto base = make_base(6, backend);
  std::vector<DomainExample> domain;
  for (int i = 0; i < 10; ++i) {
    domain.push_back({"d" + std::to_string(i),
                      "Domain question " + std::to_string(i),
                      "Reasoning text.\nExecution: done \\boxed{36}\n"});
  }

  struct Case {
    double alpha;
    int n_target;
    int expect_base;
  };
  const Case cases[] = {
      {0.0, 10, 0}, {0.1, 10, 1}, {0.5, 10, 5}, {1.0, 5, 5},
      {0.25, 10, 3},  // 2.5 rounds half up
      {0.15, 10, 2},  // 1.5 rounds half up
  };
  for (const auto& c : cases) {
    CAPTURE(c.alpha);
    CAPTURE(c.n_target);
    EfSftConfig config{c.alpha, c.n_target, 7};
    auto mixed = build_efsft_dataset(base, domain, config, backend);
    int n_base = 0, n_explore = 0;
    for (const auto& r : mixed) {
      if (r.exploration_only) {
        ++n_explore;
        CHECK(r.execution.raw_text.empty());
      } else {
        ++n_base;
      }
    }
    CHECK(n_base == c.expect_base);
    CHECK(n_explore == c.n_target - c.expect_base);
  }
}

TEST_CASE("efsft clamps to availability with warnings") {
  MockBackend backend;
  auto base = make_base(2, backend);
  std::vector<DomainExample> domain = {
      {"d0", "Domain question", "Reasoning.\nExecution: \\boxed{1}\n"}};
  std::vector<std::string> warnings;
  EfSftConfig config{0.5, 10, 1};
  auto mixed = build_efsft_dataset(base, domain, config, backend, false, &warnings);
  CHECK(mixed.size() == 3);  // 2 base + 1 domain available
  CHECK(warnings.size() == 2);
}

TEST_CASE("efsft validation and determinism") {
  MockBackend backend;
  auto base = make_base(4, backend);
  std::vector<DomainExample> domain = {
      {"d0", "Q", "Thoughts first.\nExecution: work \\boxed{2}\n"},
      {"d1", "Q", "More thoughts.\nExecution: work \\boxed{3}\n"}};

  CHECK_THROWS_AS(build_efsft_dataset(base, domain, {1.5, 10, 0}, backend), Error);
  CHECK_THROWS_AS(build_efsft_dataset(base, domain, {0.5, 0, 0}, backend), Error);
  try {
    build_efsft_dataset({}, domain, {1.0, 4, 0}, backend);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == "EmptySource");
  }

  EfSftConfig config{0.5, 4, 13};
  auto m1 = build_efsft_dataset(base, domain, config, backend);
  auto m2 = build_efsft_dataset(base, domain, config, backend);
  REQUIRE(m1.size() == m2.size());
  for (std::size_t i = 0; i < m1.size(); ++i)
    CHECK(m1[i].question_id == m2[i].question_id);
}

TEST_CASE("exploration extraction prefers the segmented plan span") {
  MockBackend backend;
  DomainExample segmented{
      "s", "Q", "1. Think about it.\n2. Decide.\nExecution: done \\boxed{1}\n"};
  CHECK(extract_exploration(segmented, backend, false, 0) ==
        "1. Think about it.\n2. Decide.\n");

  DomainExample prose{"p", "Q", "Unsegmented stream of reasoning with answer 4."};
  auto extracted = extract_exploration(prose, backend, false, 0);
  CHECK_FALSE(make_plan(extracted).steps.empty());  // summarize produced a plan
}

TEST_CASE("adherence audit arithmetic on scripted judges") {
  MockBackend backend;
  auto records = make_base(4, backend);

  // script the four judge calls: 1.0, 0.5, 0.0, and an unparseable reply
  const char* outputs[] = {"[RATIONALE]: exact\n[SCORE]: 1.0",
                           "[RATIONALE]: partial\n[SCORE]: 0.5",
                           "[RATIONALE]: off-plan\n[SCORE]: 0.0",
                           "I refuse to answer in the required format."};
  for (std::size_t i = 0; i < records.size(); ++i) {
    ChatRequest req;
    req.messages.push_back(
        {"user", prompts::render("adherence_judge",
                                 {{"question", records[i].question},
                                  {"exploration", records[i].exploration.raw_text},
                                  {"execution", records[i].execution.raw_text}})});
    req.params.temperature = 0.0;
    req.params.n = 1;
    req.params.seed = hash_combine(0, i);
    backend.script(req, {outputs[i]});
  }

  auto report = audit_adherence(records, backend, 0);
  CHECK(report.scores.size() == 3);
  CHECK(report.unparseable == 1);
  CHECK(report.mean == doctest::Approx(0.5));  // (1.0 + 0.5 + 0.0) / 3
  CHECK(report.histogram.at(1.0) == 1);
  CHECK(report.histogram.at(0.5) == 1);
  CHECK(report.histogram.at(0.0) == 1);
}

TEST_CASE("mock judge scores causal records above flawed ones") {
  MockBackend backend;
  std::vector<SftRecord> causal, flawed;
  for (int i = 0; i < 5; ++i) {
    GenOptions opts;
    opts.seed = static_cast<std::uint64_t>(i);
    causal.push_back(
        generate_sft_record(make_question("c" + std::to_string(i)), backend, opts));
    flawed.push_back(
        flawed_sft_record(make_question("w" + std::to_string(i)), backend, opts));
  }
  auto causal_report = audit_adherence(causal, backend, 1);
  auto flawed_report = audit_adherence(flawed, backend, 1);
  CHECK(causal_report.mean == doctest::Approx(1.0));
  CHECK(flawed_report.mean < causal_report.mean);
}
