#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "e2c/gateway.hpp"
#include "e2c/tts.hpp"

using namespace e2c;
using namespace e2c::tts;

namespace {

VoteEntry entry(const char* answer, double weight, int index) {
  return {canonicalize_answer(answer), weight, index};
}

// Reference vote: accumulate weights per canonical equivalence class, pick the
// maximum, break ties by the earliest contributing execution.
Answer oracle_vote(const std::vector<VoteEntry>& entries) {
  std::vector<std::pair<Answer, std::pair<double, int>>> buckets;
  for (const auto& e : entries) {
    bool found = false;
    for (auto& b : buckets) {
      if (answers_equal(b.first, e.answer)) {
        b.second.first += e.weight;
        found = true;
        break;
      }
    }
    if (!found) buckets.push_back({e.answer, {e.weight, e.execution_index}});
  }
  auto best = buckets[0];
  for (const auto& b : buckets) {
    if (b.second.first > best.second.first + 1e-12 ||
        (std::abs(b.second.first - best.second.first) <= 1e-12 &&
         b.second.second < best.second.second)) {
      best = b;
    }
  }
  return best.first;
}

}  // namespace

TEST_CASE("weighted vote reproduces the tournament clustering example") {
  // cluster sizes [2, 1, 1] with answers [36, 36, 45]
  std::vector<VoteEntry> entries = {entry("36", 2.0, 0), entry("36", 1.0, 1),
                                    entry("45", 1.0, 2)};
  auto tally = tally_votes(entries);
  REQUIRE(tally.buckets.size() == 2);
  CHECK(tally.buckets[0].weight == doctest::Approx(3.0));
  CHECK(tally.buckets[1].weight == doctest::Approx(1.0));
  CHECK(tally.total_weight == doctest::Approx(4.0));
  CHECK(weighted_vote(entries).canonical == "36");
}

TEST_CASE("vote edge cases") {
  // equivalent numeric forms merge into one bucket
  std::vector<VoteEntry> forms = {entry("1/2", 1.0, 0), entry("0.5", 1.0, 1),
                                  entry("2", 1.5, 2)};
  auto tally = tally_votes(forms);
  REQUIRE(tally.buckets.size() == 2);
  CHECK(weighted_vote(forms).canonical == "1/2");  // 2.0 beats 1.5

  // exact tie: earliest execution wins
  std::vector<VoteEntry> tie = {entry("45", 1.0, 0), entry("36", 1.0, 1)};
  CHECK(weighted_vote(tie).canonical == "45");

  CHECK_THROWS_AS(weighted_vote({}), Error);
  CHECK_THROWS_AS(tally_votes({entry("36", 0.0, 0)}), Error);
  CHECK_THROWS_AS(tally_votes({entry("36", -1.0, 0)}), Error);
}

TEST_CASE("randomized tallies match the brute-force oracle") {
  const char* pool[] = {"36", "036", "45", "1/2", "0.5", "27", "x+1"};
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 1 + static_cast<int>(rng.next_below(10));
    std::vector<VoteEntry> entries;
    for (int i = 0; i < n; ++i) {
      entries.push_back(entry(pool[rng.next_below(7)],
                              1.0 + static_cast<double>(rng.next_below(4)), i));
    }
    auto got = weighted_vote(entries);
    auto want = oracle_vote(entries);
    CHECK(answers_equal(got, want));
  }
}

TEST_CASE("strategy config validation") {
  StrategyConfig c;
  c.kind = StrategyKind::GreedyCot;
  c.k_or_n = 2;
  CHECK_THROWS_AS(validate(c), Error);
  c.k_or_n = 1;
  CHECK_NOTHROW(validate(c));

  c.kind = StrategyKind::E2cCluster;
  c.k_or_n = 2;
  c.clusters = 3;
  CHECK_THROWS_AS(validate(c), Error);

  c.k_or_n = 0;
  CHECK_THROWS_AS(validate(c), Error);

  CHECK(parse_strategy("e2c_judge") == StrategyKind::E2cJudge);
  CHECK_THROWS_AS(parse_strategy("tree_of_thought"), Error);
}

TEST_CASE("all seven strategies run end to end on the mock backend") {
  Question q{"q1", "What is 6 times 6? Provide the final answer in the boxed{}.",
             "36"};
  MockConfig cfg;
  cfg.answer_pool = {"36"};  // all branches agree
  MockBackend backend(cfg);

  for (StrategyKind kind :
       {StrategyKind::GreedyCot, StrategyKind::SelfConsistency,
        StrategyKind::E2cJudge, StrategyKind::E2cCluster, StrategyKind::E2cSc,
        StrategyKind::E2cRp, StrategyKind::E2cPromptFusion}) {
    CAPTURE(strategy_name(kind));
    StrategyConfig config;
    config.kind = kind;
    config.k_or_n = kind == StrategyKind::GreedyCot ? 1 : 6;
    config.clusters = 3;
    config.seed = 9;
    auto record = run_strategy(q, config, backend);

    CHECK_FALSE(record.degraded);
    REQUIRE(record.selected_answer.has_value());
    CHECK(record.selected_answer->canonical == "36");
    REQUIRE(record.correct.has_value());
    CHECK(*record.correct);
    CHECK(record.tokens.execute.completion_tokens > 0);
    CHECK_FALSE(record.executed.empty());
  }
}

TEST_CASE("per strategy shape expectations") {
  Question q{"q2", "Compute the total. Provide the final answer in the boxed{}.",
             std::nullopt};
  MockBackend backend;

  StrategyConfig config;
  config.k_or_n = 8;
  config.clusters = 3;
  config.seed = 5;

  config.kind = StrategyKind::SelfConsistency;
  auto sc = run_strategy(q, config, backend);
  CHECK(sc.executed.size() == 8);
  CHECK(sc.plans.empty());
  CHECK(sc.tokens.plan.completion_tokens == 0);
  CHECK_FALSE(sc.correct.has_value());  // no reference answer

  config.kind = StrategyKind::E2cJudge;
  auto judge = run_strategy(q, config, backend);
  CHECK(judge.plans.size() == 8);
  CHECK(judge.executed.size() == 1);
  CHECK(judge.tokens.plan.completion_tokens > 0);
  CHECK(judge.tokens.select.completion_tokens > 0);

  config.kind = StrategyKind::E2cCluster;
  auto clustered = run_strategy(q, config, backend);
  CHECK(clustered.plans.size() == 8);
  CHECK(clustered.executed.size() <= 3);
  double weight_sum = 0.0;
  for (const auto& b : clustered.executed) weight_sum += b.weight;
  CHECK(weight_sum == doctest::Approx(8.0));  // cluster sizes cover all plans
  CHECK(clustered.tokens.select.prompt_tokens > 0);  // embedding usage

  config.kind = StrategyKind::E2cSc;
  auto esc = run_strategy(q, config, backend);
  CHECK(esc.executed.size() == 8);

  config.kind = StrategyKind::E2cRp;
  auto rp = run_strategy(q, config, backend);
  CHECK(rp.plans.size() == 8);
  CHECK(rp.executed.size() == 1);

  config.kind = StrategyKind::E2cPromptFusion;
  auto fusion = run_strategy(q, config, backend);
  CHECK(fusion.plans.size() == 8);
  CHECK(fusion.executed.size() == 1);
}

TEST_CASE("runs are deterministic for a fixed seed") {
  Question q{"q3", "Find the value. Provide the final answer in the boxed{}.",
             "36"};
  StrategyConfig config;
  config.kind = StrategyKind::E2cCluster;
  config.k_or_n = 8;
  config.clusters = 3;
  config.seed = 77;

  MockBackend b1, b2;
  auto r1 = run_strategy(q, config, b1);
  auto r2 = run_strategy(q, config, b2);
  REQUIRE(r1.plans.size() == r2.plans.size());
  for (std::size_t i = 0; i < r1.plans.size(); ++i)
    CHECK(r1.plans[i].raw_text == r2.plans[i].raw_text);
  REQUIRE(r1.executed.size() == r2.executed.size());
  for (std::size_t i = 0; i < r1.executed.size(); ++i) {
    CHECK(r1.executed[i].plan_index == r2.executed[i].plan_index);
    CHECK(r1.executed[i].weight == r2.executed[i].weight);
    CHECK(r1.executed[i].trace.raw_text == r2.executed[i].trace.raw_text);
  }
  CHECK(r1.selected_answer->canonical == r2.selected_answer->canonical);
  CHECK(r1.tokens.total() == r2.tokens.total());

  // a different seed changes the sampled plans
  config.seed = 78;
  MockBackend b3;
  auto r3 = run_strategy(q, config, b3);
  bool any_diff = false;
  for (std::size_t i = 0; i < std::min(r1.plans.size(), r3.plans.size()); ++i)
    any_diff |= r1.plans[i].raw_text != r3.plans[i].raw_text;
  CHECK(any_diff);
}

TEST_CASE("token accounting sums the phases") {
  Question q{"q4", "Count things. Provide the final answer in the boxed{}.", "36"};
  MockBackend backend;
  StrategyConfig config;
  config.kind = StrategyKind::E2cJudge;
  config.k_or_n = 4;
  config.seed = 3;
  auto record = run_strategy(q, config, backend);

  auto total = record.tokens.total();
  CHECK(total.prompt_tokens == record.tokens.plan.prompt_tokens +
                                   record.tokens.select.prompt_tokens +
                                   record.tokens.execute.prompt_tokens);
  CHECK(total.completion_tokens == record.tokens.plan.completion_tokens +
                                       record.tokens.select.completion_tokens +
                                       record.tokens.execute.completion_tokens);
  CHECK(record.tokens.completion_total() == total.completion_tokens);
}

namespace {

// Fails the nth chat call (1-based) with an outage; everything else is
// delegated to the wrapped mock.
class FlakyBackend : public Backend {
 public:
  FlakyBackend(MockBackend& inner, int fail_at) : inner_(inner), fail_at_(fail_at) {}
  ChatResponse chat(const ChatRequest& request) override {
    ++calls_;
    if (calls_ == fail_at_ || fail_at_ == 0)
      fail("BackendUnavailable", "scripted outage");
    return inner_.chat(request);
  }
  EmbeddingResponse embed(const std::vector<std::string>& texts) override {
    return inner_.embed(texts);
  }

 private:
  MockBackend& inner_;
  int fail_at_;
  int calls_ = 0;
};

}  // namespace

TEST_CASE("partial branch failure keeps the record degraded but voted") {
  Question q{"q6", "Partial failure. Provide the final answer in the boxed{}.", "36"};
  MockConfig cfg;
  cfg.answer_pool = {"36"};
  MockBackend mock(cfg);
  FlakyBackend flaky(mock, 3);  // plan call, execution 1 ok, execution 2 fails

  StrategyConfig config;
  config.kind = StrategyKind::E2cSc;
  config.k_or_n = 3;
  config.seed = 8;
  auto record = run_strategy(q, config, flaky);
  CHECK(record.degraded);
  CHECK(record.executed.size() == 2);
  REQUIRE(record.selected_answer.has_value());
  CHECK(record.selected_answer->canonical == "36");
  bool has_warning = false;
  for (const auto& w : record.warnings)
    has_warning |= w.find("BranchFailed") != std::string::npos;
  CHECK(has_warning);
}

TEST_CASE("plan-phase failure and total branch loss abort the run") {
  Question q{"q7", "Total failure. Provide the final answer in the boxed{}.", "36"};
  MockBackend mock;
  StrategyConfig config;
  config.kind = StrategyKind::E2cSc;
  config.k_or_n = 2;
  config.seed = 8;

  // plan sampling failure propagates directly
  FlakyBackend dead(mock, 1);
  try {
    run_strategy(q, config, dead);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == "BackendUnavailable");
  }

  // every execution branch fails: StrategyFailed
  class ExecFails : public Backend {
   public:
    explicit ExecFails(MockBackend& inner) : inner_(inner) {}
    ChatResponse chat(const ChatRequest& request) override {
      if (++calls_ > 1) fail("BackendUnavailable", "executions down");
      return inner_.chat(request);
    }
    EmbeddingResponse embed(const std::vector<std::string>& texts) override {
      return inner_.embed(texts);
    }

   private:
    MockBackend& inner_;
    int calls_ = 0;
  } exec_fails(mock);
  try {
    run_strategy(q, config, exec_fails);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == "StrategyFailed");
  }
}
