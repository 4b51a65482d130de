#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "e2c/core.hpp"
#include "e2c/rng.hpp"

using namespace e2c;

TEST_CASE("answer canonicalization") {
  CHECK(canonicalize_answer("  36 ").canonical == "36");
  CHECK(canonicalize_answer("$36$").canonical == "36");
  CHECK(canonicalize_answer("$$36$$").canonical == "36");
  CHECK(canonicalize_answer("036").canonical == "36");
  CHECK(canonicalize_answer("-07").canonical == "-7");
  CHECK(canonicalize_answer("A").canonical == "a");
  CHECK(canonicalize_answer("B.").canonical == "B.");  // not a bare letter
  CHECK(canonicalize_answer("x\\, + \\;y").canonical == "x + y");
  CHECK(canonicalize_answer("a\\quad b").canonical == "a b");
  CHECK(canonicalize_answer("a\\qquad b").canonical == "a b");
  CHECK(canonicalize_answer("1   +\t2").canonical == "1 + 2");

  CHECK_THROWS_AS(canonicalize_answer("   "), Error);
  CHECK_THROWS_AS(canonicalize_answer("$$"), Error);
  try {
    canonicalize_answer(" \t\n");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == "EmptyAnswer");
  }
}

TEST_CASE("rational parsing and numeric equality") {
  auto a = canonicalize_answer("1/2");
  auto b = canonicalize_answer("2/4");
  auto c = canonicalize_answer("0.5");
  auto d = canonicalize_answer("\\frac{3}{6}");
  REQUIRE(a.numeric_value.has_value());
  CHECK(answers_equal(a, b));
  CHECK(answers_equal(a, c));
  CHECK(answers_equal(a, d));
  CHECK(answers_equal(canonicalize_answer("36"), canonicalize_answer("36.0")));
  CHECK(answers_equal(canonicalize_answer("-3/4"), canonicalize_answer("3/-4")));
  CHECK_FALSE(answers_equal(canonicalize_answer("36"), canonicalize_answer("45")));

  // non-numeric answers compare as strings
  auto x = canonicalize_answer("x+1");
  auto y = canonicalize_answer("x+1");
  CHECK_FALSE(x.numeric_value.has_value());
  CHECK(answers_equal(x, y));
  CHECK_FALSE(answers_equal(x, canonicalize_answer("x+2")));
}

TEST_CASE("rational reduction invariants") {
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    long long n = static_cast<long long>(rng.next_below(2001)) - 1000;
    long long d = static_cast<long long>(rng.next_below(1000)) + 1;
    if (rng.next_below(2)) d = -d;
    auto r = Rational::make(n, d);
    CHECK(r.den > 0);
    long long g = std::gcd(r.num < 0 ? -r.num : r.num, r.den);
    CHECK(g <= 1);
    // cross-multiplication equivalence with the input
    CHECK(r.num * d == n * r.den);
  }
}

TEST_CASE("whitespace token counting") {
  CHECK(count_ws_tokens("") == 0);
  CHECK(count_ws_tokens("   \n\t ") == 0);
  CHECK(count_ws_tokens("one") == 1);
  CHECK(count_ws_tokens("one two\nthree\t four") == 4);
}

TEST_CASE("step title normalization") {
  CHECK(normalize_step_title("**Define variables:** let x be ...") ==
        "define variables");
  CHECK(normalize_step_title("Define variables for the unknowns.") ==
        "define variables for the unknowns");
  // interior punctuation is stripped to spaces
  CHECK(normalize_step_title("Compute 3.5 quickly") == "compute 3 5 quickly");
  CHECK(normalize_step_title("Solve, then verify!") == "solve then verify");
  CHECK(normalize_step_title("  Estimate   the  answer  ") ==
        "estimate the answer");
}

TEST_CASE("plan parsing accepts well formed numbered lists") {
  auto steps = parse_plan_steps(
      "1. Define variables for the unknowns.\n"
      "   Use L and R.\n"
      "2) Set up the governing equations\n"
      "3. Solve the resulting system.\n");
  REQUIRE(steps.size() == 3);
  CHECK(steps[0].index == 1);
  CHECK(steps[0].title == "define variables for the unknowns");
  CHECK(steps[0].body == "Use L and R.");
  CHECK(steps[1].index == 2);
  CHECK(steps[2].title == "solve the resulting system");
}

TEST_CASE("plan parsing rejects malformed lists") {
  CHECK(parse_plan_steps("just prose, no numbering").empty());
  CHECK(parse_plan_steps("2. starts at two\n3. continues\n").empty());
  CHECK(parse_plan_steps("1. one\n1. one again\n").empty());
  CHECK(parse_plan_steps("1. one\n3. three\n2. two\n").empty());
  CHECK(parse_plan_steps("").empty());
}

TEST_CASE("segmentation splits at the first execution delimiter") {
  std::string text =
      "1. Plan step one.\n2. Plan step two.\n"
      "### Execution\n1. Do step one.\n\\boxed{36}\n";
  auto trace = segment_trace(text);
  CHECK(trace.plan.raw_text == "1. Plan step one.\n2. Plan step two.\n");
  CHECK(trace.execution.raw_text.starts_with("### Execution"));
  CHECK(trace.plan.raw_text + trace.execution.raw_text == text);
  CHECK(trace.plan.steps.size() == 2);
}

TEST_CASE("segmentation delimiter variants") {
  for (const char* header : {"Execution:\n", "EXECUTION phase\n", "## execution\n",
                             "#execution\n", "  execution now\n"}) {
    std::string text = std::string("plan text\n") + header + "work\n";
    auto trace = segment_trace(text);
    CHECK(trace.plan.raw_text == "plan text\n");
  }
  // mid-line "execution" must not split
  CHECK_THROWS_AS(segment_trace("plan about execution details\nmore plan\n"),
                  Error);
}

TEST_CASE("segmentation errors and warnings") {
  try {
    segment_trace("no delimiter here");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == "MissingBoundary");
  }
  // delimiter at offset zero leaves an empty plan span
  CHECK_THROWS_AS(segment_trace("Execution: immediately"), Error);

  std::vector<std::string> warnings;
  auto trace = segment_trace("plan\nExecution: a\nExecution: b\n", {}, &warnings);
  CHECK(trace.execution.raw_text.starts_with("Execution: a"));
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("AmbiguousBoundary") != std::string::npos);
}

TEST_CASE("segmentation round trip on random compositions") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    std::string plan;
    int steps = 1 + static_cast<int>(rng.next_below(4));
    for (int s = 0; s < steps; ++s)
      plan += std::to_string(s + 1) + ". step number " + std::to_string(s + 1) + "\n";
    std::string exec = "### Execution\nanswer is \\boxed{" +
                       std::to_string(rng.next_below(100)) + "}\n";
    auto trace = segment_trace(plan + exec);
    CHECK(trace.plan.raw_text == plan);
    CHECK(trace.execution.raw_text == exec);
    CHECK(trace.segment_boundary == plan.size());
  }
}

TEST_CASE("generation params validation") {
  GenerationParams p;
  CHECK_NOTHROW(validate(p));
  p.temperature = 2.5;
  CHECK_THROWS_AS(validate(p), Error);
  p.temperature = 0.9;
  p.n = 0;
  CHECK_THROWS_AS(validate(p), Error);
  p.n = 1;
  p.max_tokens = 0;
  CHECK_THROWS_AS(validate(p), Error);
}

TEST_CASE("rng determinism") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  bool differs = false;
  Rng a2(42);
  for (int i = 0; i < 10; ++i) differs |= a2.next_u64() != c.next_u64();
  CHECK(differs);

  Rng d(7);
  for (int i = 0; i < 1000; ++i) {
    double x = d.next_double();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    CHECK(d.next_below(13) < 13);
  }
}
