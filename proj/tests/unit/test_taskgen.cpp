#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "oracles.hpp"
#include "quantlearn/error.hpp"
#include "quantlearn/taskgen.hpp"

using namespace quantlearn;

namespace {

const ComplexityDescriptor kSimple{ClassCount::binary, NegationKind::none, Structure::simple, false};
const ComplexityDescriptor kSimpleQ{ClassCount::binary, NegationKind::none, Structure::simple, true};

}  // namespace

TEST_CASE("unquantified binary task labels follow the rule exactly") {
  const Task t = generate_task(kSimple, 7, ExampleCounts{}, QuantifierLexicon::predefined());
  REQUIRE(t.explanations.size() == 1);
  const auto& e = t.explanations[0];
  const std::size_t target = oracle::label_position(t, e.label);
  for (const auto* split : {&t.train, &t.validation, &t.test}) {
    for (const auto& ex : *split) {
      const bool fires = evaluate_condition(e.condition, ex.attributes) == Truth::True;
      CHECK(ex.label == t.labels[fires ? target : 1 - target]);
    }
  }
  CHECK(t.train.size() == 200);
  CHECK(t.validation.size() == 50);
  CHECK(t.test.size() == 100);
}

TEST_CASE("quantified rule holds at the generating rate") {
  ExampleCounts counts{10000, 1, 1};
  TaskOptions opt;
  opt.quantifier = "always";
  const Task t = generate_task(kSimpleQ, 11, counts, QuantifierLexicon::predefined(), opt);
  const auto& e = t.explanations[0];
  std::size_t fired = 0, agree = 0;
  for (const auto& ex : t.train) {
    if (evaluate_condition(e.condition, ex.attributes) != Truth::True) continue;
    ++fired;
    agree += ex.label == e.label;
  }
  REQUIRE(fired > 1000);
  CHECK(std::abs(static_cast<double>(agree) / static_cast<double>(fired) - 0.95) < 0.02);
  CHECK(t.truth.at("always") == doctest::Approx(0.95));
}

TEST_CASE("generation is deterministic") {
  for (const auto& d : all_complexities()) {
    const Task a = generate_task(d, 5, ExampleCounts{20, 5, 5}, QuantifierLexicon::predefined());
    const Task b = generate_task(d, 5, ExampleCounts{20, 5, 5}, QuantifierLexicon::predefined());
    CHECK(same_task(a, b));
  }
}

TEST_CASE("generated tasks realize their descriptor") {
  const auto suite = generate_suite(3, 17, ExampleCounts{10, 5, 5}, QuantifierLexicon::predefined());
  for (const auto& t : suite.tasks) {
    const bool binary = t.complexity.classes == ClassCount::binary;
    CHECK(t.labels.size() == (binary ? 2u : 3u));
    CHECK(t.explanations.size() == (binary ? 1u : t.labels.size()));
    for (const auto& e : t.explanations) {
      ComplexityDescriptor d = complexity_of(e, t.labels.size());
      CHECK_MESSAGE(d == t.complexity, render_explanation(e), " vs ", to_string(t.complexity));
      CHECK(parse_explanation(e.source_text, std::set<std::string>(t.labels.begin(), t.labels.end()))
                .same_structure(e));
    }
    if (!binary) CHECK(rules_mutually_exclusive(t));
    if (!binary) {
      for (const auto& ex : t.train) CHECK(firing_rule(t, ex.attributes).has_value());
    }
    for (const auto& ex : t.train) {
      for (const auto& spec : t.schema) {
        const Value* v = ex.attributes.find(spec.name);
        REQUIRE(v != nullptr);
        CHECK(spec.domain.contains(*v));
      }
    }
  }
}

TEST_CASE("suite counting") {
  const auto suite = generate_suite(2, 1, ExampleCounts{4, 2, 2}, QuantifierLexicon::predefined());
  CHECK(suite.tasks.size() == 96);
  std::map<ComplexityDescriptor, int> count;
  for (const auto& t : suite.tasks) ++count[t.complexity];
  CHECK(count.size() == 48);
  for (const auto& [d, n] : count) CHECK(n == 2);
  std::set<std::string> names;
  for (const auto& t : suite.tasks) names.insert(t.name);
  CHECK(names.size() == 96);
  CHECK_THROWS_AS(generate_suite(0, 1, ExampleCounts{}, QuantifierLexicon::predefined()), DataError);
}

TEST_CASE("quantified suites cover every quantifier") {
  SuiteOptions opt;
  opt.complexities = {kSimpleQ};
  const auto suite = generate_suite(15, 3, ExampleCounts{4, 2, 2}, QuantifierLexicon::predefined(), opt);
  std::set<std::string> used;
  for (const auto& t : suite.tasks) used.insert(*t.explanations[0].quantifier);
  CHECK(used.size() == kQuantifierCount);
}

TEST_CASE("seen/unseen split") {
  const auto base = generate_suite(10, 2, ExampleCounts{2, 1, 1}, QuantifierLexicon::predefined());
  const auto s = split_seen_unseen(base, 0.2, 9);
  CHECK(s.unseen.size() == 96);
  CHECK(s.seen.size() == 384);
  std::map<ComplexityDescriptor, int> unseen_per;
  for (std::size_t i : s.unseen) ++unseen_per[s.tasks[i].complexity];
  for (const auto& [d, n] : unseen_per) CHECK(n == 2);
  std::set<std::size_t> seen(s.seen.begin(), s.seen.end());
  for (std::size_t i : s.unseen) CHECK_FALSE(seen.contains(i));
  const auto again = split_seen_unseen(base, 0.2, 9);
  CHECK(again.unseen == s.unseen);
  const auto other = split_seen_unseen(base, 0.2, 10);
  CHECK(other.unseen != s.unseen);
  CHECK_THROWS_AS(split_seen_unseen(base, 0.0, 1), DataError);
  CHECK_THROWS_AS(split_seen_unseen(base, 1.0, 1), DataError);
}

TEST_CASE("features as text") {
  CHECK(fat_render(Attributes{{"head", Value{std::int64_t{1}}}, {"tail", Value{std::int64_t{0}}}}) ==
        "head is 1. tail is 0.");
  CHECK(fat_render(Attributes{}).empty());
  const Task t = generate_task(kSimple, 3, ExampleCounts{300, 1, 1}, QuantifierLexicon::predefined());
  std::map<std::string, Attributes> seen;
  for (const auto& ex : t.train) {
    auto [it, inserted] = seen.emplace(fat_render(ex), ex.attributes);
    if (!inserted) CHECK(it->second == ex.attributes);
  }
}

TEST_CASE("binary firing fraction stays balanced") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Task t = generate_task(kSimple, seed, ExampleCounts{1, 1, 1}, QuantifierLexicon::predefined());
    const double f = firing_fraction(t.explanations[0].condition, t.schema);
    CHECK(f > 0.0);
    CHECK(f < 1.0);
  }
}

TEST_CASE("multiclass labels option") {
  TaskOptions opt;
  opt.multiclass_labels = 5;
  const ComplexityDescriptor d{ClassCount::multiclass, NegationKind::label, Structure::single_junction, true};
  const Task t = generate_task(d, 8, ExampleCounts{50, 5, 5}, QuantifierLexicon::predefined(), opt);
  CHECK(t.labels.size() == 5);
  CHECK(t.explanations.size() == 5);
  CHECK(rules_mutually_exclusive(t));
}
