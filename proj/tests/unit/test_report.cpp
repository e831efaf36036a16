#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "quantlearn/error.hpp"
#include "quantlearn/report.hpp"
#include "quantlearn/training.hpp"

using namespace quantlearn;

namespace {

const TaskSuite& suite() {
  static const TaskSuite s =
      split_seen_unseen(generate_suite(4, 23, ExampleCounts{40, 10, 100}, QuantifierLexicon::predefined()), 0.25, 23);
  return s;
}

ModelState attention_model(std::uint64_t seed) {
  ModelState m;
  m.lexicon = QuantifierLexicon::random(seed);
  m.attention = AttentionNet::random(8, seed, 0.5);
  return m;
}

}  // namespace

TEST_CASE("zero-shot report covers every unseen task once") {
  const auto r = evaluate_zero_shot(attention_model(1), suite(), ScorerConfig{});
  REQUIRE(r.tasks.size() == suite().unseen.size());
  for (std::size_t k = 0; k < r.tasks.size(); ++k) {
    CHECK(r.tasks[k].task == suite().unseen[k]);
    CHECK(r.tasks[k].accuracy >= 0.0);
    CHECK(r.tasks[k].accuracy <= 1.0);
    CHECK(r.tasks[k].total == 100);
  }
  CHECK(r.per_complexity.size() == 48);
  CHECK(r.suite_seed == 23);
}

TEST_CASE("unquantified simple binary tasks are solved exactly") {
  const auto r = evaluate_zero_shot(ModelState{}, suite(), ScorerConfig{});
  const std::string name = to_string(ComplexityDescriptor{});
  for (const auto& t : r.tasks)
    if (t.complexity == name) CHECK(t.accuracy == 1.0);
}

TEST_CASE("evaluation never reads train or validation splits of unseen tasks") {
  auto corrupted = suite();
  for (std::size_t i : corrupted.unseen) {
    for (auto* split : {&corrupted.tasks[i].train, &corrupted.tasks[i].validation}) {
      for (auto& ex : *split) {
        ex.label = "no-such-label";
        ex.attributes = Attributes{{"bogus", Value{std::string("x")}}};
      }
    }
  }
  const auto model = attention_model(4);
  const auto a = evaluate_zero_shot(model, suite(), ScorerConfig{0.05, 0.1, 2});
  const auto b = evaluate_zero_shot(model, corrupted, ScorerConfig{0.05, 0.1, 2});
  REQUIRE(a.tasks.size() == b.tasks.size());
  for (std::size_t k = 0; k < a.tasks.size(); ++k) CHECK(a.tasks[k].correct == b.tasks[k].correct);
}

TEST_CASE("exent baseline matches a standalone implementation") {
  const auto r = run_baseline("exent", suite(), ScorerConfig{});
  CHECK(r.model == "exent");
  for (std::size_t k = 0; k < suite().unseen.size(); ++k) {
    const Task& t = suite().tasks[suite().unseen[k]];
    std::size_t correct = 0;
    for (const auto& ex : t.test) {
      std::vector<double> z(t.labels.size(), 0.0);
      for (const auto& e : t.explanations) {
        const auto s = oracle::vertex(oracle::from_truth(evaluate_condition(e.condition, ex.attributes)), 0.0);
        const std::size_t target = oracle::label_position(t, e.label);
        for (std::size_t l = 0; l < z.size(); ++l)
          z[l] += oracle::scalar_logit(s.e, s.n, s.c, target, l, e.label_negated, 1.0, z.size(), false, true);
      }
      const std::size_t best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
      correct += t.labels[best] == ex.label;
    }
    CHECK(r.tasks[k].correct == correct);
  }
}

TEST_CASE("exent agrees with any model on unquantified binary tasks") {
  const auto model = attention_model(9);
  const auto a = evaluate_zero_shot(model, suite(), ScorerConfig{});
  const auto b = run_baseline("exent", suite(), ScorerConfig{});
  for (std::size_t k = 0; k < a.tasks.size(); ++k) {
    const auto d = parse_complexity(a.tasks[k].complexity);
    if (d.classes == ClassCount::binary && !d.quantified) CHECK(a.tasks[k].correct == b.tasks[k].correct);
  }
}

TEST_CASE("majority baseline") {
  const auto r = run_baseline("majority", suite(), ScorerConfig{});
  double binary = 0;
  int n = 0;
  for (const auto& t : r.tasks) {
    if (parse_complexity(t.complexity).classes != ClassCount::binary) continue;
    binary += t.accuracy;
    ++n;
  }
  REQUIRE(n > 0);
  CHECK(std::abs(binary / n - 0.5) < 0.12);
  CHECK_THROWS_AS(run_baseline("roberta", suite(), ScorerConfig{}), DataError);
}

TEST_CASE("accuracy respects the Bayes bound of the generating process") {
  SuiteOptions opt;
  opt.complexities = {{ClassCount::binary, NegationKind::none, Structure::simple, true},
                      {ClassCount::binary, NegationKind::label, Structure::single_junction, true}};
  const auto s = split_seen_unseen(generate_suite(30, 8, ExampleCounts{10, 10, 400}, QuantifierLexicon::predefined(), opt),
                                   0.5, 8);
  ModelState predefined;
  predefined.lexicon = QuantifierLexicon::predefined();
  for (const auto& model : {predefined, attention_model(3)}) {
    const auto r = evaluate_zero_shot(model, s, ScorerConfig{});
    for (const auto& row : r.tasks) {
      const Task& t = s.tasks[row.task];
      const double p = t.truth.begin()->second;
      const double bayes = std::max(p, 1.0 - p);
      CHECK(row.accuracy <= bayes + 3.0 * std::sqrt(bayes * (1.0 - bayes) / 400.0) + 1e-12);
    }
  }
}

TEST_CASE("baseline deltas") {
  auto r = evaluate_zero_shot(attention_model(2), suite(), ScorerConfig{});
  const auto ex = run_baseline("exent", suite(), ScorerConfig{});
  const auto mj = run_baseline("majority", suite(), ScorerConfig{});
  attach_baselines(r, &ex, &mj);
  for (std::size_t k = 0; k < r.tasks.size(); ++k) {
    CHECK(*r.tasks[k].delta_exent() == doctest::Approx(r.tasks[k].accuracy - ex.tasks[k].accuracy));
    CHECK(*r.tasks[k].delta_majority() == doctest::Approx(r.tasks[k].accuracy - mj.tasks[k].accuracy));
  }
  for (const auto& c : r.per_complexity) CHECK(c.mean_delta_exent.has_value());
}

TEST_CASE("eval CSV round trip") {
  auto r = evaluate_zero_shot(attention_model(5), suite(), ScorerConfig{});
  const auto ex = run_baseline("exent", suite(), ScorerConfig{});
  attach_baselines(r, &ex, nullptr);
  std::stringstream ss;
  write_eval_csv(ss, r);
  const auto back = read_eval_csv(ss);
  REQUIRE(back.tasks.size() == r.tasks.size());
  CHECK(back.model == r.model);
  CHECK(back.suite_seed == r.suite_seed);
  CHECK(back.split_seed == r.split_seed);
  for (std::size_t k = 0; k < r.tasks.size(); ++k) {
    CHECK(back.tasks[k].name == r.tasks[k].name);
    CHECK(back.tasks[k].correct == r.tasks[k].correct);
    CHECK(std::abs(back.tasks[k].accuracy - r.tasks[k].accuracy) <= 1e-9);
    CHECK(std::abs(*back.tasks[k].exent_accuracy - *r.tasks[k].exent_accuracy) <= 1e-9);
    CHECK_FALSE(back.tasks[k].majority_accuracy.has_value());
  }
  for (std::size_t c = 0; c < r.per_complexity.size(); ++c)
    CHECK(std::abs(back.per_complexity[c].mean_accuracy - r.per_complexity[c].mean_accuracy) <= 1e-9);
  std::stringstream cs;
  write_complexity_csv(cs, r);
  std::string header;
  std::getline(cs, header);
  CHECK(header.rfind("model,complexity,", 0) == 0);
}

TEST_CASE("attention report") {
  const auto model = attention_model(6);
  const auto rep = attention_report(model, suite(), ScorerConfig{});
  std::size_t pairs = 0, examples = 0;
  for (std::size_t i : suite().unseen) {
    pairs += suite().tasks[i].test.size() * suite().tasks[i].explanations.size();
    examples += suite().tasks[i].test.size();
  }
  CHECK(rep.quantified.count + rep.unquantified.count == pairs);
  std::size_t bucket_count = 0;
  double bucket_sum = 0;
  for (const auto& b : rep.buckets) {
    bucket_count += b.weight.count;
    bucket_sum += b.weight.mean * static_cast<double>(b.weight.count);
    CHECK(b.weight.mean > 0.0);
    CHECK(b.weight.mean <= 1.0);
    CHECK(b.max_tokens - b.min_tokens == 3);
  }
  CHECK(bucket_count == pairs);
  // Weights of each example sum to one.
  CHECK(bucket_sum == doctest::Approx(static_cast<double>(examples)).epsilon(1e-9));

  std::size_t per_q = 0;
  for (const auto& w : rep.per_quantifier) per_q += w.count;
  CHECK(per_q == rep.quantified.count);

  ModelState zero;
  zero.attention = AttentionNet(4);
  const auto flat = attention_report(zero, suite(), ScorerConfig{});
  double expected_q = 0;
  std::size_t nq = 0;
  for (std::size_t i : suite().unseen) {
    const auto& t = suite().tasks[i];
    if (!t.complexity.quantified) continue;
    expected_q += static_cast<double>(t.test.size());
    nq += t.test.size() * t.explanations.size();
  }
  CHECK(flat.quantified.mean == doctest::Approx(expected_q / static_cast<double>(nq)).epsilon(1e-12));

  CHECK_THROWS_AS(attention_report(ModelState{}, suite(), ScorerConfig{}), DataError);

  std::stringstream ss;
  write_attention_csv(ss, rep);
  const auto back = read_attention_csv(ss);
  REQUIRE(back.buckets.size() == rep.buckets.size());
  for (std::size_t b = 0; b < rep.buckets.size(); ++b) {
    CHECK(back.buckets[b].weight.count == rep.buckets[b].weight.count);
    CHECK(std::abs(back.buckets[b].weight.mean - rep.buckets[b].weight.mean) <= 1e-9);
  }
  CHECK(std::abs(back.quantified.mean - rep.quantified.mean) <= 1e-9);
  CHECK(std::abs(back.unquantified.mean - rep.unquantified.mean) <= 1e-9);
  for (std::size_t q = 0; q < kQuantifierCount; ++q)
    CHECK(std::abs(back.per_quantifier[q].mean - rep.per_quantifier[q].mean) <= 1e-9);
}

TEST_CASE("quantifier recovery") {
  const auto truth = QuantifierLexicon::predefined();
  const auto same = quantifier_recovery_report(truth, truth);
  CHECK(same.spearman == doctest::Approx(1.0));
  CHECK(same.relations_satisfied == 1.0);
  for (const auto& row : same.rows) CHECK(row.abs_error < 1e-12);

  std::array<double, kQuantifierCount> flipped{};
  for (std::size_t i = 0; i < kQuantifierCount; ++i) flipped[i] = logit(1.0 - kReferenceProbabilities[i]);
  const auto rev = quantifier_recovery_report(QuantifierLexicon::from_raws(flipped), truth);
  CHECK(rev.spearman == doctest::Approx(-1.0));
  CHECK(rev.strict_relations_satisfied == 0.0);

  const auto rnd = quantifier_recovery_report(QuantifierLexicon::random(4), truth);
  std::stringstream ss;
  write_recovery_csv(ss, rnd);
  const auto back = read_recovery_csv(ss);
  REQUIRE(back.rows.size() == kQuantifierCount);
  for (std::size_t i = 0; i < kQuantifierCount; ++i) {
    CHECK(back.rows[i].word == rnd.rows[i].word);
    CHECK(std::abs(back.rows[i].learned - rnd.rows[i].learned) <= 1e-9);
    CHECK(std::abs(back.rows[i].truth - rnd.rows[i].truth) <= 1e-9);
  }
  CHECK(std::abs(back.spearman - rnd.spearman) <= 1e-9);
  CHECK(std::abs(back.relations_satisfied - rnd.relations_satisfied) <= 1e-9);
}

TEST_CASE("spearman agrees with a pairwise-count reference") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> d(0, 6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(12), b(12);
    for (auto& v : a) v = d(rng);
    for (auto& v : b) v = d(rng) * 0.5;
    const double expected = oracle::spearman(a, b);
    const double got = spearman(a, b);
    if (std::isnan(expected)) CHECK(std::isnan(got));
    else CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  }
  const std::vector<double> constant(5, 1.0), ramp = {1, 2, 3, 4, 5};
  CHECK(std::isnan(spearman(constant, ramp)));
  CHECK(average_ranks(std::vector<double>{3, 1, 3}) == std::vector<double>{2.5, 1.0, 2.5});
}

TEST_CASE("csv helpers") {
  CHECK(split_csv_line("a,,b") == std::vector<std::string>{"a", "", "b"});
  CHECK(std::stod(format_double(0.1)) == 0.1);
}
