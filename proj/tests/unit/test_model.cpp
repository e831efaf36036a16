#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "quantlearn/error.hpp"
#include "quantlearn/model.hpp"

using namespace quantlearn;

namespace {

// Binary task with one rule "If head equal to 1, then <quant> dax".
Task single_rule_task(std::optional<std::string> quant, bool negated = false) {
  Task t;
  t.name = "probe";
  t.generator_seed = 1;
  t.labels = {"dax", "wug"};
  t.schema = {{"head", Domain{}}};
  Explanation e;
  e.condition = ConditionNode::leaf({"head", CompareOp::equal, Value{std::int64_t{1}}});
  e.label = "dax";
  e.quantifier = std::move(quant);
  e.label_negated = negated;
  t.explanations.push_back(e);
  for (std::int64_t v = 0; v < 5; ++v) {
    t.train.push_back({{{"head", Value{v}}}, v % 2 ? "dax" : "wug"});
    t.train.push_back({{{"head", Value{v}}}, v % 3 ? "wug" : "dax"});
  }
  t.validation = t.train;
  t.test = t.train;
  return t;
}

std::vector<LabeledPair> batch_of(const PreparedTask& p) {
  std::vector<LabeledPair> out;
  for (const auto& ex : p.split(Split::train)) out.push_back({&p, &ex});
  return out;
}

}  // namespace

TEST_CASE("class logits examples") {
  const auto z = class_logits(NliScores{1, 0, 0}, 0, false, 1.0, 2);
  CHECK(z == ClassLogits{1.0, 0.0});
  for (const NliScores s : {NliScores{0.2, 0.5, 0.3}, NliScores{0.9, 0.05, 0.05}}) {
    const auto h = class_logits(s, 1, false, 0.5, 4);
    for (double v : h) CHECK(v == doctest::Approx(h[1]).epsilon(1e-15));
  }
  const auto n = class_logits(NliScores{1, 0, 0}, 0, true, 0.95, 3);
  CHECK(n[0] == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(n[1] == doctest::Approx(0.95).epsilon(1e-14));
  CHECK(n[2] == doctest::Approx(0.95).epsilon(1e-14));
  CHECK_THROWS_AS(class_logits(NliScores{}, 2, false, 0.5, 2), DataError);
}

TEST_CASE("class logits agree with the scalar formula") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    double a = u(rng), b = u(rng), c = u(rng);
    const double s = a + b + c;
    const NliScores sc{a / s, b / s, c / s};
    const std::size_t n = 2 + static_cast<std::size_t>(u(rng) * 4);
    const std::size_t target = static_cast<std::size_t>(u(rng) * static_cast<double>(n));
    const bool neg = u(rng) < 0.5;
    const double p = u(rng);
    LogitOptions opt{u(rng) < 0.5, u(rng) < 0.5};
    const auto z = class_logits(sc, target, neg, p, n, opt);
    for (std::size_t l = 0; l < n; ++l)
      CHECK(std::abs(z[l] - oracle::scalar_logit(sc.entail, sc.neutral, sc.contradict, target, l, neg, p, n,
                                                 opt.complement_split, opt.neutral_term)) <= 1e-12);
  }
}

TEST_CASE("aggregation") {
  const std::vector<ClassLogits> one = {{0.3, 0.7}};
  CHECK(aggregate_mean(one) == one[0]);
  const std::vector<ClassLogits> two = {{1, 0}, {0, 1}};
  CHECK(aggregate_mean(two) == ClassLogits{0.5, 0.5});
  const std::vector<double> first = {1.0, 0.0};
  CHECK(aggregate_attention(two, first) == two[0]);
  const std::vector<double> w = {0.3, 0.7};
  const auto a = aggregate_attention(two, w);
  CHECK(a[0] == doctest::Approx(0.3));
  CHECK(a[1] == doctest::Approx(0.7));
  const std::vector<ClassLogits> three = {{0.1, 0.4, 0.9}, {0.2, 0.2, 0.6}, {1.0, 0.0, 0.5}};
  const std::vector<double> uniform(3, 1.0 / 3.0);
  const auto m = aggregate_mean(three);
  const auto at = aggregate_attention(three, uniform);
  for (std::size_t l = 0; l < 3; ++l) CHECK(m[l] == doctest::Approx(at[l]).epsilon(1e-15));
  CHECK_THROWS_AS(aggregate_mean(std::vector<ClassLogits>{}), DataError);
}

TEST_CASE("attention weights") {
  const AttentionNet zero(8);
  std::vector<PairFeatures> feats(4);
  for (std::size_t j = 0; j < feats.size(); ++j) feats[j][j] = 1.0;
  for (double w : attention_weights(feats, zero)) CHECK(w == doctest::Approx(0.25));
  CHECK(attention_weights(std::span(feats).first(1), AttentionNet::random(8, 3)) == std::vector<double>{1.0});

  auto net = AttentionNet::random(8, 4, 0.5);
  const auto base = attention_weights(feats, net);
  auto shifted = net;
  shifted.parameters().back() += 3.0;
  const auto moved = attention_weights(feats, shifted);
  double total = 0;
  for (std::size_t j = 0; j < base.size(); ++j) {
    CHECK(moved[j] == doctest::Approx(base[j]).epsilon(1e-12));
    total += base[j];
  }
  CHECK(total == doctest::Approx(1.0));
  for (const auto& f : feats) CHECK(net.score(f) == doctest::Approx(oracle::mlp_score(net, f)).epsilon(1e-13));
}

TEST_CASE("predict closed forms") {
  const Task t = single_rule_task("usually");
  const auto lex = QuantifierLexicon::predefined();
  ModelState m;
  m.lexicon = lex;
  const Attributes fires = {{"head", Value{std::int64_t{1}}}};
  const auto d = predict(fires, t, m, ScorerConfig{});
  const double p = lex.probability("usually");
  const auto expected = oracle::softmax({p, 1.0 - p});
  CHECK(d[0] == doctest::Approx(expected[0]).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(expected[1]).epsilon(1e-12));

  const Task plain = single_rule_task(std::nullopt);
  const auto e = predict(fires, plain, m, ScorerConfig{});
  CHECK(argmax(e) == 0);
  CHECK(e[0] + e[1] == doctest::Approx(1.0));
}

TEST_CASE("argmax ties") {
  bool tied = false;
  CHECK(argmax(std::vector<double>{0.2, 0.5, 0.5}, &tied) == 1);
  CHECK(tied);
  CHECK(argmax(std::vector<double>{0.7, 0.3}, &tied) == 0);
  CHECK_FALSE(tied);
}

TEST_CASE("cross entropy") {
  const Task t = single_rule_task("often");
  const auto prepared = prepare_task(t, ScorerConfig{});
  ModelState m;
  m.lexicon = QuantifierLexicon::predefined();  // often = 0.5: uniform prediction
  const auto batch = batch_of(prepared);
  CHECK(ce_loss(m, batch) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Batch loss is the mean of single-example losses.
  m.lexicon = QuantifierLexicon::random(9);
  double sum = 0;
  for (const auto& pair : batch) sum += ce_loss(m, std::span(&pair, 1));
  CHECK(ce_loss(m, batch) == doctest::Approx(sum / static_cast<double>(batch.size())).epsilon(1e-12));

  // Near-certain correct predictions give near-zero loss.
  Task sure = single_rule_task(std::nullopt);
  for (auto& ex : sure.train) ex.label = std::get<std::int64_t>(*ex.attributes.find("head")) == 1 ? "dax" : "wug";
  const auto sp = prepare_task(sure, ScorerConfig{});
  const auto sb = batch_of(sp);
  const double loss = ce_loss(m, sb);
  CHECK(loss == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("total loss") {
  const Task t = single_rule_task("likely");
  const auto prepared = prepare_task(t, ScorerConfig{});
  const auto batch = batch_of(prepared);
  ModelState m;
  m.lexicon = QuantifierLexicon::predefined();
  CHECK(total_loss(m, batch).total == doctest::Approx(ce_loss(m, batch)).epsilon(1e-14));
  m.rank_weight = 10.0;
  m.relations = reference_relations();
  double rank = 0;
  const auto p = m.lexicon.probabilities();
  for (std::size_t i = 0; i < kQuantifierCount; ++i)
    for (std::size_t j = i + 1; j < kQuantifierCount; ++j) {
      const double ri = kReferenceProbabilities[i], rj = kReferenceProbabilities[j];
      rank += ri == rj ? (p[i] - p[j]) * (p[i] - p[j]) : std::log1p(std::exp(ri > rj ? p[j] - p[i] : p[i] - p[j]));
    }
  const auto tl = total_loss(m, batch);
  CHECK(tl.total == doctest::Approx(ce_loss(m, batch) + 10.0 * rank).epsilon(1e-12));
  auto frozen = m;
  frozen.lexicon.set_frozen(true);
  CHECK(total_loss(frozen, batch).total == tl.total);
  const auto g = gradients(frozen, batch);
  for (double v : g.grad.lexicon) CHECK(v == 0.0);
}

TEST_CASE("lexicon gradient matches the hand-derived formula") {
  for (bool negated : {false, true}) {
    const Task t = single_rule_task("sometimes", negated);
    const auto prepared = prepare_task(t, ScorerConfig{});
    const auto batch = batch_of(prepared);
    ModelState m;
    m.lexicon = QuantifierLexicon::random(21);
    const std::size_t q = *quantifier_index("sometimes");
    const double p = m.lexicon.probability(q);
    double expected = 0;
    for (const auto& ex : t.train) {
      const bool fires = std::get<std::int64_t>(*ex.attributes.find("head")) == 1;
      // Evidence for "dax" over "wug" is +(2p-1) when the rule points at dax.
      const double sign = (fires != negated) ? 1.0 : -1.0;
      const double margin = sign * (2.0 * p - 1.0);
      const double pd = 1.0 / (1.0 + std::exp(-margin));
      const double dldm = ex.label == "dax" ? -(1.0 - pd) : pd;
      expected += dldm * sign * 2.0 * p * (1.0 - p);
    }
    expected /= static_cast<double>(t.train.size());
    const auto g = gradients(m, batch);
    CHECK(g.grad.lexicon[q] == doctest::Approx(expected).epsilon(1e-12));
    for (std::size_t i = 0; i < kQuantifierCount; ++i)
      if (i != q) CHECK(g.grad.lexicon[i] == 0.0);
  }
}

TEST_CASE("finite difference check") {
  const Task t = generate_task({ClassCount::multiclass, NegationKind::both, Structure::nested, true}, 4,
                               ExampleCounts{6, 1, 1}, QuantifierLexicon::predefined());
  const auto prepared = prepare_task(t, ScorerConfig{0.1, 0.2, 3});
  const auto batch = batch_of(prepared);
  ModelState m;
  m.lexicon = QuantifierLexicon::random(2);
  m.attention = AttentionNet::random(6, 2, 0.5);
  m.rank_weight = 10.0;
  m.relations = reference_relations();
  m.logits.complement_split = true;
  const auto r = finite_difference_check(m, batch);
  CHECK(r.passed);
  CHECK(r.max_relative_error < 1e-4);
  CHECK(r.parameters.size() == kQuantifierCount + m.attention->parameter_count());
  const auto again = finite_difference_check(m, batch);
  CHECK(again.max_relative_error == r.max_relative_error);

  m.attention = AttentionNet(4);
  CHECK(finite_difference_check(m, batch).passed);
}

TEST_CASE("gradient accumulators") {
  ModelState m;
  m.attention = AttentionNet(2);
  auto g = zero_gradients(m);
  CHECK(g.attention.size() == m.attention->parameter_count());
  g.lexicon[0] = 2.0;
  g.attention[1] = 4.0;
  auto h = g;
  h += g;
  h.scale(0.25);
  CHECK(h.lexicon[0] == 1.0);
  CHECK(h.attention[1] == 2.0);
  CHECK(h.all_finite());
  h.attention[0] = std::nan("");
  CHECK_FALSE(h.all_finite());
}
