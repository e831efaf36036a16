#include "quantlearn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "quantlearn/error.hpp"
#include "quantlearn/random.hpp"

namespace quantlearn {

// ---------------------------------------------------------------------------
// AttentionNet

AttentionNet::AttentionNet(std::size_t hidden) : hidden_(hidden), params_((kPairFeatureWidth + 2) * hidden + 1, 0.0) {
  if (hidden == 0) throw DataError("attention hidden width must be at least 1");
}

AttentionNet AttentionNet::random(std::size_t hidden, std::uint64_t seed, double scale) {
  AttentionNet net(hidden);
  Rng rng(mix_seed(seed, 0xa77e));
  for (auto& w : net.params_) w = uniform_real(rng, -scale, scale);
  return net;
}

std::string AttentionNet::parameter_name(std::size_t index) const {
  const std::size_t w1_end = kPairFeatureWidth * hidden_;
  if (index < w1_end) return "w1[" + std::to_string(index / hidden_) + "][" + std::to_string(index % hidden_) + "]";
  if (index < w1_end + hidden_) return "b1[" + std::to_string(index - w1_end) + "]";
  if (index < w1_end + 2 * hidden_) return "w2[" + std::to_string(index - w1_end - hidden_) + "]";
  return "b2";
}

double AttentionNet::score(const PairFeatures& f) const {
  double out = b2();
  for (std::size_t k = 0; k < hidden_; ++k) {
    double a = b1(k);
    for (std::size_t i = 0; i < kPairFeatureWidth; ++i) a += f[i] * w1(i, k);
    out += w2(k) * std::tanh(a);
  }
  return out;
}

void AttentionNet::backward(const PairFeatures& f, double upstream, std::span<double> grad) const {
  const std::size_t b1_off = kPairFeatureWidth * hidden_;
  const std::size_t w2_off = b1_off + hidden_;
  for (std::size_t k = 0; k < hidden_; ++k) {
    double a = b1(k);
    for (std::size_t i = 0; i < kPairFeatureWidth; ++i) a += f[i] * w1(i, k);
    const double h = std::tanh(a);
    grad[w2_off + k] += upstream * h;
    const double dh = upstream * w2(k) * (1.0 - h * h);
    grad[b1_off + k] += dh;
    for (std::size_t i = 0; i < kPairFeatureWidth; ++i) grad[i * hidden_ + k] += f[i] * dh;
  }
  grad.back() += upstream;
}

// ---------------------------------------------------------------------------
// Logits and aggregation

namespace {

struct LogitSlopes {
  double target = 0.0;  // d z[target] / d p
  double other = 0.0;   // d z[other] / d p
};

LogitSlopes logit_slopes(const NliScores& scores, bool negated, std::size_t n_labels, const LogitOptions& options) {
  double se = scores.entail;
  double sc = scores.contradict;
  if (negated) std::swap(se, sc);
  const double split = options.complement_split ? 1.0 / static_cast<double>(n_labels - 1) : 1.0;
  return {se - sc, sc - se * split};
}

double quantifier_probability(const PreparedTask& task, std::size_t j, const ModelState& model) {
  if (model.unit_quantifiers || !task.quantifiers[j]) return 1.0;
  return model.lexicon.probability(*task.quantifiers[j]);
}

}  // namespace

ClassLogits class_logits(const NliScores& scores, std::size_t target, bool label_negated, double p,
                         std::size_t n_labels, const LogitOptions& options) {
  if (n_labels < 2) throw DataError("class_logits needs at least two labels");
  if (target >= n_labels) throw DataError("explanation label outside the label set");
  double se = scores.entail;
  double sc = scores.contradict;
  if (label_negated) std::swap(se, sc);
  const double neutral = options.neutral_term ? scores.neutral / static_cast<double>(n_labels) : 0.0;
  const double split = options.complement_split ? 1.0 / static_cast<double>(n_labels - 1) : 1.0;
  const double other = p * sc + (1.0 - p) * se * split + neutral;
  ClassLogits z(n_labels, other);
  z[target] = p * se + (1.0 - p) * sc + neutral;
  return z;
}

ClassLogits class_logits(const NliScores& scores, const Explanation& exp, const QuantifierLexicon& lexicon,
                         const std::vector<std::string>& labels, const LogitOptions& options) {
  const auto it = std::find(labels.begin(), labels.end(), exp.label);
  if (it == labels.end()) throw DataError("explanation label '" + exp.label + "' is not a task label");
  const double p = exp.quantifier ? lexicon.probability(*exp.quantifier) : 1.0;
  return class_logits(scores, static_cast<std::size_t>(it - labels.begin()), exp.label_negated, p, labels.size(),
                      options);
}

ClassLogits aggregate_mean(std::span<const ClassLogits> logits) {
  if (logits.empty()) throw DataError("cannot aggregate an empty list of logits");
  ClassLogits out(logits.front().size(), 0.0);
  for (const auto& z : logits) {
    if (z.size() != out.size()) throw DataError("logit vectors differ in length");
    for (std::size_t l = 0; l < out.size(); ++l) out[l] += z[l];
  }
  for (auto& v : out) v /= static_cast<double>(logits.size());
  return out;
}

std::vector<double> softmax(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (auto& v : out) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : out) v /= sum;
  return out;
}

std::vector<double> attention_weights(std::span<const PairFeatures> features, const AttentionNet& net) {
  if (features.empty()) throw DataError("attention needs at least one explanation");
  std::vector<double> raw;
  raw.reserve(features.size());
  for (const auto& f : features) raw.push_back(net.score(f));
  return softmax(raw);
}

ClassLogits aggregate_attention(std::span<const ClassLogits> logits, std::span<const double> weights) {
  if (logits.size() != weights.size()) throw DataError("attention weights and logits differ in count");
  if (logits.empty()) throw DataError("cannot aggregate an empty list of logits");
  ClassLogits out(logits.front().size(), 0.0);
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (logits[j].size() != out.size()) throw DataError("logit vectors differ in length");
    for (std::size_t l = 0; l < out.size(); ++l) out[l] += weights[j] * logits[j][l];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prepared tasks

PreparedExample prepare_example(const Task& task, const Attributes& attributes, const std::string& label,
                                const ScorerConfig& scorer, Split split, std::size_t index) {
  PreparedExample ex;
  ex.gold = task.label_index(label);
  ex.index = index;
  ex.scores.reserve(task.explanations.size());
  for (std::size_t j = 0; j < task.explanations.size(); ++j) {
    const PairKey key{task.generator_seed, static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(j), index};
    ex.scores.push_back(nli_scores(task.explanations[j], attributes, scorer, key));
  }
  return ex;
}

namespace {

PreparedTask prepare_header(const Task& task) {
  if (task.explanations.empty()) throw DataError("task " + task.name + " has no explanations");
  PreparedTask p;
  p.task = &task;
  p.n_labels = task.labels.size();
  for (const auto& e : task.explanations) {
    p.features.push_back(explanation_features(e));
    p.targets.push_back(task.label_index(e.label));
    p.quantifiers.push_back(e.quantifier ? quantifier_index(*e.quantifier) : std::nullopt);
    if (e.quantifier && !p.quantifiers.back()) throw UnknownQuantifier(*e.quantifier);
    p.negated.push_back(e.label_negated);
  }
  return p;
}

}  // namespace

PreparedTask prepare_task(const Task& task, const ScorerConfig& scorer, std::span<const Split> splits) {
  scorer.validate();
  PreparedTask p = prepare_header(task);
  for (Split s : splits) {
    const auto& examples = task.split(s);
    auto& out = p.splits[static_cast<std::size_t>(s)];
    out.clear();
    out.reserve(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i)
      out.push_back(prepare_example(task, examples[i].attributes, examples[i].label, scorer, s, i));
  }
  return p;
}

PreparedTask prepare_task(const Task& task, const ScorerConfig& scorer) {
  static constexpr std::array<Split, 3> all{Split::train, Split::validation, Split::test};
  return prepare_task(task, scorer, all);
}

// ---------------------------------------------------------------------------
// Forward / backward

ForwardPass forward(const PreparedTask& task, const PreparedExample& example, const ModelState& model) {
  const std::size_t m = task.targets.size();
  ForwardPass fp;
  fp.logits.reserve(m);
  fp.probabilities_p.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double p = quantifier_probability(task, j, model);
    fp.probabilities_p.push_back(p);
    fp.logits.push_back(class_logits(example.scores[j], task.targets[j], task.negated[j], p, task.n_labels, model.logits));
  }
  if (model.attention) {
    fp.features.reserve(m);
    for (std::size_t j = 0; j < m; ++j) fp.features.push_back(pair_features(task.features[j], example.scores[j]));
    fp.weights = attention_weights(fp.features, *model.attention);
    fp.aggregated = aggregate_attention(fp.logits, fp.weights);
  } else {
    fp.weights.assign(m, 1.0 / static_cast<double>(m));
    fp.aggregated = aggregate_mean(fp.logits);
  }
  fp.distribution = softmax(fp.aggregated);
  return fp;
}

std::vector<double> predict(const PreparedTask& task, const PreparedExample& example, const ModelState& model) {
  return forward(task, example, model).distribution;
}

std::vector<double> predict(const Attributes& example, const Task& task, const ModelState& model,
                            const ScorerConfig& scorer, std::uint64_t example_key) {
  scorer.validate();
  const PreparedTask prepared = prepare_header(task);
  const PreparedExample ex = prepare_example(task, example, task.labels.front(), scorer, Split::test, example_key);
  return predict(prepared, ex, model);
}

std::size_t argmax(std::span<const double> values, bool* tied) {
  if (values.empty()) throw DataError("argmax of an empty vector");
  const double mx = *std::max_element(values.begin(), values.end());
  const double tol = 1e-12 * std::max(1.0, std::abs(mx));
  std::size_t best = values.size();
  std::size_t count = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= mx - tol) {
      if (best == values.size()) best = i;
      ++count;
    }
  }
  if (tied) *tied = count > 1;
  return best;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  for (std::size_t i = 0; i < kQuantifierCount; ++i) lexicon[i] += other.lexicon[i];
  if (attention.size() != other.attention.size()) throw DataError("gradient shapes differ");
  for (std::size_t i = 0; i < attention.size(); ++i) attention[i] += other.attention[i];
  return *this;
}

void Gradients::scale(double factor) {
  for (auto& g : lexicon) g *= factor;
  for (auto& g : attention) g *= factor;
}

bool Gradients::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(lexicon.begin(), lexicon.end(), finite) && std::all_of(attention.begin(), attention.end(), finite);
}

Gradients zero_gradients(const ModelState& model) {
  Gradients g;
  if (model.attention) g.attention.assign(model.attention->parameter_count(), 0.0);
  return g;
}

namespace {

double example_loss(const ForwardPass& fp, std::size_t gold) {
  return -std::log(std::max(fp.distribution[gold], 1e-300));
}

void backward(const PreparedTask& task, const PreparedExample& example, const ModelState& model,
              const ForwardPass& fp, double scale, Gradients& grad) {
  const std::size_t n = task.n_labels;
  const std::size_t m = task.targets.size();
  std::vector<double> d_agg(fp.distribution);
  d_agg[example.gold] -= 1.0;
  for (auto& v : d_agg) v *= scale;

  const bool lexicon_trainable = !model.unit_quantifiers && !model.lexicon.frozen();
  if (lexicon_trainable) {
    for (std::size_t j = 0; j < m; ++j) {
      if (!task.quantifiers[j]) continue;
      const LogitSlopes slope = logit_slopes(example.scores[j], task.negated[j], n, model.logits);
      double d_p = 0.0;
      for (std::size_t l = 0; l < n; ++l) d_p += d_agg[l] * (l == task.targets[j] ? slope.target : slope.other);
      d_p *= fp.weights[j];
      const double p = fp.probabilities_p[j];
      grad.lexicon[*task.quantifiers[j]] += d_p * p * (1.0 - p);
    }
  }

  if (model.attention) {
    std::vector<double> d_weight(m, 0.0);
    double mean = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t l = 0; l < n; ++l) d_weight[j] += d_agg[l] * fp.logits[j][l];
      mean += fp.weights[j] * d_weight[j];
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double d_score = fp.weights[j] * (d_weight[j] - mean);
      model.attention->backward(fp.features[j], d_score, grad.attention);
    }
  }
}

}  // namespace

double ce_loss(const ModelState& model, std::span<const LabeledPair> batch) {
  if (batch.empty()) throw DataError("empty batch");
  double sum = 0.0;
  for (const auto& item : batch) sum += example_loss(forward(*item.task, *item.example, model), item.example->gold);
  return sum / static_cast<double>(batch.size());
}

LossBreakdown total_loss(const ModelState& model, std::span<const LabeledPair> batch) {
  LossBreakdown out;
  out.ce = ce_loss(model, batch);
  if (!model.relations.empty() && model.rank_weight != 0.0)
    out.rank = ranking_loss(model.lexicon, model.relations).value;
  out.total = out.ce + model.rank_weight * out.rank;
  return out;
}

GradientResult gradients(const ModelState& model, std::span<const LabeledPair> batch) {
  if (batch.empty()) throw DataError("empty batch");
  GradientResult r;
  r.grad = zero_gradients(model);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& item : batch) {
    const ForwardPass fp = forward(*item.task, *item.example, model);
    r.loss.ce += example_loss(fp, item.example->gold) * scale;
    backward(*item.task, *item.example, model, fp, scale, r.grad);
  }
  if (!model.relations.empty() && model.rank_weight != 0.0) {
    const RankingLoss rank = ranking_loss(model.lexicon, model.relations);
    r.loss.rank = rank.value;
    if (!model.unit_quantifiers)
      for (std::size_t i = 0; i < kQuantifierCount; ++i) r.grad.lexicon[i] += model.rank_weight * rank.gradient[i];
  }
  r.loss.total = r.loss.ce + model.rank_weight * r.loss.rank;
  return r;
}

FiniteDifferenceReport finite_difference_check(const ModelState& model, std::span<const LabeledPair> batch,
                                               double step, double tolerance) {
  if (!(step > 0.0)) throw DataError("finite-difference step must be positive");
  const GradientResult analytic = gradients(model, batch);
  FiniteDifferenceReport report;
  ModelState probe = model;

  auto record = [&](std::string name, double a, double numeric) {
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    const double rel = std::abs(a - numeric) / denom;
    report.max_relative_error = std::max(report.max_relative_error, rel);
    report.parameters.push_back({std::move(name), a, numeric, rel});
  };

  // Central difference of CE and of the ranking term separately; their
  // weighted sum is the difference of total_loss without the cancellation
  // error of subtracting two large totals.
  auto central = [&](auto&& set, double orig) {
    set(orig + step);
    const LossBreakdown up = total_loss(probe, batch);
    set(orig - step);
    const LossBreakdown down = total_loss(probe, batch);
    set(orig);
    return (up.ce - down.ce) / (2.0 * step) + model.rank_weight * (up.rank - down.rank) / (2.0 * step);
  };

  if (!model.unit_quantifiers && !model.lexicon.frozen()) {
    for (std::size_t i = 0; i < kQuantifierCount; ++i) {
      const double numeric = central([&](double v) { probe.lexicon.set_raw(i, v); }, model.lexicon.raw(i));
      record("lexicon[" + std::string(kQuantifierWords[i]) + "]", analytic.grad.lexicon[i], numeric);
    }
  } else {
    // Frozen parameters must receive exactly zero gradient.
    for (std::size_t i = 0; i < kQuantifierCount; ++i)
      record("lexicon[" + std::string(kQuantifierWords[i]) + "] (frozen)", analytic.grad.lexicon[i], 0.0);
  }
  if (model.attention) {
    auto params = probe.attention->parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double numeric = central([&](double v) { params[i] = v; }, params[i]);
      record(model.attention->parameter_name(i), analytic.grad.attention[i], numeric);
    }
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace quantlearn
