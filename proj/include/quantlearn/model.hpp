#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quantlearn/entailment.hpp"
#include "quantlearn/explanation.hpp"
#include "quantlearn/quantifier.hpp"
#include "quantlearn/taskgen.hpp"

namespace quantlearn {

/// Per-label scores, ordered like the task's label list.
using ClassLogits = std::vector<double>;

/// Two-layer scorer over pair features: tanh hidden layer, scalar output.
/// Parameters live in one flat vector laid out as
/// [w1 (24 x hidden, row-major by input), b1 (hidden), w2 (hidden), b2].
class AttentionNet {
 public:
  explicit AttentionNet(std::size_t hidden = 16);  // all zeros
  /// Parameters uniform in [-scale, scale].
  static AttentionNet random(std::size_t hidden, std::uint64_t seed, double scale = 0.1);

  std::size_t hidden() const noexcept { return hidden_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  double w1(std::size_t input, std::size_t unit) const { return params_[input * hidden_ + unit]; }
  double b1(std::size_t unit) const { return params_[kPairFeatureWidth * hidden_ + unit]; }
  double w2(std::size_t unit) const { return params_[(kPairFeatureWidth + 1) * hidden_ + unit]; }
  double b2() const { return params_.back(); }

  /// Parameter name for reports, e.g. "w1[3][7]".
  std::string parameter_name(std::size_t index) const;

  double score(const PairFeatures& features) const;
  /// Adds upstream * d score / d params into grad.
  void backward(const PairFeatures& features, double upstream, std::span<double> grad) const;

  bool operator==(const AttentionNet&) const = default;

 private:
  std::size_t hidden_;
  std::vector<double> params_;
};

enum class Aggregation { mean, attention };

struct LogitOptions {
  /// Divide the (1 - p) * s_e mass over the non-target labels.
  bool complement_split = false;
  /// Keep the s_n / |L| term (it cancels under softmax).
  bool neutral_term = true;

  bool operator==(const LogitOptions&) const = default;
};

struct ModelState {
  QuantifierLexicon lexicon;
  std::optional<AttentionNet> attention;  // absent: mean aggregation
  double rank_weight = 0.0;               // lambda
  std::vector<OrdinalRelation> relations;
  LogitOptions logits;
  /// Treat every quantifier as p = 1.
  bool unit_quantifiers = false;

  Aggregation aggregation() const noexcept { return attention ? Aggregation::attention : Aggregation::mean; }
};

/// Logits for one explanation given the quantifier probability p.
ClassLogits class_logits(const NliScores& scores, std::size_t target, bool label_negated, double p,
                         std::size_t n_labels, const LogitOptions& options = {});
ClassLogits class_logits(const NliScores& scores, const Explanation& exp, const QuantifierLexicon& lexicon,
                         const std::vector<std::string>& labels, const LogitOptions& options = {});

ClassLogits aggregate_mean(std::span<const ClassLogits> logits);
std::vector<double> attention_weights(std::span<const PairFeatures> features, const AttentionNet& net);
ClassLogits aggregate_attention(std::span<const ClassLogits> logits, std::span<const double> weights);
std::vector<double> softmax(std::span<const double> x);

/// Task with NLI scores precomputed for every split (scores never change
/// during training, including the noise decisions).
struct PreparedExample {
  std::vector<NliScores> scores;  // one per explanation
  std::size_t gold = 0;
  std::size_t index = 0;
};

struct PreparedTask {
  const Task* task = nullptr;
  std::size_t n_labels = 0;
  std::vector<ExplanationFeatures> features;
  std::vector<std::size_t> targets;
  std::vector<std::optional<std::size_t>> quantifiers;
  std::vector<bool> negated;
  std::array<std::vector<PreparedExample>, 3> splits;

  const std::vector<PreparedExample>& split(Split s) const { return splits[static_cast<std::size_t>(s)]; }
};

PreparedTask prepare_task(const Task& task, const ScorerConfig& scorer);
/// Prepares only the listed splits; the others stay empty and unread.
PreparedTask prepare_task(const Task& task, const ScorerConfig& scorer, std::span<const Split> splits);
PreparedExample prepare_example(const Task& task, const Attributes& attributes, const std::string& label,
                                const ScorerConfig& scorer, Split split, std::size_t index);

/// Forward pass for one example; keeps intermediates for the backward pass.
struct ForwardPass {
  std::vector<ClassLogits> logits;        // per explanation
  std::vector<double> probabilities_p;    // quantifier probability per explanation
  std::vector<PairFeatures> features;     // attention only
  std::vector<double> weights;            // aggregation weights
  ClassLogits aggregated;
  std::vector<double> distribution;
};

ForwardPass forward(const PreparedTask& task, const PreparedExample& example, const ModelState& model);

/// Label distribution: NLI scores -> logits per explanation -> aggregation -> softmax.
std::vector<double> predict(const PreparedTask& task, const PreparedExample& example, const ModelState& model);
std::vector<double> predict(const Attributes& example, const Task& task, const ModelState& model,
                            const ScorerConfig& scorer, std::uint64_t example_key = 0);

/// Lowest index wins ties; `tied` reports whether the maximum was shared.
std::size_t argmax(std::span<const double> values, bool* tied = nullptr);

struct LabeledPair {
  const PreparedTask* task = nullptr;
  const PreparedExample* example = nullptr;
};

struct Gradients {
  std::array<double, kQuantifierCount> lexicon{};
  std::vector<double> attention;  // empty without attention

  Gradients& operator+=(const Gradients& other);
  void scale(double factor);
  bool all_finite() const;
};

Gradients zero_gradients(const ModelState& model);

struct LossBreakdown {
  double ce = 0.0;
  double rank = 0.0;
  double total = 0.0;
};

double ce_loss(const ModelState& model, std::span<const LabeledPair> batch);
LossBreakdown total_loss(const ModelState& model, std::span<const LabeledPair> batch);

struct GradientResult {
  LossBreakdown loss;
  Gradients grad;
};

/// Analytic gradients of total_loss. Frozen lexicons get zero lexicon gradient.
GradientResult gradients(const ModelState& model, std::span<const LabeledPair> batch);

struct ParameterCheck {
  std::string name;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct FiniteDifferenceReport {
  std::vector<ParameterCheck> parameters;
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Compares analytic gradients with central differences for every trainable
/// parameter. Relative error is |a - n| / max(|a|, |n|, 1e-6).
FiniteDifferenceReport finite_difference_check(const ModelState& model, std::span<const LabeledPair> batch,
                                               double step = 1e-5, double tolerance = 1e-4);

}  // namespace quantlearn
