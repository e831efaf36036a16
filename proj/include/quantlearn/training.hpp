#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "quantlearn/entailment.hpp"
#include "quantlearn/model.hpp"
#include "quantlearn/quantifier.hpp"
#include "quantlearn/taskgen.hpp"

namespace quantlearn {

enum class InitMode { predefined, random, ordinal };

std::string_view to_string(InitMode mode) noexcept;
InitMode parse_init_mode(std::string_view text);  // throws DataError
std::string_view to_string(Aggregation a) noexcept;
Aggregation parse_aggregation(std::string_view text);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;  // attention parameters only
  /// Lexicon group keeps one second-moment estimate (mean squared gradient
  /// over the group) instead of one per raw. Per-raw scaling moves every
  /// saturating raw at the same speed, freezing their initial order.
  bool shared_lexicon_scale = true;

  bool operator==(const AdamHyper&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batches_per_epoch = 100;
  std::size_t batch_size = 2;
  std::size_t grad_accumulation = 8;
  double lr_model = 1e-5;
  double lr_quant = 1e-2;
  AdamHyper adam;
  std::uint64_t seed = 42;
  double rank_weight = 10.0;
  InitMode init_mode = InitMode::ordinal;
  Aggregation aggregation = Aggregation::attention;
  std::size_t attention_hidden = 16;
  LogitOptions logits;
  ScorerConfig scorer;

  void validate() const;  // throws DataError
  bool operator==(const TrainConfig&) const = default;
};

/// Model before training, as selected by init_mode:
/// predefined -> reference strengths, no relations; random -> random raws,
/// no relations; ordinal -> random raws plus the reference relations and
/// rank_weight. Attention (when enabled) starts uniform in [-0.1, 0.1].
ModelState initial_model(const TrainConfig& config);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;
  std::size_t step = 0;

  explicit AdamMoments(std::size_t n = 0) : first(n, 0.0), second(n, 0.0) {}
};

/// One decoupled-weight-decay Adam update of params in place, with bias
/// correction. With shared_scale the second moment is the group mean of g^2
/// (kept in moments.second[0]). Throws DataError on a non-finite gradient or
/// shape mismatch.
void optimizer_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments, double lr,
                    double weight_decay, const AdamHyper& hyper, bool shared_scale = false);

struct OptimizerState {
  AdamMoments lexicon{kQuantifierCount};
  AdamMoments attention;
};

OptimizerState make_optimizer(const ModelState& model);

/// Applies grads to model: lexicon raws at lr_quant without decay (skipped
/// when frozen or unit_quantifiers), attention at lr_model with decay.
void apply_gradients(ModelState& model, const Gradients& grads, OptimizerState& state, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
  std::size_t stage = 0;
  std::size_t epoch = 0;  // 1-based within the stage
  double ce = 0.0;
  double rank = 0.0;
  double total = 0.0;
  double val_accuracy = 0.0;
  std::array<double, kQuantifierCount> lexicon{};
};

struct StageRecord {
  std::string filter;
  std::vector<std::size_t> tasks;  // suite indices trained on
  std::size_t selected_epoch = 0;
  std::string checkpoint_id;
  /// Mean unseen test accuracy on every stage's unseen tasks, in stage order,
  /// measured with this stage's selected checkpoint.
  std::vector<double> unseen_accuracy;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<StageRecord> stages;
};

struct TrainResult {
  ModelState model;
  TrainHistory history;
  std::vector<ModelState> stage_models;  // selected checkpoint of each stage
};

/// Trains on the suite's seen tasks. Each batch is batch_size training
/// examples from one task, tasks visited in suite order with the cycle
/// continuing across epochs; grad_accumulation batches are averaged per
/// optimizer step (a partial group is flushed at the end of an epoch).
/// Returns the epoch with the best mean seen-validation accuracy, first on ties.
TrainResult train_multitask(const TaskSuite& suite, const TrainConfig& config, const ModelState& model_init);

/// Same loop restricted to the given suite indices.
TrainResult train_on_tasks(const TaskSuite& suite, std::span<const std::size_t> tasks, const TrainConfig& config,
                           const ModelState& model_init, std::size_t stage = 0);

struct StageFilter {
  std::optional<ClassCount> classes;
  std::vector<NegationKind> negations;  // empty: any
  std::optional<Structure> structure;

  bool matches(const ComplexityDescriptor& d) const;
  std::string describe() const;
};

struct Curriculum {
  std::string name;
  std::vector<StageFilter> stages;
};

/// "classes", "negations" or "conjunctions"; throws DataError otherwise.
Curriculum build_curriculum(std::string_view name);

/// Runs train_on_tasks per stage over the seen tasks matching the stage,
/// each stage starting from the previous stage's selected checkpoint. With
/// freeze_quantifiers the lexicon is replaced by pretrained_lexicon (or the
/// initial lexicon when absent) and never updated.
TrainResult train_curriculum(const TaskSuite& suite, const Curriculum& curriculum, const TrainConfig& config,
                             bool freeze_quantifiers, const std::optional<QuantifierLexicon>& pretrained_lexicon,
                             const std::optional<ModelState>& model_init = std::nullopt);

// ---------------------------------------------------------------------------
// Accuracy

struct SplitAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t ties = 0;

  double accuracy() const noexcept { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

SplitAccuracy split_accuracy(const PreparedTask& task, Split split, const ModelState& model);

/// Mean per-task test accuracy over the given tasks.
double mean_test_accuracy(const TaskSuite& suite, std::span<const std::size_t> tasks, const ModelState& model,
                          const ScorerConfig& scorer);

// ---------------------------------------------------------------------------
// Gradient sweep

struct GradientCase {
  std::string description;  // e.g. "attention lambda=10 frozen seed=7"
  FiniteDifferenceReport report;
};

/// Finite-difference checks over `count` configurations cycling through
/// {mean, attention} x {lambda 0, 10} x {unfrozen, frozen}. Each uses a
/// random lexicon and attention net and a batch drawn from the suite's seen
/// training examples.
std::vector<GradientCase> gradient_sweep(const TaskSuite& suite, std::size_t count, std::uint64_t seed,
                                         const ScorerConfig& scorer, double tolerance = 1e-4);

}  // namespace quantlearn
