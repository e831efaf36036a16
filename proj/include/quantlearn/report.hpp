#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quantlearn/entailment.hpp"
#include "quantlearn/model.hpp"
#include "quantlearn/quantifier.hpp"
#include "quantlearn/taskgen.hpp"

namespace quantlearn {

/// Equality relations count as satisfied within this distance: half the
/// smallest gap between distinct reference strengths.
inline constexpr double kEqualityTolerance = 0.025;

struct TaskAccuracy {
  std::size_t task = 0;  // suite index
  std::string name;
  std::string complexity;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t ties = 0;
  double accuracy = 0.0;
  std::optional<double> exent_accuracy;
  std::optional<double> majority_accuracy;

  std::optional<double> delta_exent() const;
  std::optional<double> delta_majority() const;
};

struct ComplexityAccuracy {
  std::string complexity;
  std::size_t tasks = 0;
  double mean_accuracy = 0.0;
  std::optional<double> mean_delta_exent;
  std::optional<double> mean_delta_majority;
};

struct EvalReport {
  std::string model;  // "lasque", "exent" or "majority"
  std::vector<TaskAccuracy> tasks;
  std::vector<ComplexityAccuracy> per_complexity;  // in canonical descriptor order
  std::size_t ties = 0;
  std::uint64_t suite_seed = 0;
  std::uint64_t split_seed = 0;

  double mean_accuracy() const;
};

/// Accuracy on every unseen task's test split (train and validation splits are
/// never read). Ties go to the lowest label index and are counted.
EvalReport evaluate_zero_shot(const ModelState& model, const TaskSuite& suite, const ScorerConfig& scorer);

/// "exent": p = 1 everywhere with mean aggregation. "majority": each task's most
/// frequent training label (lowest index on ties). Throws DataError otherwise.
EvalReport run_baseline(std::string_view name, const TaskSuite& suite, const ScorerConfig& scorer);

ModelState exent_model();

/// Fills the baseline columns of report from the two baseline reports and
/// recomputes the per-complexity means.
void attach_baselines(EvalReport& report, const EvalReport* exent, const EvalReport* majority);

void write_eval_csv(std::ostream& out, const EvalReport& report);
void write_complexity_csv(std::ostream& out, const EvalReport& report);
/// Inverse of write_eval_csv; per-complexity rows are recomputed.
EvalReport read_eval_csv(std::istream& in);

struct WeightSummary {
  std::size_t count = 0;
  double mean = 0.0;
};

struct LengthBucket {
  std::size_t min_tokens = 0;  // inclusive
  std::size_t max_tokens = 0;  // inclusive
  WeightSummary weight;
};

struct AttentionReport {
  std::vector<LengthBucket> buckets;  // width 4, only nonempty buckets
  WeightSummary quantified;
  WeightSummary unquantified;
  std::array<WeightSummary, kQuantifierCount> per_quantifier{};
};

/// Attention weight of every (unseen test example, explanation) pair, bucketed
/// by explanation token count. Throws DataError without attention.
AttentionReport attention_report(const ModelState& model, const TaskSuite& suite, const ScorerConfig& scorer);

/// Rows: kind (bucket | quantified | unquantified | quantifier), key, min, max, count, mean.
void write_attention_csv(std::ostream& out, const AttentionReport& report);
AttentionReport read_attention_csv(std::istream& in);

struct QuantifierRow {
  std::string word;
  double learned = 0.0;
  double truth = 0.0;
  double abs_error = 0.0;
};

struct RecoveryReport {
  std::vector<QuantifierRow> rows;  // lexicon order
  double spearman = 0.0;
  double relations_satisfied = 0.0;         // all 105, equal within kEqualityTolerance
  double strict_relations_satisfied = 0.0;  // strictly-greater ones only
};

RecoveryReport quantifier_recovery_report(const QuantifierLexicon& learned, const QuantifierLexicon& truth);

/// Spearman correlation with average ranks for ties; NaN when either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);
std::vector<double> average_ranks(std::span<const double> values);

/// Rows per quantifier followed by summary rows (word = "#spearman", ...).
void write_recovery_csv(std::ostream& out, const RecoveryReport& report);
RecoveryReport read_recovery_csv(std::istream& in);

/// Comma-separated fields; doubles with 17 significant digits.
std::string format_double(double v);
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace quantlearn
