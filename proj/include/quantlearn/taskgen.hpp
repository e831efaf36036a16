#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quantlearn/explanation.hpp"
#include "quantlearn/quantifier.hpp"

namespace quantlearn {

struct Domain {
  enum class Kind { integer, categorical };

  Kind kind = Kind::integer;
  std::int64_t min = 0;
  std::int64_t max = 4;
  std::vector<std::string> values;  // categorical only

  std::size_t size() const noexcept;
  Value at(std::size_t i) const;
  bool contains(const Value& v) const;

  bool operator==(const Domain&) const = default;
};

struct AttributeSpec {
  std::string name;
  Domain domain;

  bool operator==(const AttributeSpec&) const = default;
};

struct Example {
  Attributes attributes;
  std::string label;

  bool operator==(const Example&) const = default;
};

struct ExampleCounts {
  std::size_t train = 200;
  std::size_t validation = 50;
  std::size_t test = 100;
};

enum class Split { train = 0, validation = 1, test = 2 };

struct Task {
  std::string name;
  std::vector<AttributeSpec> schema;
  std::vector<std::string> labels;
  std::vector<Explanation> explanations;
  std::vector<Example> train;
  std::vector<Example> validation;
  std::vector<Example> test;
  ComplexityDescriptor complexity;
  std::uint64_t generator_seed = 0;
  /// Generating probability of every quantifier the task's explanations use.
  std::map<std::string, double> truth;

  const std::vector<Example>& split(Split s) const;
  std::size_t label_index(std::string_view label) const;  // throws DataError
};

bool same_task(const Task& a, const Task& b);

struct TaskSuite {
  std::vector<Task> tasks;
  std::vector<std::size_t> seen;
  std::vector<std::size_t> unseen;

  // Generation record, persisted in the manifest.
  std::uint64_t seed = 0;
  std::size_t per_complexity = 0;
  ExampleCounts counts;
  double unseen_fraction = 0.0;
  std::uint64_t split_seed = 0;
};

struct TaskOptions {
  std::size_t multiclass_labels = 3;       // 3..5
  std::optional<std::string> quantifier;   // first rule's quantifier when quantified
};

/// Generates one task. A pure function of its arguments.
///
/// Label semantics: the rule whose condition holds decides the label. A rule
/// that asserts l gives l with probability p and a uniformly drawn other label
/// otherwise; a rule that asserts "not l" gives a uniformly drawn label other
/// than l with probability p and l otherwise. Unquantified rules use p = 1.
/// Binary tasks carry one rule; examples where it does not hold follow the
/// complement rule (opposite assertion, same quantifier). Multiclass rules
/// are mutually exclusive and examples are drawn from their union.
Task generate_task(const ComplexityDescriptor& complexity, std::uint64_t seed, const ExampleCounts& counts,
                   const QuantifierLexicon& truth, const TaskOptions& options = {});

struct SuiteOptions {
  std::vector<ComplexityDescriptor> complexities = all_complexities();
  std::size_t multiclass_labels = 3;
};

/// per_complexity tasks for each descriptor. Quantified tasks cycle through
/// the quantifier list so every word is represented.
TaskSuite generate_suite(std::size_t per_complexity, std::uint64_t seed, const ExampleCounts& counts,
                         const QuantifierLexicon& truth, const SuiteOptions& options = {});

/// Stratified by descriptor: each stratum of n tasks contributes
/// ceil(fraction * n) unseen tasks, capped at n - 1.
TaskSuite split_seen_unseen(TaskSuite suite, double unseen_fraction, std::uint64_t seed);

/// Features-as-text: "attr1 is v1. attr2 is v2."
std::string fat_render(const Attributes& attributes);
inline std::string fat_render(const Example& example) { return fat_render(example.attributes); }

/// Index of the single rule whose condition holds, if any.
std::optional<std::size_t> firing_rule(const Task& task, const Attributes& attributes);

/// True when no assignment over the attributes the rules mention makes two
/// rules hold at once (exhaustive enumeration).
bool rules_mutually_exclusive(const Task& task);

/// Fraction of the joint domain of the mentioned attributes where the
/// condition holds.
double firing_fraction(const ConditionNode& condition, const std::vector<AttributeSpec>& schema);

}  // namespace quantlearn
