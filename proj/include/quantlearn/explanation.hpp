#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace quantlearn {

/// Attribute value: integer, real, or categorical word.
using Value = std::variant<std::int64_t, double, std::string>;

std::string render_value(const Value& v);
bool is_numeric(const Value& v) noexcept;

/// Attribute-value pairs in schema order.
class Attributes {
 public:
  Attributes() = default;
  Attributes(std::initializer_list<std::pair<std::string, Value>> init) : items_(init) {}

  void set(std::string name, Value value);
  const Value* find(std::string_view name) const noexcept;
  const std::vector<std::pair<std::string, Value>>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }

  bool operator==(const Attributes&) const = default;

 private:
  std::vector<std::pair<std::string, Value>> items_;
};

enum class CompareOp { equal, not_equal, greater, less, greater_equal, less_equal };

bool is_ordering(CompareOp op) noexcept;

struct Comparison {
  std::string attribute;
  CompareOp op = CompareOp::equal;
  Value value;

  bool operator==(const Comparison&) const = default;
};

struct ConditionNode {
  enum class Kind { leaf, negation, conjunction, disjunction };

  Kind kind = Kind::leaf;
  Comparison comparison;               // leaf only
  std::vector<ConditionNode> children;  // one for negation, >= 2 for junctions

  static ConditionNode leaf(Comparison c);
  static ConditionNode negate(ConditionNode child);
  static ConditionNode all_of(std::vector<ConditionNode> children);
  static ConditionNode any_of(std::vector<ConditionNode> children);

  bool is_junction() const noexcept { return kind == Kind::conjunction || kind == Kind::disjunction; }
  bool operator==(const ConditionNode& other) const;
};

struct Explanation {
  ConditionNode condition;
  std::optional<std::string> quantifier;
  std::string label;
  bool label_negated = false;
  std::string source_text;

  /// Structural equality; source_text is ignored.
  bool same_structure(const Explanation& other) const;
};

enum class Truth { False, True, Unknown };

std::string_view to_string(Truth t) noexcept;

enum class ClassCount { binary, multiclass };
enum class NegationKind { none, clause, label, both };
enum class Structure { simple, single_junction, nested };

struct ComplexityDescriptor {
  ClassCount classes = ClassCount::binary;
  NegationKind negation = NegationKind::none;
  Structure structure = Structure::simple;
  bool quantified = false;

  bool operator==(const ComplexityDescriptor&) const = default;
  auto operator<=>(const ComplexityDescriptor&) const = default;
};

/// All 48 descriptors; classes varies slowest, quantified fastest.
std::vector<ComplexityDescriptor> all_complexities();
std::string to_string(const ComplexityDescriptor& d);
/// Inverse of to_string, e.g. "binary/none/simple/quantified".
ComplexityDescriptor parse_complexity(std::string_view text);
std::string_view to_string(ClassCount c) noexcept;
std::string_view to_string(NegationKind n) noexcept;
std::string_view to_string(Structure s) noexcept;

/// Grammar:
///   EXPL := "If " COND ", then " [QUANT " "] ["not "] LABEL
///   COND := TERM {(" and " | " or ") TERM}   (one junction kind per level)
///   TERM := ["not "] (LEAF | "(" COND ")")
///   LEAF := ATTR OP VALUE
/// OP is "equal to", "not equal to", "greater than", "less than",
/// "greater than or equal to" or "less than or equal to".
Explanation parse_explanation(std::string_view text, const std::set<std::string>& known_labels);
std::string render_explanation(const Explanation& exp);
std::string render_condition(const ConditionNode& node);

/// Words the grammar reserves; never valid as attribute names or values.
bool is_reserved_word(std::string_view word) noexcept;

/// Kleene three-valued evaluation. Missing attributes yield Unknown.
Truth evaluate_condition(const ConditionNode& node, const Attributes& example);

/// [tokens/32, depth/4, clause negation, label negation, has conjunction,
///  has disjunction, one-hot quantifier (15, all zero when unquantified)]
inline constexpr std::size_t kExplanationFeatureWidth = 21;
using ExplanationFeatures = std::array<double, kExplanationFeatureWidth>;

ExplanationFeatures explanation_features(const Explanation& exp);

std::size_t token_count(const Explanation& exp);
std::size_t tree_depth(const ConditionNode& node);
std::size_t leaf_count(const ConditionNode& node);
std::size_t junction_count(const ConditionNode& node);
/// Negation nodes and not-equal comparisons both count as clause negation.
bool has_clause_negation(const ConditionNode& node);
bool contains_kind(const ConditionNode& node, ConditionNode::Kind kind);
/// Attribute names mentioned in the tree, in first-mention order.
std::vector<std::string> mentioned_attributes(const ConditionNode& node);

ComplexityDescriptor complexity_of(const Explanation& exp, std::size_t n_labels);

}  // namespace quantlearn
