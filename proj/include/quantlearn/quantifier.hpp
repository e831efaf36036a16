#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace quantlearn {

inline constexpr std::size_t kQuantifierCount = 15;

/// Quantifier words in lexicon-definition order.
inline constexpr std::array<std::string_view, kQuantifierCount> kQuantifierWords = {
    "always",   "certainly", "definitely", "usually",   "normally",
    "generally", "likely",   "typically",  "often",     "sometimes",
    "frequently", "occasionally", "rarely", "seldom",   "never"};

/// Reference strengths of each quantifier, aligned with kQuantifierWords.
inline constexpr std::array<double, kQuantifierCount> kReferenceProbabilities = {
    0.95, 0.95, 0.95, 0.70, 0.70, 0.70, 0.70, 0.70, 0.50, 0.30, 0.30, 0.20, 0.10, 0.10, 0.05};

std::optional<std::size_t> quantifier_index(std::string_view word) noexcept;
bool is_quantifier(std::string_view word) noexcept;

double logistic(double x) noexcept;
double logit(double p);

/// Learnable quantifier strengths. Each word owns an unconstrained raw
/// parameter; its probability is logistic(raw), so any raw value is valid.
class QuantifierLexicon {
 public:
  QuantifierLexicon();  // all raws zero (p = 0.5)

  static QuantifierLexicon predefined();
  /// Raws drawn i.i.d. uniform on [-2, 2].
  static QuantifierLexicon random(std::uint64_t seed);
  static QuantifierLexicon from_raws(std::span<const double> raws, bool frozen = false);

  double probability(std::string_view word) const;  // throws UnknownQuantifier
  double probability(std::size_t index) const;
  double raw(std::size_t index) const { return raws_.at(index); }
  void set_raw(std::size_t index, double value) { raws_.at(index) = value; }

  std::span<const double> raws() const noexcept { return raws_; }
  std::span<double> raws() noexcept { return raws_; }
  std::array<double, kQuantifierCount> probabilities() const;

  bool frozen() const noexcept { return frozen_; }
  void set_frozen(bool frozen) noexcept { frozen_ = frozen; }

  bool operator==(const QuantifierLexicon&) const = default;

 private:
  std::array<double, kQuantifierCount> raws_{};
  bool frozen_ = false;
};

enum class OrdinalKind { strictly_greater, equal };

struct OrdinalRelation {
  std::string stronger;
  std::string weaker;  // weaker-or-equal
  OrdinalKind kind = OrdinalKind::strictly_greater;

  bool operator==(const OrdinalRelation&) const = default;
};

/// One relation per unordered pair of quantifiers (105 total), derived from
/// the reference strengths; equal strengths give equality relations.
std::vector<OrdinalRelation> reference_relations();

struct RankingLoss {
  double value = 0.0;
  std::array<double, kQuantifierCount> gradient{};  // d value / d raw
};

/// softplus(p_weaker - p_stronger) per strictly-greater pair plus
/// (p_i - p_j)^2 per equal pair. Gradient is zero when the lexicon is frozen.
RankingLoss ranking_loss(const QuantifierLexicon& lexicon, std::span<const OrdinalRelation> relations);

/// Fraction of relations the lexicon satisfies. Equality relations count as
/// satisfied when the two probabilities differ by at most equal_tolerance.
double relations_satisfied(const QuantifierLexicon& lexicon, std::span<const OrdinalRelation> relations,
                           double equal_tolerance, bool strict_only = false);

double softplus(double x) noexcept;

}  // namespace quantlearn
