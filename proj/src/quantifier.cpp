#include "quantlearn/quantifier.hpp"

#include <algorithm>
#include <cmath>

#include "quantlearn/error.hpp"
#include "quantlearn/random.hpp"

namespace quantlearn {

namespace {

// logistic(30) = 1 - 9.4e-14, still strictly below 1 in double precision.
constexpr double kRawCap = 30.0;

std::size_t require_index(std::string_view word) {
  auto idx = quantifier_index(word);
  if (!idx) throw UnknownQuantifier(std::string(word));
  return *idx;
}

}  // namespace

std::optional<std::size_t> quantifier_index(std::string_view word) noexcept {
  for (std::size_t i = 0; i < kQuantifierCount; ++i)
    if (kQuantifierWords[i] == word) return i;
  return std::nullopt;
}

bool is_quantifier(std::string_view word) noexcept { return quantifier_index(word).has_value(); }

double logistic(double x) noexcept {
  x = std::clamp(x, -kRawCap, kRawCap);
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double softplus(double x) noexcept {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

QuantifierLexicon::QuantifierLexicon() = default;

QuantifierLexicon QuantifierLexicon::predefined() {
  QuantifierLexicon lex;
  for (std::size_t i = 0; i < kQuantifierCount; ++i) lex.raws_[i] = logit(kReferenceProbabilities[i]);
  return lex;
}

QuantifierLexicon QuantifierLexicon::random(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x1e71c0));
  QuantifierLexicon lex;
  for (auto& r : lex.raws_) r = uniform_real(rng, -2.0, 2.0);
  return lex;
}

QuantifierLexicon QuantifierLexicon::from_raws(std::span<const double> raws, bool frozen) {
  if (raws.size() != kQuantifierCount) throw DataError("lexicon needs exactly 15 raw parameters");
  QuantifierLexicon lex;
  std::copy(raws.begin(), raws.end(), lex.raws_.begin());
  lex.frozen_ = frozen;
  return lex;
}

double QuantifierLexicon::probability(std::string_view word) const { return logistic(raws_[require_index(word)]); }

double QuantifierLexicon::probability(std::size_t index) const { return logistic(raws_.at(index)); }

std::array<double, kQuantifierCount> QuantifierLexicon::probabilities() const {
  std::array<double, kQuantifierCount> out{};
  for (std::size_t i = 0; i < kQuantifierCount; ++i) out[i] = logistic(raws_[i]);
  return out;
}

std::vector<OrdinalRelation> reference_relations() {
  std::vector<OrdinalRelation> out;
  out.reserve(kQuantifierCount * (kQuantifierCount - 1) / 2);
  for (std::size_t i = 0; i < kQuantifierCount; ++i) {
    for (std::size_t j = i + 1; j < kQuantifierCount; ++j) {
      const double pi = kReferenceProbabilities[i];
      const double pj = kReferenceProbabilities[j];
      OrdinalRelation rel;
      if (pi == pj) {
        rel = {std::string(kQuantifierWords[i]), std::string(kQuantifierWords[j]), OrdinalKind::equal};
      } else if (pi > pj) {
        rel = {std::string(kQuantifierWords[i]), std::string(kQuantifierWords[j]), OrdinalKind::strictly_greater};
      } else {
        rel = {std::string(kQuantifierWords[j]), std::string(kQuantifierWords[i]), OrdinalKind::strictly_greater};
      }
      out.push_back(std::move(rel));
    }
  }
  return out;
}

RankingLoss ranking_loss(const QuantifierLexicon& lexicon, std::span<const OrdinalRelation> relations) {
  RankingLoss out;
  const auto p = lexicon.probabilities();
  std::array<double, kQuantifierCount> dp{};  // d loss / d probability
  for (const auto& rel : relations) {
    const std::size_t s = require_index(rel.stronger);
    const std::size_t w = require_index(rel.weaker);
    if (rel.kind == OrdinalKind::strictly_greater) {
      const double margin = p[w] - p[s];
      out.value += softplus(margin);
      const double g = logistic(margin);
      dp[w] += g;
      dp[s] -= g;
    } else {
      const double d = p[s] - p[w];
      out.value += d * d;
      dp[s] += 2.0 * d;
      dp[w] -= 2.0 * d;
    }
  }
  if (!lexicon.frozen()) {
    for (std::size_t i = 0; i < kQuantifierCount; ++i) out.gradient[i] = dp[i] * p[i] * (1.0 - p[i]);
  }
  return out;
}

double relations_satisfied(const QuantifierLexicon& lexicon, std::span<const OrdinalRelation> relations,
                           double equal_tolerance, bool strict_only) {
  std::size_t total = 0;
  std::size_t held = 0;
  for (const auto& rel : relations) {
    const double ps = lexicon.probability(rel.stronger);
    const double pw = lexicon.probability(rel.weaker);
    if (rel.kind == OrdinalKind::strictly_greater) {
      ++total;
      if (ps > pw) ++held;
    } else if (!strict_only) {
      ++total;
      if (std::abs(ps - pw) <= equal_tolerance) ++held;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(held) / static_cast<double>(total);
}

}  // namespace quantlearn
