#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "quantlearn/explanation.hpp"

namespace quantlearn {

/// Entailment / neutral / contradiction scores on the probability simplex.
struct NliScores {
  double entail = 0.0;
  double neutral = 0.0;
  double contradict = 0.0;

  bool operator==(const NliScores&) const = default;
};

struct ScorerConfig {
  double epsilon = 0.0;     // mass smeared off the indicated vertex, in [0, 1/3)
  double noise_rate = 0.0;  // chance of swapping entail and contradict, in [0, 1)
  std::uint64_t noise_seed = 0;

  void validate() const;  // throws DataError
  bool operator==(const ScorerConfig&) const = default;
};

/// Identifies one (task, explanation, example) pair for the noise decision.
struct PairKey {
  std::uint64_t task = 0;
  std::uint32_t split = 0;
  std::uint32_t explanation = 0;
  std::uint64_t example = 0;
};

/// Deterministic stand-in for an NLI model: scores the explanation's
/// condition (not its quantifier or label) against the example.
NliScores nli_scores(const Explanation& exp, const Attributes& example, const ScorerConfig& config,
                     const PairKey& key = {});

NliScores scores_for(Truth truth, double epsilon);
bool noise_swaps(const ScorerConfig& config, const PairKey& key);

inline constexpr std::size_t kPairFeatureWidth = kExplanationFeatureWidth + 3;
using PairFeatures = std::array<double, kPairFeatureWidth>;

PairFeatures pair_features(const ExplanationFeatures& explanation, const NliScores& scores);
PairFeatures pair_features(const Explanation& exp, const Attributes& example, const ScorerConfig& config,
                           const PairKey& key = {});

}  // namespace quantlearn
