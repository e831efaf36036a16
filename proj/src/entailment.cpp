#include "quantlearn/entailment.hpp"

#include <algorithm>
#include <utility>

#include "quantlearn/error.hpp"
#include "quantlearn/random.hpp"

namespace quantlearn {

void ScorerConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon < 1.0 / 3.0)) throw DataError("scorer.epsilon must lie in [0, 1/3)");
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw DataError("scorer.noise_rate must lie in [0, 1)");
}

NliScores scores_for(Truth truth, double epsilon) {
  const double hi = 1.0 - epsilon;
  const double lo = epsilon / 2.0;
  switch (truth) {
    case Truth::True: return {hi, lo, lo};
    case Truth::False: return {lo, lo, hi};
    case Truth::Unknown: return {lo, hi, lo};
  }
  return {lo, hi, lo};
}

bool noise_swaps(const ScorerConfig& config, const PairKey& key) {
  if (config.noise_rate <= 0.0) return false;
  std::uint64_t h = splitmix64(config.noise_seed);
  h = splitmix64(h ^ key.task);
  h = splitmix64(h ^ ((static_cast<std::uint64_t>(key.split) << 32) | key.explanation));
  h = splitmix64(h ^ key.example);
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < config.noise_rate;
}

NliScores nli_scores(const Explanation& exp, const Attributes& example, const ScorerConfig& config, const PairKey& key) {
  NliScores s = scores_for(evaluate_condition(exp.condition, example), config.epsilon);
  if (noise_swaps(config, key)) std::swap(s.entail, s.contradict);
  return s;
}

PairFeatures pair_features(const ExplanationFeatures& explanation, const NliScores& scores) {
  PairFeatures f{};
  std::copy(explanation.begin(), explanation.end(), f.begin());
  f[kExplanationFeatureWidth] = scores.entail;
  f[kExplanationFeatureWidth + 1] = scores.neutral;
  f[kExplanationFeatureWidth + 2] = scores.contradict;
  return f;
}

PairFeatures pair_features(const Explanation& exp, const Attributes& example, const ScorerConfig& config,
                           const PairKey& key) {
  return pair_features(explanation_features(exp), nli_scores(exp, example, config, key));
}

}  // namespace quantlearn
