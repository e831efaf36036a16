#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace quantlearn {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent seeds and noise keys.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  return splitmix64(seed ^ splitmix64(salt + 0x632be59bd9b4e019ULL));
}

// The standard distributions are implementation-defined; these are not, so
// generated suites are byte-identical across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r = rng();
  while (r >= limit) r = rng();
  return static_cast<std::size_t>(r % bound);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(hi - lo + 1)));
}

template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace quantlearn
