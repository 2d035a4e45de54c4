// Seed derivation and the few distributions the simulator needs.
#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace jefp {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream seed for (base, tag...). Order of tags matters.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = splitmix64(base);
  for (auto t : tags) s = splitmix64(s ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  return Rng(derive_seed(base, tags));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

// Circularly-symmetric complex Gaussian with E|n|^2 = variance.
inline std::complex<double> complex_gaussian(Rng& rng, double variance) {
  const double s = std::sqrt(variance / 2.0);
  const double re = gaussian(rng);
  const double im = gaussian(rng);
  return {s * re, s * im};
}

// Stream tags used across the pipeline so that noise draws of different
// stages never alias.
enum StreamTag : std::uint64_t {
  kTagCluster = 1,
  kTagPhaseDl = 2,
  kTagPhaseUl = 3,
  kTagPilotNoise = 10,
  kTagUplinkNoise = 11,
  kTagMask = 12,
  kTagSnr = 13,
  kTagInit = 20,
  kTagShuffle = 21,
  kTagBatch = 22,
  kTagEval = 30,
};

}  // namespace jefp
