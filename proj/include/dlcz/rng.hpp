#pragma once

#include <cstdint>
#include <limits>

namespace dlcz {

/// SplitMix64 generator. Satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Independent substream for (seed, stream_index). The mapping is part of the
/// reproducibility contract of event logs: changing it changes every log.
SplitMix64 substream(std::uint64_t seed, std::uint64_t stream_index);

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(SplitMix64& rng);

bool bernoulli(SplitMix64& rng, double p);

/// Poisson variate by sequential inversion (intended for small means).
int poisson(SplitMix64& rng, double mean);

/// Bose-Einstein (single-mode thermal) variate with the given mean.
int thermal(SplitMix64& rng, double mean);

}  // namespace dlcz
