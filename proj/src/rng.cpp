#include "dlcz/rng.hpp"

#include <cmath>

namespace dlcz {

SplitMix64 substream(std::uint64_t seed, std::uint64_t stream_index) {
  SplitMix64 mixer(seed ^ 0x6a09e667f3bcc909ULL);
  const std::uint64_t a = mixer();
  SplitMix64 second(a ^ (stream_index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
  return SplitMix64(second());
}

double uniform01(SplitMix64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool bernoulli(SplitMix64& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform01(rng) < p;
}

int poisson(SplitMix64& rng, double mean) {
  if (mean <= 0.0) return 0;
  const double u = uniform01(rng);
  double pmf = std::exp(-mean);
  double cdf = pmf;
  int k = 0;
  // Bounded: the tail beyond mean + 40 sqrt(mean) + 40 is below 1e-300.
  const int limit = static_cast<int>(mean + 40.0 * std::sqrt(mean) + 40.0);
  while (u >= cdf && k < limit) {
    ++k;
    pmf *= mean / k;
    cdf += pmf;
  }
  return k;
}

int thermal(SplitMix64& rng, double mean) {
  if (mean <= 0.0) return 0;
  const double q = mean / (1.0 + mean);
  const double u = 1.0 - uniform01(rng);  // (0, 1]
  return static_cast<int>(std::floor(std::log(u) / std::log(q)));
}

}  // namespace dlcz
