#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace pinit {

// Counter-based pseudo-random generator: a splitmix64 output function applied
// to a 64-bit Weyl sequence. The complete state is the pair (seed, counter),
// which makes streams trivially serializable and gives the same byte-exact
// sequence on every platform (uniform draws use only integer and IEEE-754
// double arithmetic).
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), counter_(0) {}
  Rng(uint64_t seed, uint64_t counter) : seed_(seed), counter_(counter) {}

  // Substream forking: the returned generator is a pure function of
  // (seed, index), independent of any generator's current state.
  static Rng substream(uint64_t seed, uint64_t index);

  uint64_t next_u64();

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double();

  // Uniform in [lo, hi). Throws ConfigError when lo >= hi.
  double uniform(double lo, double hi);

  // Gaussian via the Marsaglia polar method (the second variate of each
  // pair is discarded so the state stays a plain counter).
  double normal(double mean, double stddev);

  // Unbiased integer in [0, n) by rejection. n must be nonzero.
  uint64_t below(uint64_t n);

  uint64_t seed() const { return seed_; }
  uint64_t counter() const { return counter_; }

 private:
  uint64_t seed_;
  uint64_t counter_;
};

// Pure (seed, index) -> seed derivation used for substream forking. Exposed
// so callers can record the derived seed of a substream (e.g. per-sample
// generation seeds).
uint64_t derive_seed(uint64_t seed, uint64_t index);

// In-place Fisher-Yates shuffle driven by the given generator.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

}  // namespace pinit
