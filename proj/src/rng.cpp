#include "pinit/rng.hpp"

#include <cmath>
#include <string>

#include "pinit/errors.hpp"

namespace pinit {

namespace {

constexpr uint64_t kWeylIncrement = 0x9E3779B97F4A7C15ull;
constexpr uint64_t kStreamSalt = 0xD1B54A32D192ED03ull;

// splitmix64 finalizer (Steele, Lea, Flood 2014).
uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

uint64_t derive_seed(uint64_t seed, uint64_t index) {
  return mix64(mix64(seed + kWeylIncrement) ^ (kStreamSalt * (index + 1)));
}

Rng Rng::substream(uint64_t seed, uint64_t index) {
  return Rng(derive_seed(seed, index));
}

uint64_t Rng::next_u64() {
  counter_ += 1;
  return mix64(seed_ + counter_ * kWeylIncrement);
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  if (!(lo < hi)) {
    throw ConfigError("uniform: empty range [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + ")");
  }
  double v = lo + next_double() * (hi - lo);
  // lo + u*(hi-lo) can round up to hi when u is just below 1.
  if (v >= hi) {
    v = std::nextafter(hi, lo);
  }
  return v;
}

double Rng::normal(double mean, double stddev) {
  double u, v, s;
  do {
    u = 2.0 * next_double() - 1.0;
    v = 2.0 * next_double() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return mean + stddev * u * std::sqrt(-2.0 * std::log(s) / s);
}

uint64_t Rng::below(uint64_t n) {
  if (n == 0) {
    throw ConfigError("below: n must be nonzero");
  }
  const uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    uint64_t x = next_u64();
    if (x >= threshold) {
      return x % n;
    }
  }
}

}  // namespace pinit
