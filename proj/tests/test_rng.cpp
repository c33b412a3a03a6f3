#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pinit/errors.hpp"
#include "pinit/rng.hpp"

using namespace pinit;

TEST_CASE("same seed gives the same sequence") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("different seeds diverge") {
  Rng a(1);
  Rng b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) {
    if (a.next_u64() == b.next_u64()) ++same;
  }
  CHECK(same == 0);
}

TEST_CASE("state is the (seed, counter) pair") {
  Rng a(9001);
  for (int i = 0; i < 7; ++i) a.next_u64();
  Rng resumed(a.seed(), a.counter());
  for (int i = 0; i < 50; ++i) {
    CHECK(a.next_u64() == resumed.next_u64());
  }
}

TEST_CASE("substream is a pure function of seed and index") {
  Rng direct = Rng::substream(123, 7);
  // Consuming draws elsewhere must not change what a fork produces.
  Rng noise = Rng::substream(123, 3);
  noise.next_u64();
  noise.next_u64();
  Rng again = Rng::substream(123, 7);
  for (int i = 0; i < 20; ++i) {
    CHECK(direct.next_u64() == again.next_u64());
  }
  CHECK(Rng::substream(123, 7).next_u64() == Rng(derive_seed(123, 7)).next_u64());
}

TEST_CASE("nearby substreams do not collide") {
  std::vector<uint64_t> firsts;
  for (uint64_t i = 0; i < 1000; ++i) {
    firsts.push_back(Rng::substream(5, i).next_u64());
  }
  std::sort(firsts.begin(), firsts.end());
  CHECK(std::adjacent_find(firsts.begin(), firsts.end()) == firsts.end());
}

TEST_CASE("next_double stays in [0, 1) and looks uniform") {
  Rng rng(7);
  const int n = 1000000;
  double sum = 0.0;
  double sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = rng.next_double();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    sum += v;
    sumsq += v * v;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean - 0.5) < 0.003);
  CHECK(std::fabs(var - 1.0 / 12.0) < 0.003);
}

TEST_CASE("uniform respects its half-open range") {
  Rng rng(11);
  for (int i = 0; i < 100000; ++i) {
    double v = rng.uniform(-2.5, 0.75);
    CHECK(v >= -2.5);
    CHECK(v < 0.75);
  }
}

TEST_CASE("uniform rejects an empty range") {
  Rng rng(1);
  CHECK_THROWS_AS(rng.uniform(1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(rng.uniform(2.0, -2.0), ConfigError);
}

TEST_CASE("normal matches its first two moments") {
  Rng rng(13);
  const int n = 1000000;
  double sum = 0.0;
  double sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = rng.normal(3.0, 2.0);
    sum += v;
    sumsq += v * v;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  // 3-sigma bands of the sample estimators.
  CHECK(std::fabs(mean - 3.0) < 3.0 * 2.0 / std::sqrt(double(n)));
  CHECK(std::fabs(var - 4.0) < 0.05);
}

TEST_CASE("below covers its range without bias artifacts") {
  Rng rng(17);
  const uint64_t n = 10;
  std::vector<int> counts(n, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    uint64_t v = rng.below(n);
    REQUIRE(v < n);
    counts[v]++;
  }
  for (uint64_t i = 0; i < n; ++i) {
    // Expected 10000 per bucket; 5-sigma band is about +-475.
    CHECK(counts[i] > 9500);
    CHECK(counts[i] < 10500);
  }
  CHECK_THROWS_AS(rng.below(0), ConfigError);
}

TEST_CASE("below(1) is always 0") {
  Rng rng(19);
  for (int i = 0; i < 100; ++i) {
    CHECK(rng.below(1) == 0);
  }
}

TEST_CASE("shuffle permutes deterministically") {
  std::vector<int> v1 = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> v2 = v1;
  std::vector<int> orig = v1;
  Rng a(23);
  Rng b(23);
  shuffle(v1, a);
  shuffle(v2, b);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == orig);
  // 10 elements, so an accidental identity permutation is a 1-in-3.6M event.
  CHECK(v1 != orig);
}

TEST_CASE("derive_seed separates indices") {
  CHECK(derive_seed(0, 0) != derive_seed(0, 1));
  CHECK(derive_seed(0, 0) != derive_seed(1, 0));
  CHECK(derive_seed(42, 5) == derive_seed(42, 5));
}
