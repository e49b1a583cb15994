#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "modinv/rng.hpp"

using modinv::derive_seed;
using modinv::Rng;

TEST_SUITE_BEGIN("rng");

TEST_CASE("identical seeds produce identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int differ = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() != b.next_u64()) ++differ;
  CHECK(differ > 60);
}

TEST_CASE("uniform stays in [0, 1) with a sane mean") {
  Rng rng(7);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("below is unbiased across small ranges") {
  Rng rng(3);
  std::vector<int> counts(5, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[rng.below(5)] += 1;
  for (int c : counts) CHECK(std::abs(c - n / 5) < 1200);  // ~9 sigma
}

TEST_CASE("normal has mean 0 and variance 1") {
  Rng rng(11);
  double sum = 0.0, sum2 = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum2 / n - 1.0) < 0.02);
}

TEST_CASE("shuffle is a permutation and seed-stable") {
  std::vector<int> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i;
  auto w = v;
  Rng r1(5), r2(5);
  r1.shuffle(v);
  r2.shuffle(w);
  CHECK(v == w);
  std::set<int> seen(v.begin(), v.end());
  CHECK(seen.size() == 100);
}

TEST_CASE("derive_seed separates tags and bases") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(1, 7) == derive_seed(1, 7));
}

TEST_SUITE_END();
