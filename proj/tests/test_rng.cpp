/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "catch_amalgamated.hpp"
#include "ptshadow/gates.hpp"
#include "ptshadow/rng.hpp"

using namespace ptshadow;

TEST_CASE("determinism") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("split streams are reproducible and distinct") {
  Rng parent1(7), parent2(7);
  Rng c1 = parent1.split(3), c2 = parent2.split(3), c3 = parent2.split(4);
  CHECK(c1.next_u64() == c2.next_u64());
  Rng c1b = parent1.split(4);
  CHECK(c1b.next_u64() == c3.next_u64());
  Rng d1 = Rng(7).split(0), d2 = Rng(7).split(1);
  CHECK(d1.next_u64() != d2.next_u64());
}

TEST_CASE("uniform range") {
  Rng rng(1);
  double mean = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = rng.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    mean += x;
  }
  mean /= 10000;
  CHECK(std::abs(mean - 0.5) < 0.02);
}

TEST_CASE("gaussian moments") {
  Rng rng(2);
  double m1 = 0.0, m2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.gaussian();
    m1 += x;
    m2 += x * x;
  }
  m1 /= n;
  m2 /= n;
  CHECK(std::abs(m1) < 0.03);
  CHECK(std::abs(m2 - 1.0) < 0.05);
}

TEST_CASE("discrete sampling matches weights") {
  Rng rng(3);
  const std::vector<double> w{0.1, 0.6, 0.3};
  std::vector<int> counts(3, 0);
  const int n = 30000;
  for (int i = 0; i < n; ++i) counts[rng.sample_discrete(w)]++;
  for (int k = 0; k < 3; ++k)
    CHECK(std::abs(static_cast<double>(counts[k]) / n - w[k]) < 0.02);
}

TEST_CASE("haar unitary") {
  Rng rng(4);
  for (int t = 0; t < 5; ++t) {
    const Matrix u = rng.haar_unitary(4);
    CHECK(gates::is_unitary(u, 1e-10));
  }
}
