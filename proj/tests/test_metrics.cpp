/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "catch_amalgamated.hpp"
#include "ptshadow/gates.hpp"
#include "ptshadow/metrics.hpp"
#include "ptshadow/rng.hpp"

using namespace ptshadow;

namespace {

Matrix random_density(Rng& rng, Index d) {
  Matrix g(d, d);
  for (Index r = 0; r < d; ++r)
    for (Index c = 0; c < d; ++c) g(r, c) = Complex(rng.gaussian(), rng.gaussian());
  Matrix rho = g * g.adjoint();
  return rho / rho.trace();
}

Matrix bell_state() {
  Vector phi(4);
  phi << 1, 0, 0, 1;
  phi /= std::sqrt(2.0);
  return phi * phi.adjoint();
}

}  // namespace

TEST_CASE("trace distance") {
  Rng rng(1);
  const Matrix rho = random_density(rng, 2);
  CHECK(trace_distance(rho, rho) < 1e-12);

  const Matrix p0 = gates::projector(gates::ket0());
  const Matrix p1 = gates::projector(gates::ket1());
  CHECK(std::abs(trace_distance(p0, p1) - 1.0) < 1e-12);

  CHECK_THROWS_AS(trace_distance(2.0 * p0, p1), std::invalid_argument);
}

TEST_CASE("purity") {
  const Matrix p0 = gates::projector(gates::ket0());
  CHECK(std::abs(purity(p0) - 1.0) < 1e-12);
  CHECK(std::abs(purity(identity(2) / 2.0) - 0.5) < 1e-12);

  SECTION("unitary invariance") {
    Rng rng(2);
    for (int t = 0; t < 10; ++t) {
      const Matrix rho = random_density(rng, 4);
      const Matrix u = rng.haar_unitary(4);
      CHECK(std::abs(purity(u * rho * u.adjoint()) - purity(rho)) < 1e-10);
    }
  }
}

TEST_CASE("hellinger fidelity") {
  const std::vector<double> p{0.5, 0.25, 0.25};
  CHECK(std::abs(hellinger_fidelity(p, p) - 1.0) < 1e-12);

  const std::vector<double> q{0.25, 0.5, 0.25};
  const double expect = std::pow(
      std::sqrt(0.5 * 0.25) + std::sqrt(0.25 * 0.5) + std::sqrt(0.25 * 0.25), 2);
  CHECK(std::abs(hellinger_fidelity(p, q) - expect) < 1e-12);

  CHECK_THROWS_AS(hellinger_fidelity({0.5, 0.4}, {0.5, 0.5}),
                  std::invalid_argument);
}

TEST_CASE("negativity") {
  const LegShape ab({2, 2}, {"a", "b"});
  CHECK(std::abs(negativity(bell_state(), ab, {"b"}) - 0.5) < 1e-12);

  SECTION("zero on product states") {
    Rng rng(3);
    for (int t = 0; t < 10; ++t) {
      const Matrix rho = kron(random_density(rng, 2), random_density(rng, 2));
      CHECK(negativity(rho, ab, {"b"}) < 1e-8);
    }
  }
}

TEST_CASE("entropy and qmi") {
  CHECK(std::abs(von_neumann_entropy(identity(2) / 2.0) - 1.0) < 1e-12);
  CHECK(von_neumann_entropy(gates::projector(gates::ket0())) < 1e-12);

  const LegShape ab({2, 2}, {"a", "b"});
  CHECK(std::abs(qmi(bell_state(), ab, {"a"}) - 2.0) < 1e-10);

  SECTION("zero on product states") {
    Rng rng(4);
    for (int t = 0; t < 10; ++t) {
      const Matrix rho = kron(random_density(rng, 2), random_density(rng, 2));
      CHECK(std::abs(qmi(rho, ab, {"a"})) < 1e-8);
    }
  }
}

TEST_CASE("uhlmann fidelity") {
  const Matrix p0 = gates::projector(gates::ket0());
  const Matrix pp = gates::projector(gates::ket_plus());
  CHECK(std::abs(uhlmann_fidelity(p0, p0) - 1.0) < 1e-10);
  CHECK(std::abs(uhlmann_fidelity(p0, pp) - 0.5) < 1e-10);
  CHECK(uhlmann_fidelity(p0, gates::projector(gates::ket1())) < 1e-10);
}
