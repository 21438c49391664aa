/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "catch_amalgamated.hpp"
#include "ptshadow/channels.hpp"
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

}  // namespace

TEST_CASE("choi_from_unitary basics") {
  SECTION("identity gives the unnormalized Bell projector") {
    const ChoiOperator c = choi_from_unitary(identity(2));
    CHECK((c.matrix - unnormalized_bell(2)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(std::abs(c.matrix.trace() - Complex(2.0)) < 1e-12);
  }

  SECTION("X channel: rank 1, trace 2, flips |0>") {
    const ChoiOperator c = choi_from_unitary(gates::pauli('X'));
    auto es = herm_eig(c.matrix);
    Index rank = 0;
    for (Index i = 0; i < 4; ++i)
      if (es.eigenvalues()(i) > 1e-10) rank++;
    CHECK(rank == 1);
    CHECK(std::abs(c.matrix.trace() - Complex(2.0)) < 1e-12);
    const Matrix out = apply_choi(c, gates::projector(gates::ket0()));
    CHECK((out - gates::projector(gates::ket1())).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("non-unitary input rejected") {
    Matrix m(2, 2);
    m << 1, 1, 0, 1;
    CHECK_THROWS_AS(choi_from_unitary(m), std::invalid_argument);
  }
}

TEST_CASE("choi_from_kraus") {
  SECTION("fully depolarizing channel has maximally mixed Choi") {
    std::vector<Matrix> ks;
    for (char p : {'I', 'X', 'Y', 'Z'}) ks.push_back(gates::pauli(p) / 2.0);
    const ChoiOperator c = choi_from_kraus(ks);
    CHECK(c.trace_class == TraceClass::kCptp);
    CHECK((c.matrix - identity(4) / 2.0).cwiseAbs().maxCoeff() < 1e-12);
    Rng rng(1);
    const Matrix out = apply_choi(c, random_density(rng, 2));
    CHECK((out - identity(2) / 2.0).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("trace-decreasing Kraus set classified CPTNI") {
    std::vector<Matrix> ks{gates::pauli('I') * 0.5};
    const ChoiOperator c = choi_from_kraus(ks);
    CHECK(c.trace_class == TraceClass::kCptni);
    CHECK(tni_excess(c) < 1e-10);
  }

  SECTION("Kraus set exceeding identity rejected") {
    std::vector<Matrix> ks{gates::pauli('I'), gates::pauli('X')};
    CHECK_THROWS_AS(choi_from_kraus(ks), std::invalid_argument);
  }
}

TEST_CASE("apply_choi round trip against unitary conjugation") {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const Matrix u = rng.haar_unitary(2);
    const Matrix rho = random_density(rng, 2);
    const Matrix via_choi = apply_choi(choi_from_unitary(u), rho);
    CHECK((via_choi - u * rho * u.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("composition") {
  Rng rng(3);
  const Matrix u1 = rng.haar_unitary(2);
  const Matrix u2 = rng.haar_unitary(2);
  const ChoiOperator c1 = choi_from_unitary(u1);
  const ChoiOperator c2 = choi_from_unitary(u2);
  const ChoiOperator c21 = compose_choi(c2, c1);
  const Matrix rho = random_density(rng, 2);
  const Matrix seq = apply_choi(c2, apply_choi(c1, rho));
  CHECK((apply_choi(c21, rho) - seq).cwiseAbs().maxCoeff() < 1e-9);

  SECTION("PTM of composition is the PTM product") {
    const Ptm p1 = ptm_from_choi(c1);
    const Ptm p2 = ptm_from_choi(c2);
    const Ptm p21 = ptm_from_choi(c21);
    CHECK((p21.r - p2.r * p1.r).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("stinespring instruments") {
  const std::vector<Matrix> zmeas{gates::projector(gates::ket0()),
                                  gates::projector(gates::ket1())};

  SECTION("trivial interaction gives identity plus null map") {
    const Instrument inst = stinespring_instrument(
        identity(4), gates::projector(gates::ket0()), zmeas);
    CHECK((inst.elements[0].matrix - unnormalized_bell(2)).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK(inst.elements[1].matrix.cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("swap interaction replaces the state") {
    const Instrument inst = stinespring_instrument(
        gates::swap2(), gates::projector(gates::ket0()), zmeas);
    // outcome 0: system reset to |0>, weight <0|rho|0>
    const Matrix expect = kron(gates::projector(gates::ket0()),
                               gates::projector(gates::ket0()));
    CHECK((inst.elements[0].matrix - expect).cwiseAbs().maxCoeff() < 1e-12);
    Rng rng(4);
    const Matrix rho = random_density(rng, 2);
    const Matrix out0 = apply_choi(inst.elements[0], rho);
    CHECK(std::abs(out0.trace().real() - rho(0, 0).real()) < 1e-10);
  }

  SECTION("outcome probabilities are a distribution") {
    Rng rng(5);
    for (int t = 0; t < 10; ++t) {
      const Matrix u = rng.haar_unitary(4);
      const Instrument inst = stinespring_instrument(
          u, gates::projector(gates::ket_iplus()), zmeas);
      const Matrix rho = random_density(rng, 2);
      double total = 0.0;
      for (const auto& e : inst.elements) {
        const double p = apply_choi(e, rho).trace().real();
        CHECK(p > -1e-9);
        total += p;
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }

  SECTION("invalid POVM rejected") {
    CHECK_THROWS_AS(
        stinespring_instrument(identity(4), gates::projector(gates::ket0()),
                               {gates::projector(gates::ket0())}),
        std::invalid_argument);
  }
}

TEST_CASE("ptm and diagnostics") {
  SECTION("identity channel gives the identity PTM") {
    const Ptm p = ptm_from_choi(choi_from_unitary(identity(2)));
    CHECK((p.r - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("unitary channel diagnostics vanish") {
    Rng rng(6);
    const auto d = diagnostics(choi_from_unitary(rng.haar_unitary(2)));
    CHECK(d.unitality_defect < 1e-10);
    CHECK(d.trace_defect < 1e-10);
  }

  SECTION("amplitude damping is non-unital but trace preserving") {
    const double p = 0.4;
    Matrix k0(2, 2), k1(2, 2);
    k0 << 1, 0, 0, std::sqrt(1 - p);
    k1 << 0, std::sqrt(p), 0, 0;
    const auto d = diagnostics(choi_from_kraus({k0, k1}));
    CHECK(d.unitality_defect > 0.1);
    CHECK(d.trace_defect < 1e-10);
  }
}
