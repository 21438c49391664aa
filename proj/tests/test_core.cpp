/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "catch_amalgamated.hpp"
#include "ptshadow/core.hpp"
#include "ptshadow/gates.hpp"
#include "ptshadow/rng.hpp"

using namespace ptshadow;

namespace {

Matrix bell_state() {
  Vector phi(4);
  phi << 1, 0, 0, 1;
  phi /= std::sqrt(2.0);
  return phi * phi.adjoint();
}

Matrix random_density(Rng& rng, Index d) {
  Matrix g(d, d);
  for (Index r = 0; r < d; ++r)
    for (Index c = 0; c < d; ++c) g(r, c) = Complex(rng.gaussian(), rng.gaussian());
  Matrix rho = g * g.adjoint();
  return rho / rho.trace();
}

}  // namespace

TEST_CASE("kron basics") {
  CHECK((kron(identity(2), identity(2)) - identity(4)).norm() == 0.0);

  Vector v00(4);
  v00 << 1, 0, 0, 0;
  Vector v10(4);
  v10 << 0, 0, 1, 0;
  CHECK((kron(gates::pauli('X'), identity(2)) * v00 - v10).norm() < 1e-14);

  Vector v01(4);
  v01 << 0, 1, 0, 0;
  CHECK((kron(gates::pauli('Z'), gates::pauli('Z')) * v01 + v01).norm() < 1e-14);
}

TEST_CASE("partial trace") {
  const LegShape ab({2, 2}, {"a", "b"});

  SECTION("Bell marginal is maximally mixed") {
    const Matrix m = partial_trace(bell_state(), ab, {"a"});
    CHECK((m - identity(2) / 2.0).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("trace over everything gives the scalar trace") {
    const Matrix m = partial_trace(bell_state(), ab, {});
    CHECK(m.rows() == 1);
    CHECK(std::abs(m(0, 0) - Complex(1.0)) < 1e-12);
  }

  SECTION("product states factorize") {
    Rng rng(7);
    const Matrix ra = random_density(rng, 2);
    const Matrix rb = random_density(rng, 2);
    const Matrix m = partial_trace(kron(ra, rb), ab, {"b"});
    CHECK((m - rb).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("unknown label errors") {
    CHECK_THROWS_AS(partial_trace(bell_state(), ab, {"zz"}),
                    std::invalid_argument);
  }

  SECTION("property: Tr_B[a kron b] = Tr[b] a") {
    Rng rng(11);
    for (int t = 0; t < 20; ++t) {
      Matrix a(2, 2), b(3, 3);
      for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) a(i, j) = Complex(rng.gaussian(), rng.gaussian());
      for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) b(i, j) = Complex(rng.gaussian(), rng.gaussian());
      const LegShape sh({2, 3}, {"a", "b"});
      const Matrix m = partial_trace(kron(a, b), sh, {"a"});
      CHECK((m - b.trace() * a).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("permute legs") {
  Rng rng(3);
  const Matrix ra = random_density(rng, 2);
  const Matrix rb = random_density(rng, 3);
  const Matrix rc = random_density(rng, 2);
  const LegShape abc({2, 3, 2}, {"a", "b", "c"});
  LegShape out;
  const Matrix p = permute_legs(kron(kron(ra, rb), rc), abc, {"c", "a", "b"}, &out);
  CHECK((p - kron(kron(rc, ra), rb)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(out.labels == std::vector<std::string>({"c", "a", "b"}));
  CHECK(out.dims == std::vector<Index>({2, 2, 3}));
}

TEST_CASE("partial transpose") {
  const LegShape ab({2, 2}, {"a", "b"});

  SECTION("involutive") {
    Rng rng(5);
    const Matrix rho = random_density(rng, 4);
    const Matrix once = partial_transpose(rho, ab, {"b"});
    const Matrix twice = partial_transpose(once, ab, {"b"});
    CHECK((twice - rho).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("product state transposes one factor") {
    Rng rng(9);
    const Matrix ra = random_density(rng, 2);
    const Matrix rb = random_density(rng, 2);
    const Matrix pt = partial_transpose(kron(ra, rb), ab, {"b"});
    CHECK((pt - kron(ra, rb.transpose())).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("Bell state PT has eigenvalue -1/2") {
    const Matrix pt = partial_transpose(bell_state(), ab, {"b"});
    auto es = herm_eig(pt);
    CHECK(std::abs(es.eigenvalues().minCoeff() + 0.5) < 1e-12);
  }

  SECTION("empty flip set is the identity operation") {
    const Matrix pt = partial_transpose(bell_state(), ab, {});
    CHECK((pt - bell_state()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("embed") {
  const LegShape full({2, 2, 2}, {"x", "y", "z"});
  const LegShape mid({2}, {"y"});
  const Matrix big = embed(gates::pauli('Z'), mid, full);
  const Matrix expect = kron(kron(identity(2), gates::pauli('Z')), identity(2));
  CHECK((big - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("pseudoinverse") {
  SECTION("invertible matrix gives the inverse") {
    Matrix m(2, 2);
    m << Complex(1, 0), Complex(0, 2), Complex(3, 0), Complex(1, 1);
    const Matrix pinv = pseudoinverse(m);
    CHECK((pinv - m.inverse()).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("zero matrix") {
    const Matrix z = Matrix::Zero(3, 2);
    CHECK(pseudoinverse(z).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("rank-1 projector is its own pseudoinverse") {
    Matrix p = Matrix::Zero(2, 2);
    p(0, 0) = 1.0;
    CHECK((pseudoinverse(p) - p).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("Moore-Penrose identities on rank-deficient input") {
    Rng rng(13);
    Matrix m(4, 3);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 3; ++j) m(i, j) = Complex(rng.gaussian(), rng.gaussian());
    m.col(2) = m.col(0) + m.col(1);  // force rank 2
    const Matrix p = pseudoinverse(m);
    CHECK((m * p * m - m).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((p * m * p - p).cwiseAbs().maxCoeff() < 1e-8);
  }

  SECTION("cutoff domain") {
    CHECK_THROWS_AS(pseudoinverse(identity(2), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(pseudoinverse(identity(2), 1.0), std::invalid_argument);
  }
}

TEST_CASE("herm_eig guards") {
  Matrix m(2, 2);
  m << 0, 1, 0, 0;
  CHECK_THROWS_AS(herm_eig(m), std::invalid_argument);
}

TEST_CASE("vec round trip") {
  Rng rng(17);
  Matrix m(3, 2);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 2; ++j) m(i, j) = Complex(rng.gaussian(), rng.gaussian());
  CHECK((unvec_row(vec_row(m), 3, 2) - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("LegShape validation") {
  CHECK_THROWS_AS(LegShape({2, 2}, {"a", "a"}), std::invalid_argument);
  CHECK_THROWS_AS(LegShape({2}, {"a", "b"}), std::invalid_argument);
  const LegShape s({2, 3}, {"a", "b"});
  CHECK(s.total_dim() == 6);
  CHECK(s.strides() == std::vector<Index>({3, 1}));
}
