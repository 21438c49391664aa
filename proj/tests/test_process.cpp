/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "catch_amalgamated.hpp"
#include "ptshadow/process.hpp"
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

ChoiOperator random_cptp(Rng& rng) {
  // unitary dilation with a fresh qubit environment
  const Matrix u = rng.haar_unitary(4);
  std::vector<Matrix> ks;
  for (Index e = 0; e < 2; ++e) {
    Matrix k(2, 2);
    for (Index r = 0; r < 2; ++r)
      for (Index c = 0; c < 2; ++c) k(r, c) = u(r * 2 + e, c * 2 + 0);
    ks.push_back(k);
  }
  return choi_from_kraus(ks);
}

void check_invariants(const ProcessTensor& pt, double tol = 1e-8) {
  CHECK(is_hermitian(pt.choi, 1e-9));
  CHECK(cp_defect(pt.choi) < 1e-9);
  const double expect_tr = std::pow(static_cast<double>(pt.local_dim), pt.steps);
  CHECK(std::abs(pt.choi.trace().real() - expect_tr) < 1e-8);
  for (double d : causality_defect(pt)) CHECK(d < tol);
}

}  // namespace

TEST_CASE("identity process structure") {
  Rng rng(1);
  const Matrix rho_s = random_density(rng, 2);
  const Matrix rho_e = random_density(rng, 2);
  const std::vector<Matrix> us(2, identity(4));
  const ProcessTensor pt = simulate_process(us, kron(rho_s, rho_e), 2);
  check_invariants(pt);
  const Matrix expect =
      kron(kron(unnormalized_bell(2), unnormalized_bell(2)), rho_s);
  CHECK((pt.choi - expect).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("environment-free dynamics are Markovian") {
  Rng rng(2);
  const Matrix rho_s = random_density(rng, 2);
  const Matrix rho_e = random_density(rng, 2);
  const Matrix v1 = rng.haar_unitary(2);
  const Matrix v2 = rng.haar_unitary(2);
  const ProcessTensor pt = simulate_process(
      {kron(v1, identity(2)), kron(v2, identity(2))}, kron(rho_s, rho_e), 2);
  check_invariants(pt);
  const ProcessTensor mk =
      markov_product({choi_from_unitary(v1), choi_from_unitary(v2)}, rho_s);
  CHECK((pt.choi - mk.choi).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("fresh environment per step matches the Markov product") {
  Rng rng(3);
  const Matrix rho_s = random_density(rng, 2);
  const LegShape full({2, 2, 2}, {"s", "e1", "e2"});
  const Matrix u1 = embed(gates::swap2(), LegShape({2, 2}, {"s", "e1"}), full);
  const Matrix u2 = embed(gates::swap2(), LegShape({2, 2}, {"s", "e2"}), full);
  const Matrix env0 = kron(gates::projector(gates::ket0()),
                           gates::projector(gates::ket0()));
  const ProcessTensor pt = simulate_process({u1, u2}, kron(rho_s, env0), 2);
  check_invariants(pt);
  // each step replaces the system with |0><0|
  const ChoiOperator replace(
      kron(gates::projector(gates::ket0()), identity(2)), 2, 2,
      TraceClass::kCptp);
  const ProcessTensor mk = markov_product({replace, replace}, rho_s);
  CHECK((pt.choi - mk.choi).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("swap-coupled environment") {
  Rng rng(4);
  const Matrix rho_s = random_density(rng, 2);
  const Matrix rho_e = random_density(rng, 2);
  const ProcessTensor pt =
      simulate_process({gates::swap2()}, kron(rho_s, rho_e), 2);
  check_invariants(pt);

  SECTION("one-step marginal channel replaces with the environment state") {
    const Matrix m = marginal(pt, {leg_o(1), leg_i(1)});
    CHECK((m - kron(rho_e, identity(2))).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("marginal over o_0 is the average initial state") {
    const Matrix m = marginal(pt, {leg_o(0)});
    CHECK((m - rho_s).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("act against direct dynamics oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix u1 = rng.haar_unitary(4);
    const Matrix u2 = rng.haar_unitary(4);
    Matrix rho_se = random_density(rng, 4);
    const ProcessTensor pt = simulate_process({u1, u2}, rho_se, 2);
    check_invariants(pt);

    ControlSequence seq;
    seq.steps = {random_cptp(rng), random_cptp(rng)};
    const Matrix via_pt = act(pt, seq);

    // direct: controls act on S, unitaries on SE
    const LegShape se({2, 2}, {"s", "e"});
    auto apply_on_s = [&](const ChoiOperator& a, const Matrix& rho) {
      Matrix out = Matrix::Zero(4, 4);
      // vectorize over a basis of S while E rides along
      for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) {
          Matrix basis = Matrix::Zero(2, 2);
          basis(i, j) = 1.0;
          const Matrix mapped = apply_choi(a, basis);
          // coefficient operator on E: <i|_S rho |j>_S
          Matrix coeff(2, 2);
          for (Index r = 0; r < 2; ++r)
            for (Index c = 0; c < 2; ++c) coeff(r, c) = rho(i * 2 + r, j * 2 + c);
          out += kron(mapped, coeff);
        }
      return out;
    };
    Matrix rho = apply_on_s(seq.steps[0], rho_se);
    rho = u1 * rho * u1.adjoint();
    rho = apply_on_s(seq.steps[1], rho);
    rho = u2 * rho * u2.adjoint();
    const Matrix direct = partial_trace(rho, se, {"s"});
    CHECK((via_pt - direct).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("act basics") {
  Rng rng(6);
  const Matrix rho0 = random_density(rng, 2);

  SECTION("Markov with identity controls composes the channels") {
    const ChoiOperator c1 = random_cptp(rng);
    const ChoiOperator c2 = random_cptp(rng);
    const ProcessTensor mk = markov_product({c1, c2}, rho0);
    ControlSequence seq;
    const ChoiOperator id_map = choi_from_unitary(identity(2));
    seq.steps = {id_map, id_map};
    const Matrix out = act(mk, seq);
    const Matrix expect = apply_choi(c2, apply_choi(c1, rho0));
    CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("preparation through the identity process") {
    const ProcessTensor pt =
        simulate_process({kron(identity(2), identity(2))},
                         kron(rho0, gates::projector(gates::ket0())), 2);
    ControlSequence seq;
    const Matrix plus = gates::projector(gates::ket_plus());
    seq.steps = {ChoiOperator(kron(plus, identity(2)), 2, 2)};
    const Matrix out = act(pt, seq);
    CHECK((out - plus).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("instrument outcomes sum to probability one") {
    const Matrix u = rng.haar_unitary(4);
    const ProcessTensor pt = simulate_process({u, u}, random_density(rng, 4), 2);
    const std::vector<Matrix> zmeas{gates::projector(gates::ket0()),
                                    gates::projector(gates::ket1())};
    const Instrument inst = stinespring_instrument(
        gates::v_gamma(M_PI / 4), gates::projector(gates::ket_iplus()), zmeas);
    double total = 0.0;
    for (const auto& e0 : inst.elements)
      for (const auto& e1 : inst.elements)
        for (const auto& m : zmeas) {
          ControlSequence seq;
          seq.steps = {e0, e1};
          seq.terminal = m;
          total += born_probability(pt, seq);
        }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }

  SECTION("linearity in one slot") {
    const ProcessTensor pt =
        simulate_process({rng.haar_unitary(4)}, random_density(rng, 4), 2);
    const ChoiOperator a = random_cptp(rng);
    const ChoiOperator b = random_cptp(rng);
    Matrix mix = 0.3 * a.matrix + 0.7 * b.matrix;
    ControlSequence sa, sb, sm;
    sa.steps = {a};
    sb.steps = {b};
    sm.steps = {ChoiOperator(mix, 2, 2)};
    const Matrix lhs = act(pt, sm);
    const Matrix rhs = 0.3 * act(pt, sa) + 0.7 * act(pt, sb);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("causality defects detect tampering") {
  Rng rng(7);
  const ProcessTensor pt =
      simulate_process({rng.haar_unitary(4), rng.haar_unitary(4)},
                       random_density(rng, 4), 2);
  Matrix noise(pt.choi.rows(), pt.choi.cols());
  for (Index r = 0; r < noise.rows(); ++r)
    for (Index c = 0; c < noise.cols(); ++c)
      noise(r, c) = Complex(rng.gaussian(), rng.gaussian());
  noise = hermitize(noise);
  const ProcessTensor bad(pt.choi + 0.1 * noise, pt.steps, pt.local_dim);
  const auto defects = causality_defect(bad);
  CHECK(*std::max_element(defects.begin(), defects.end()) > 1e-3);
}

TEST_CASE("causal break witnesses memory") {
  Rng rng(8);

  SECTION("Markov products show no gap") {
    for (int trial = 0; trial < 5; ++trial) {
      const ProcessTensor mk = markov_product(
          {random_cptp(rng), random_cptp(rng)}, random_density(rng, 2));
      ControlSequence future;
      future.steps = {random_cptp(rng)};
      future.terminal = gates::projector(gates::ket0());
      // breaks: measure Z with different outcomes, same fresh preparation
      const Matrix fresh = gates::projector(gates::ket_plus());
      const ChoiOperator break0(
          kron(fresh, gates::projector(gates::ket0()).transpose()), 2, 2);
      const ChoiOperator break1(
          kron(fresh, gates::projector(gates::ket1()).transpose()), 2, 2);
      const auto r = causal_break_test(mk, future, {break0}, {break1});
      CHECK(r.gap < 1e-9);
    }
  }

  SECTION("swap-coupled environment shows a gap") {
    const Matrix rho_se =
        kron(identity(2) / 2.0, gates::projector(gates::ket0()));
    const ProcessTensor pt =
        simulate_process({gates::swap2(), gates::swap2()}, rho_se, 2);
    ControlSequence future;
    future.steps = {choi_from_unitary(identity(2))};
    future.terminal = gates::projector(gates::ket0());
    // break at slot 0: discard the past output, prepare |0> vs |1>;
    // the first swap stores the prepared state in the environment and the
    // second swap brings it back, so the future Z outcome depends on the past
    const ChoiOperator prep0(kron(gates::projector(gates::ket0()), identity(2)),
                             2, 2);
    const ChoiOperator prep1(kron(gates::projector(gates::ket1()), identity(2)),
                             2, 2);
    const auto r = causal_break_test(pt, future, {prep0}, {prep1});
    CHECK(r.gap > 0.1);
  }

  SECTION("identical pasts give zero gap") {
    Rng rng2(9);
    const ProcessTensor pt = simulate_process(
        {rng2.haar_unitary(4), rng2.haar_unitary(4)}, random_density(rng2, 4), 2);
    ControlSequence future;
    future.steps = {random_cptp(rng2)};
    future.terminal = gates::projector(gates::ket0());
    const ChoiOperator prep(kron(gates::projector(gates::ket_plus()),
                                 identity(2)),
                            2, 2);
    const auto r = causal_break_test(pt, future, {prep}, {prep});
    CHECK(r.gap < 1e-12);
  }
}

TEST_CASE("non-Markovianity measures") {
  Rng rng(10);

  SECTION("Markov product has no temporal correlations across any cut") {
    const ProcessTensor mk = markov_product(
        {random_cptp(rng), random_cptp(rng)}, random_density(rng, 2));
    const auto m = nm_measures(mk, {leg_o(2), leg_i(2)});
    CHECK(m.negativity < 1e-8);
    CHECK(m.qmi < 1e-8);
  }

  SECTION("swap-coupled environment is temporally entangled") {
    const Matrix rho_se =
        kron(random_density(rng, 2), gates::projector(gates::ket0()));
    const ProcessTensor pt =
        simulate_process({gates::swap2(), gates::swap2()}, rho_se, 2);
    const auto m = nm_measures(pt, {leg_o(2), leg_i(2)});
    CHECK(m.negativity > 0.1);
    CHECK(m.qmi > 0.1);
  }
}

TEST_CASE("dense cap enforced") {
  const std::vector<Matrix> us(6, identity(4));
  CHECK_THROWS_AS(simulate_process(us, identity(4) / 4.0, 2),
                  std::invalid_argument);
}
