/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "catch_amalgamated.hpp"
#include "ptshadow/mle.hpp"

using namespace ptshadow;

namespace {

Matrix random_density(Rng& rng, Index d) {
  Matrix g(d, d);
  for (Index r = 0; r < d; ++r)
    for (Index c = 0; c < d; ++c) g(r, c) = Complex(rng.gaussian(), rng.gaussian());
  Matrix rho = g * g.adjoint();
  return rho / rho.trace();
}

Matrix random_hermitian(Rng& rng, Index d) {
  Matrix g(d, d);
  for (Index r = 0; r < d; ++r)
    for (Index c = 0; c < d; ++c) g(r, c) = Complex(rng.gaussian(), rng.gaussian());
  return hermitize(g);
}

/// Mildly noisy qubit channel: unitary mixed with depolarizing, so process
/// tensors built from it are full rank and all record probabilities positive.
ChoiOperator noisy_channel(Rng& rng, double noise) {
  const ChoiOperator u = choi_from_unitary(rng.haar_unitary(2));
  Matrix mixed = (1.0 - noise) * u.matrix + noise * 0.5 * identity(4);
  return ChoiOperator(std::move(mixed), 2, 2, TraceClass::kCptp);
}

/// Exact record probabilities scaled to fractional counts.
std::vector<double> exact_counts(const ProcessTensor& pt,
                                 const InstrumentFrame& frame, double shots) {
  const RecordTable t = record_distribution(pt, frame);
  std::vector<double> counts(t.prob.size());
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = shots * t.prob[i];
  return counts;
}

double frobenius(const Matrix& a, const Matrix& b) {
  return std::sqrt((a - b).squaredNorm());
}

}  // namespace

TEST_CASE("model probabilities match the record distribution") {
  Rng rng(11);
  const ProcessTensor pt = markov_product(
      {noisy_channel(rng, 0.3), noisy_channel(rng, 0.3)}, random_density(rng, 2));
  const InstrumentFrame frame = pauli_process_frame(2);
  const RecordTable table = record_distribution(pt, frame);

  MleProblem problem = problem_from_frame(frame, exact_counts(pt, frame, 1.0),
                                          maximally_mixed_process(2, 2));
  const std::vector<double> p = probabilities(pt.choi, problem);
  REQUIRE(p.size() == table.prob.size());
  // the flat orders coincide: slot 0 slowest, terminal fastest
  double dev = 0.0, total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    dev = std::max(dev, std::abs(p[i] - table.prob[i]));
    total += p[i];
  }
  CHECK(dev < 1e-10);
  CHECK(std::abs(total - 1.0) < 1e-8);
}

TEST_CASE("log-likelihood basics") {
  SECTION("single observation with p = 1 gives f = 0") {
    Rng rng(12);
    const Matrix rho = random_density(rng, 2);
    MleProblem problem;
    problem.terminal_effects = {identity(2)};
    problem.counts = {1.0};
    problem.initial = ProcessTensor(rho, 0, 2);
    problem.validate();
    CHECK(std::abs(log_likelihood(rho, problem)) < 1e-12);
  }

  SECTION("halving all counts halves f") {
    Rng rng(13);
    const ProcessTensor pt =
        markov_product({noisy_channel(rng, 0.3)}, random_density(rng, 2));
    const InstrumentFrame frame = pauli_process_frame(1);
    MleProblem problem = problem_from_frame(
        frame, exact_counts(pt, frame, 1000.0), maximally_mixed_process(1, 2));
    const double f1 = log_likelihood(pt.choi, problem);
    for (auto& n : problem.counts) n *= 0.5;
    const double f2 = log_likelihood(pt.choi, problem);
    CHECK(f1 > 0.0);
    CHECK(std::abs(f2 - 0.5 * f1) < 1e-9 * std::abs(f1));
  }

  SECTION("probability floor absorbs zero-probability sequences") {
    Rng rng(14);
    // pure preparation makes some records impossible; counts there still
    // produce a finite f through the floor
    const ProcessTensor pt = markov_product(
        {choi_from_unitary(identity(2))}, gates::projector(gates::ket0()));
    const InstrumentFrame frame = pauli_process_frame(1);
    std::vector<double> counts(frame.steps[0].elements.size() *
                                   frame.terminal.effects.size(),
                               1.0);
    MleProblem problem = problem_from_frame(frame, std::move(counts),
                                            maximally_mixed_process(1, 2));
    CHECK(std::isfinite(log_likelihood(pt.choi, problem)));
  }
}

TEST_CASE("gradient") {
  Rng rng(15);
  const InstrumentFrame frame = pauli_process_frame(2);

  SECTION("single-term gradient is the scaled observable") {
    const ProcessTensor pt = markov_product(
        {noisy_channel(rng, 0.3), noisy_channel(rng, 0.3)},
        random_density(rng, 2));
    std::vector<double> counts(frame.steps[0].elements.size() *
                                   frame.steps[1].elements.size() *
                                   frame.terminal.effects.size(),
                               0.0);
    const std::size_t seq = ((5 * 36 + 17) * 6) + 2;  // mu = {5, 17}, i = 2
    counts[seq] = 3.0;
    MleProblem problem = problem_from_frame(frame, std::move(counts),
                                            maximally_mixed_process(2, 2));
    REQUIRE(problem.flat_index({5, 17}, 2) == seq);
    const Matrix o =
        kron(problem.terminal_effects[2],
             kron(problem.step_basis[1][17].matrix.transpose(),
                  problem.step_basis[0][5].matrix.transpose()));
    const double p = probabilities(pt.choi, problem)[seq];
    const Matrix expected = hermitize(-(3.0 / p) * o);
    CHECK((gradient(pt.choi, problem) - expected).cwiseAbs().maxCoeff() <
          1e-10 * expected.cwiseAbs().maxCoeff());
  }

  SECTION("matches central finite differences on random 2-step problems") {
    for (int trial = 0; trial < 20; ++trial) {
      const ProcessTensor pt = markov_product(
          {noisy_channel(rng, 0.4), noisy_channel(rng, 0.4)},
          random_density(rng, 2));
      MleProblem problem = problem_from_frame(
          frame, exact_counts(pt, frame, 100.0),
          maximally_mixed_process(2, 2));
      // evaluate away from the stationary point but with all probabilities
      // bounded away from the clamping floor
      const Matrix x =
          0.6 * pt.choi + 0.4 * maximally_mixed_process(2, 2).choi;
      const Matrix g = gradient(x, problem);
      CHECK(is_hermitian(g, 1e-10));
      Matrix h = random_hermitian(rng, 32);
      h /= std::sqrt(h.squaredNorm());
      const double eps = 3e-5;
      const double fd = (log_likelihood(x + eps * h, problem) -
                         log_likelihood(x - eps * h, problem)) /
                        (2.0 * eps);
      const double an = (g * h).trace().real();
      CHECK(std::abs(fd - an) < 1e-5 * std::max(1.0, std::abs(an)));
    }
  }
}

TEST_CASE("project_physical") {
  Rng rng(16);

  SECTION("idempotent on a simulated process tensor") {
    const Matrix rho_se = kron(random_density(rng, 2), random_density(rng, 2));
    const ProcessTensor pt =
        simulate_process({gates::swap2(), rng.haar_unitary(4)}, rho_se, 2);
    const ProcessTensor proj = project_physical(pt.choi, 2, 2);
    CHECK((proj.choi - pt.choi).cwiseAbs().maxCoeff() < 1e-8);
  }

  SECTION("noisy input becomes physical and moves toward the truth") {
    for (int trial = 0; trial < 20; ++trial) {
      const ProcessTensor pt = markov_product(
          {noisy_channel(rng, 0.3)}, random_density(rng, 2));
      const Matrix noisy = pt.choi + 0.05 * random_hermitian(rng, 8);
      const ProcessTensor proj = project_physical(noisy, 1, 2);
      // physical: PSD, trace d^k, causal
      CHECK(cp_defect(proj.choi) < 1e-9);
      CHECK(std::abs(proj.choi.trace().real() - 2.0) < 1e-9);
      const auto defects = causality_defect(proj);
      for (double def : defects) CHECK(def < 1e-6);
      CHECK(frobenius(proj.choi, pt.choi) <= frobenius(noisy, pt.choi) + 1e-12);
    }
  }

  SECTION("negative identity clamps to a physical state") {
    const ProcessTensor proj = project_physical(-Matrix::Identity(8, 8), 1, 2);
    CHECK(cp_defect(proj.choi) < 1e-12);
    CHECK(std::abs(proj.choi.trace().real() - 2.0) < 1e-9);
  }

  SECTION("non-Hermitian input rejected") {
    Matrix m = Matrix::Zero(8, 8);
    m(0, 1) = 1.0;
    CHECK_THROWS_AS(project_physical(m, 1, 2), std::invalid_argument);
  }

  SECTION("causal projection alone is exact in one pass") {
    // residual of the containment constraints after projecting a random
    // Hermitian matrix must vanish
    Matrix x = random_hermitian(rng, 32);
    x += 2.0 * Matrix::Identity(32, 32);  // keep the trace positive
    Matrix c = detail::project_causal(x, 2, 2);
    c *= 4.0 / c.trace().real();
    const auto defects = causality_defect(ProcessTensor(c, 2, 2));
    for (double def : defects) CHECK(def < 1e-10);
  }
}

TEST_CASE("fit") {
  Rng rng(17);

  SECTION("exact Markov counts recover the truth") {
    const ProcessTensor pt = markov_product(
        {noisy_channel(rng, 0.3), noisy_channel(rng, 0.3)},
        random_density(rng, 2));
    const InstrumentFrame frame = pauli_process_frame(2);
    MleProblem problem = problem_from_frame(
        frame, exact_counts(pt, frame, 1.0), maximally_mixed_process(2, 2));
    FitOptions opts;
    opts.max_iters = 4000;
    opts.tol = 1e-12;
    const MleResult res = fit(problem, opts);
    // accepted log-likelihoods never increase
    for (std::size_t i = 1; i < res.trace.size(); ++i)
      CHECK(res.trace[i].f <= res.trace[i - 1].f + 1e-12);
    CHECK(frobenius(res.estimate.choi, pt.choi) < 1e-3);
    CHECK(cp_defect(res.estimate.choi) < 1e-9);
    for (double def : causality_defect(res.estimate)) CHECK(def < 1e-6);
  }

  SECTION("stationary at the truth") {
    const ProcessTensor pt = markov_product(
        {noisy_channel(rng, 0.3)}, random_density(rng, 2));
    const InstrumentFrame frame = pauli_process_frame(1);
    MleProblem problem = problem_from_frame(
        frame, exact_counts(pt, frame, 1.0), pt);
    FitOptions opts;
    opts.max_iters = 20;
    const double f0 = log_likelihood(pt.choi, problem);
    const MleResult res = fit(problem, opts);
    CHECK(res.log_likelihood >= f0 - 1e-9);
    CHECK(frobenius(res.estimate.choi, pt.choi) < 1e-5);
  }

  SECTION("sampled two-step process reaches high fidelity") {
    const Matrix rho_se = kron(random_density(rng, 2), random_density(rng, 2));
    const ProcessTensor pt =
        simulate_process({gates::swap2(), rng.haar_unitary(4)}, rho_se, 2);
    const InstrumentFrame frame = pauli_process_frame(2);
    ShadowSet shadow = sample_shadow(pt, frame, 100000, rng);
    MleProblem problem = problem_from_frame(frame, counts_from_shadow(shadow),
                                            maximally_mixed_process(2, 2));
    FitOptions opts;
    opts.max_iters = 300;
    opts.tol = 1e-10;
    opts.projection.residual = 1e-10;
    opts.projection.max_cycles = 1000;
    const MleResult res = fit(problem, opts);
    // square-root Uhlmann fidelity between normalized Choi states
    const double fid =
        std::sqrt(uhlmann_fidelity(res.estimate.choi / 4.0, pt.choi / 4.0));
    CHECK(fid >= 0.98);
  }

  SECTION("zero iterations returns the projected initial guess") {
    Rng rng2(18);
    const ProcessTensor pt = markov_product(
        {noisy_channel(rng2, 0.3)}, random_density(rng2, 2));
    const InstrumentFrame frame = pauli_process_frame(1);
    MleProblem problem = problem_from_frame(
        frame, exact_counts(pt, frame, 1.0), maximally_mixed_process(1, 2));
    problem.initial.choi += 0.01 * random_hermitian(rng2, 8);
    FitOptions opts;
    opts.max_iters = 0;
    const MleResult res = fit(problem, opts);
    const ProcessTensor proj = project_physical(problem.initial.choi, 1, 2);
    CHECK((res.estimate.choi - proj.choi).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(res.trace.size() == 1);
  }

  SECTION("invalid problems rejected") {
    MleProblem empty;
    CHECK_THROWS_AS(fit(empty), std::invalid_argument);

    Rng rng3(19);
    const InstrumentFrame frame = pauli_process_frame(1);
    std::vector<double> counts(
        frame.steps[0].elements.size() * frame.terminal.effects.size(), 0.0);
    CHECK_THROWS_AS(problem_from_frame(frame, std::move(counts),
                                       maximally_mixed_process(1, 2)),
                    std::invalid_argument);
  }
}
