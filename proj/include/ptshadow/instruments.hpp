/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_INSTRUMENTS_HPP
#define PTSHADOW_INSTRUMENTS_HPP

#include <array>

#include "ptshadow/shadows.hpp"

namespace ptshadow {

/// Configuration of the ancilla-bootstrapped instrument: the system interacts
/// with a single ancilla qubit through two cross-resonance pulses sandwiching
/// a local rotation, then the ancilla is measured projectively.
struct BootstrapSpec {
  double gamma = M_PI / 4;
  Matrix ancilla_init = gates::projector(gates::ket_iplus());
  std::vector<Matrix> preparations = four_state_preparations();
  std::vector<Matrix> povm = {gates::projector(gates::ket0()),
                              gates::projector(gates::ket1())};

  void validate() const {
    if (preparations.size() < 4)
      throw std::invalid_argument("BootstrapSpec: need >= 4 preparations");
    Matrix m(static_cast<Index>(preparations.size()), 4);
    for (std::size_t i = 0; i < preparations.size(); ++i)
      m.row(static_cast<Index>(i)) = vec_row(preparations[i]).transpose();
    if (singular_value_report(m).rank < 4)
      throw std::invalid_argument("BootstrapSpec: preparations not IC");
    validate_povm(povm);
  }
};

/// Full system-ancilla interaction, ancilla first:
/// u_w = V_gamma (F (x) w(theta, phi, lambda)) V_gamma.
inline Matrix u_w(double theta, double phi, double lambda, double gamma) {
  const Matrix v = gates::v_gamma(gamma);
  return v * kron(gates::f(), gates::w(theta, phi, lambda)) * v;
}

namespace detail {

/// Fixed parameter triples whose rotation channels span the 10-dimensional
/// unitary-accessible subspace (stacked-Choi condition number ~5.9).
inline std::vector<std::array<double, 3>> unitary_basis_params() {
  const double p = M_PI;
  return {{0, 0, 0},        {p, 0, p},         {p, p / 2, p / 2},
          {0, 0, p},        {0, 0, p / 2},     {p / 2, 0, p},
          {p / 2, 0, 0},    {p / 2, p / 2, 0}, {p / 2, 0, p / 2},
          {2 * p / 3, 4 * p / 3, 2 * p / 3}};
}

/// Zero the ancilla-coherence blocks of an ancilla(x)system state.
inline Matrix dephase_ancilla(const Matrix& rho_as, Index ds) {
  Matrix out = Matrix::Zero(rho_as.rows(), rho_as.cols());
  const Index da = rho_as.rows() / ds;
  for (Index x = 0; x < da; ++x)
    out.block(x * ds, x * ds, ds, ds) = rho_as.block(x * ds, x * ds, ds, ds);
  return out;
}

}  // namespace detail

/// Result of the 40-circuit restricted characterization: the measured
/// ancilla-system outputs for each (preparation, basis rotation), together
/// with the duals needed to interpolate to arbitrary parameters.
struct CharacterizedInstrument {
  BootstrapSpec spec;
  std::vector<std::array<double, 3>> basis_params;
  std::vector<Matrix> basis_chois;   // rotation-channel Chois on the system
  std::vector<Matrix> basis_duals;   // coefficients via Tr[W_hat dual^T]
  std::vector<Matrix> prep_duals;    // expansion duals: Tr[rho prep_dual^T]
  std::vector<Matrix> choi_duals;    // Choi input-leg factors D_i
  // outputs[i][b]: dephased AS state for preparation i and basis rotation b
  std::vector<std::vector<Matrix>> outputs;

  /// Predicted dephased ancilla-system output for arbitrary parameters and
  /// an arbitrary system input state.
  Matrix predict(double theta, double phi, double lambda,
                 const Matrix& rho_s) const {
    const Matrix w_choi =
        choi_from_unitary(gates::w(theta, phi, lambda)).matrix;
    Matrix out = Matrix::Zero(4, 4);
    for (std::size_t b = 0; b < basis_chois.size(); ++b) {
      const Complex cb = (w_choi * basis_duals[b].transpose()).trace();
      if (std::abs(cb) < 1e-14) continue;
      for (std::size_t i = 0; i < spec.preparations.size(); ++i) {
        const Complex ai =
            (rho_s * prep_duals[i].transpose()).trace();
        if (std::abs(ai) < 1e-14) continue;
        out += cb * ai * outputs[i][b];
      }
    }
    return out;
  }
};

/// Simulate the 40-circuit restricted characterization protocol: each IC
/// preparation is pushed through u_w for each basis rotation and the output
/// recorded with the ancilla dephased in its measurement basis.
inline CharacterizedInstrument characterize(const BootstrapSpec& spec) {
  spec.validate();
  CharacterizedInstrument ci;
  ci.spec = spec;
  ci.basis_params = detail::unitary_basis_params();
  for (const auto& t : ci.basis_params)
    ci.basis_chois.push_back(
        choi_from_unitary(gates::w(t[0], t[1], t[2])).matrix);
  ci.basis_duals = build_duals(ci.basis_chois);
  ci.prep_duals = build_duals(spec.preparations);
  // input-leg factors D_i with Tr[rho_i^T D_j] = delta_ij, so that
  // apply_choi(sum_i rho'_i (x) D_i, rho_j) = rho'_j
  std::vector<Matrix> preps_t;
  for (const auto& p : spec.preparations) preps_t.push_back(p.transpose());
  for (const auto& d : build_duals(preps_t))
    ci.choi_duals.push_back(d.transpose());
  ci.outputs.resize(spec.preparations.size());
  for (std::size_t i = 0; i < spec.preparations.size(); ++i)
    for (const auto& t : ci.basis_params) {
      const Matrix u = u_w(t[0], t[1], t[2], spec.gamma);
      const Matrix rho =
          u * kron(spec.ancilla_init, spec.preparations[i]) * u.adjoint();
      ci.outputs[i].push_back(detail::dephase_ancilla(rho, 2));
    }
  return ci;
}

/// Choi operator of the effective instrument element for ancilla outcome x.
inline ChoiOperator instrument_choi(const CharacterizedInstrument& ci,
                                    double theta, double phi, double lambda,
                                    int x) {
  if (x < 0 || x >= static_cast<int>(ci.spec.povm.size()))
    throw std::invalid_argument("instrument_choi: outcome out of range");
  Matrix choi = Matrix::Zero(4, 4);
  const Matrix& effect = ci.spec.povm[static_cast<std::size_t>(x)];
  const LegShape as({2, 2}, {"a", "s"});
  for (std::size_t i = 0; i < ci.spec.preparations.size(); ++i) {
    const Matrix out =
        ci.predict(theta, phi, lambda, ci.spec.preparations[i]);
    const Matrix cond =
        partial_trace(kron(effect, identity(2)) * out, as, {"s"});
    choi += kron(cond, ci.choi_duals[i]);
  }
  return ChoiOperator(hermitize(choi), 2, 2, TraceClass::kCptni);
}

/// Deviation of the x=0 element's Pauli transfer matrix from the closed
/// forms published for gamma = pi/4, entry order (x0, y0, z0, 0x, 0y, 0z).
/// Uses the unnormalized convention R_ij = Tr[P_i A[P_j]], which reproduces
/// the published theta = 0 values.
struct PtmCheck {
  std::array<double, 6> computed{};
  std::array<double, 6> reference{};
  std::array<double, 6> deviation{};
  double max_deviation = 0.0;
};

inline PtmCheck ptm_check(const CharacterizedInstrument& ci, double theta,
                          double phi, double lambda) {
  if (std::abs(ci.spec.gamma - M_PI / 4) > 1e-12)
    throw std::invalid_argument("ptm_check: defined for gamma = pi/4");
  const Ptm p =
      ptm_from_choi(instrument_choi(ci, theta, phi, lambda, 0), false);
  PtmCheck chk;
  chk.computed = {p.r(1, 0), p.r(2, 0), p.r(3, 0),
                  p.r(0, 1), p.r(0, 2), p.r(0, 3)};
  const double q = theta / 4;
  const double r2 = std::sqrt(2.0);
  chk.reference = {
      r2 / 2 * std::cos(phi) * std::sin(theta) -
          2 * std::cos(q) * std::pow(std::sin(q), 3) * std::sin(phi),
      0.25 * std::cos(phi) * (2 * std::sin(theta / 2) - std::sin(theta)) +
          r2 / 2 * std::sin(theta) * std::sin(phi),
      (-1 + 5 * std::cos(theta)) / 8,
      std::sin(theta / 2) * (r2 * std::cos(lambda) * std::sin(q) * std::sin(q) +
                             std::cos(q) * std::cos(q) * std::sin(lambda)),
      0.5 * std::sin(theta / 2) *
          ((1 + std::cos(theta / 2)) * std::cos(lambda) -
           r2 * (1 - std::cos(theta / 2)) * std::sin(lambda)),
      (3 + std::cos(theta)) / 8};
  for (std::size_t i = 0; i < 6; ++i) {
    chk.deviation[i] = std::abs(chk.computed[i] - chk.reference[i]);
    chk.max_deviation = std::max(chk.max_deviation, chk.deviation[i]);
  }
  return chk;
}

/// One selected element of an informationally complete instrument basis.
struct IcElement {
  double theta = 0.0, phi = 0.0, lambda = 0.0;
  int x = 0;
};

struct IcBasis {
  std::vector<IcElement> elements;
  std::vector<ChoiOperator> chois;
  Index rank = 0;
  double smallest_sv = 0.0;
  double condition = 0.0;
};

namespace detail {

inline Matrix stacked(const std::vector<ChoiOperator>& chois) {
  Matrix m(static_cast<Index>(chois.size()), 16);
  for (std::size_t e = 0; e < chois.size(); ++e)
    m.row(static_cast<Index>(e)) = vec_row(chois[e].matrix).transpose();
  return m;
}

inline SvReport stacked_report(const std::vector<ChoiOperator>& chois) {
  return singular_value_report(stacked(chois));
}

/// True smallest singular value (no rank cutoff): zero if rank-deficient.
inline double stacked_min_sv(const std::vector<ChoiOperator>& chois) {
  const Matrix m = stacked(chois);
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

/// Greedy conditioning-maximizing search over a coarse parameter grid.
/// Candidates are individual (triple, outcome) elements: the two outcomes of
/// one setting each span only a 10-dimensional image, so full rank requires
/// mixing outcomes across settings. After the greedy pass, single-element
/// swaps refine the smallest singular value.
inline IcBasis ic_basis_search(const CharacterizedInstrument& ci,
                               Index target_size) {
  std::vector<IcElement> cand;
  std::vector<ChoiOperator> cand_choi;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int x = 0; x < 2; ++x) {
          const double th = M_PI * (a + 0.5) / 4, ph = 2 * M_PI * b / 4.0,
                       la = 2 * M_PI * (c + 0.25) / 4;
          cand.push_back({th, ph, la, x});
          cand_choi.push_back(instrument_choi(ci, th, ph, la, x));
        }
  std::vector<std::size_t> chosen;
  std::vector<bool> used(cand.size(), false);
  auto assemble = [&](const std::vector<std::size_t>& sel) {
    std::vector<ChoiOperator> c;
    for (std::size_t g : sel) c.push_back(cand_choi[g]);
    return c;
  };
  while (static_cast<Index>(chosen.size()) < target_size) {
    double best_sv = -1.0;
    std::size_t pick = cand.size();
    for (std::size_t g = 0; g < cand.size(); ++g) {
      if (used[g]) continue;
      std::vector<std::size_t> trial = chosen;
      trial.push_back(g);
      const double sv = stacked_min_sv(assemble(trial));
      if (sv > best_sv) {
        best_sv = sv;
        pick = g;
      }
    }
    if (pick == cand.size()) break;
    used[pick] = true;
    chosen.push_back(pick);
  }
  double cur = stacked_min_sv(assemble(chosen));
  for (bool improved = true; improved;) {
    improved = false;
    for (std::size_t s = 0; s < chosen.size(); ++s)
      for (std::size_t g = 0; g < cand.size(); ++g) {
        if (used[g]) continue;
        std::vector<std::size_t> trial = chosen;
        trial[s] = g;
        const double sv = stacked_min_sv(assemble(trial));
        if (sv > cur + 1e-12) {
          used[chosen[s]] = false;
          used[g] = true;
          chosen = trial;
          cur = sv;
          improved = true;
        }
      }
  }
  IcBasis best;
  for (std::size_t g : chosen) {
    best.elements.push_back(cand[g]);
    best.chois.push_back(cand_choi[g]);
  }
  const SvReport rep = stacked_report(best.chois);
  best.rank = rep.rank;
  best.smallest_sv = rep.smallest;
  best.condition = rep.smallest > 0 ? rep.largest / rep.smallest : 0.0;
  return best;
}

}  // namespace detail

/// Informationally complete instrument basis from the characterized
/// bootstrap. Throws if the search cannot reach full rank, e.g. at gamma = 0
/// where only the 10-dimensional unitary subspace is reachable.
inline IcBasis ic_basis(const CharacterizedInstrument& ci,
                        Index target_size = 16, double sv_threshold = 1e-3) {
  IcBasis basis = detail::ic_basis_search(ci, target_size);
  if (basis.rank < target_size || basis.smallest_sv < sv_threshold)
    throw std::runtime_error(
        "ic_basis: rank " + std::to_string(basis.rank) + " of " +
        std::to_string(target_size) + " (smallest singular value " +
        std::to_string(basis.smallest_sv) + ")");
  return basis;
}

/// Shadow step frame over the bootstrapped IC basis: one sampling setting
/// per distinct parameter triple, two Born-weighted outcomes each. The frame
/// is overcomplete when the basis mixes outcomes across settings; its duals
/// still reconstruct exactly because the elements span the full pair space.
inline StepFrame bootstrap_step_frame(const CharacterizedInstrument& ci,
                                      const IcBasis& basis) {
  std::vector<std::array<double, 3>> settings;
  for (const auto& e : basis.elements) {
    bool seen = false;
    for (const auto& s : settings)
      if (std::abs(s[0] - e.theta) + std::abs(s[1] - e.phi) +
              std::abs(s[2] - e.lambda) <
          1e-12)
        seen = true;
    if (!seen) settings.push_back({e.theta, e.phi, e.lambda});
  }
  StepFrame f;
  for (std::size_t s = 0; s < settings.size(); ++s)
    for (int x = 0; x < 2; ++x) {
      f.elements.push_back(
          instrument_choi(ci, settings[s][0], settings[s][1], settings[s][2], x));
      f.setting.push_back(static_cast<Index>(s));
    }
  f.setting_weight.assign(settings.size(),
                          1.0 / static_cast<double>(settings.size()));
  f.finalize();
  return f;
}

}  // namespace ptshadow

#endif  // PTSHADOW_INSTRUMENTS_HPP
