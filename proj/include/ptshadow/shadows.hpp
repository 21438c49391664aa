/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_SHADOWS_HPP
#define PTSHADOW_SHADOWS_HPP

#include <cstdint>

#include "ptshadow/process.hpp"
#include "ptshadow/rng.hpp"

namespace ptshadow {

/// Dual operators for a (possibly under- or over-complete) operator frame:
/// Tr[basis_a dual_b^T] = delta_ab on the span. Built from the right
/// pseudoinverse of the stacked row-vectorized basis.
inline std::vector<Matrix> build_duals(const std::vector<Matrix>& basis,
                                       double cutoff = kDefaultSvdCutoff) {
  if (basis.empty()) throw std::invalid_argument("build_duals: empty basis");
  const Index rows = basis.front().rows();
  const Index cols = basis.front().cols();
  Matrix m(static_cast<Index>(basis.size()), rows * cols);
  double scale = 0.0;
  for (std::size_t e = 0; e < basis.size(); ++e) {
    if (basis[e].rows() != rows || basis[e].cols() != cols)
      throw std::invalid_argument("build_duals: inconsistent dimensions");
    m.row(static_cast<Index>(e)) = vec_row(basis[e]).transpose();
    scale = std::max(scale, basis[e].cwiseAbs().maxCoeff());
  }
  if (scale == 0.0) throw std::invalid_argument("build_duals: all-zero basis");
  // duality pairing Tr[B D^T] is bilinear, so M M^+ = I on independent rows
  // gives exactly the delta condition with duals as columns of M^+
  const Matrix pinv = pseudoinverse(m, cutoff);
  std::vector<Matrix> duals;
  duals.reserve(basis.size());
  for (std::size_t e = 0; e < basis.size(); ++e)
    duals.push_back(unvec_row(pinv.col(static_cast<Index>(e)), rows, cols));
  return duals;
}

/// One time step of a shadow frame: instrument elements indexed by
/// (setting, outcome), the setting sampling weights, and snapshot duals.
/// Duals are built against the weight-scaled elements so that snapshots are
/// unbiased on the frame's span.
struct StepFrame {
  std::vector<ChoiOperator> elements;   // flat over (setting, outcome)
  std::vector<Index> setting;           // setting index per element
  std::vector<double> setting_weight;   // per setting, sums to 1
  std::vector<Matrix> duals;            // snapshot tensor factor, used as-is

  Index num_settings() const { return static_cast<Index>(setting_weight.size()); }

  double element_weight(std::size_t e) const {
    return setting_weight[static_cast<std::size_t>(setting[e])];
  }

  std::vector<Matrix> weighted_basis() const {
    std::vector<Matrix> b;
    b.reserve(elements.size());
    for (std::size_t e = 0; e < elements.size(); ++e)
      b.push_back(element_weight(e) * elements[e].matrix);
    return b;
  }

  void finalize(double cutoff = kDefaultSvdCutoff) {
    if (elements.size() != setting.size())
      throw std::invalid_argument("StepFrame: setting index per element required");
    double total = 0.0;
    for (double w : setting_weight) {
      if (w < 0.0) throw std::invalid_argument("StepFrame: negative weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("StepFrame: setting weights must sum to 1");
    duals = build_duals(weighted_basis(), cutoff);
  }
};

/// Terminal measurement frame: POVM effects per setting with duals omega
/// such that sum_i q_i Tr[X Pi_i] omega_i = X on the span.
struct TerminalFrame {
  std::vector<Matrix> effects;
  std::vector<Index> setting;
  std::vector<double> setting_weight;
  std::vector<Matrix> duals;  // omega_i, used untransposed in snapshots

  double element_weight(std::size_t e) const {
    return setting_weight[static_cast<std::size_t>(setting[e])];
  }

  void finalize(double cutoff = kDefaultSvdCutoff) {
    double total = 0.0;
    for (double w : setting_weight) total += w;
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("TerminalFrame: weights must sum to 1");
    std::vector<Matrix> basis;
    basis.reserve(effects.size());
    for (std::size_t e = 0; e < effects.size(); ++e)
      basis.push_back(element_weight(e) * effects[e].transpose());
    duals = build_duals(basis, cutoff);
  }
};

struct InstrumentFrame {
  std::vector<StepFrame> steps;  // index 0 = slot 0 (earliest)
  TerminalFrame terminal;
  Index local_dim = 2;
  std::string id;

  Index num_steps() const { return static_cast<Index>(steps.size()); }
};

// ---------------------------------------------------------------------------
// Standard frames

/// The six Pauli-basis eigenstates (I +/- W)/2.
inline std::vector<Matrix> pauli_eigenstates() {
  std::vector<Matrix> states;
  for (char w : {'X', 'Y', 'Z'})
    for (int s : {+1, -1})
      states.push_back(0.5 * (identity(2) +
                              static_cast<double>(s) * gates::pauli(w)));
  return states;
}

/// Random-Pauli step instrument: measure in a uniformly random Pauli basis
/// and re-prepare an independently chosen uniform Pauli eigenstate. The
/// 36 elements (18 settings x 2 outcomes) are informationally complete on
/// the pair. Duals are the tensor products of the per-side inverse-channel
/// duals, which keeps every dual's trace equal to the local dimension.
inline StepFrame pauli_step_frame() {
  StepFrame f;
  const auto states = pauli_eigenstates();
  std::vector<Matrix> prep_basis, meas_basis;
  for (const auto& s : states) {
    prep_basis.push_back(s / 6.0);               // uniform over 6 states
    meas_basis.push_back(s.transpose() / 3.0);   // uniform over 3 bases
  }
  const auto prep_duals = build_duals(prep_basis);
  const auto meas_duals = build_duals(meas_basis);
  for (std::size_t p = 0; p < 6; ++p)
    for (std::size_t m = 0; m < 6; ++m) {
      f.elements.emplace_back(kron(states[p], states[m].transpose()), 2, 2,
                              TraceClass::kCptni);
      f.setting.push_back(static_cast<Index>(p * 3 + m / 2));
      f.duals.push_back(kron(prep_duals[p], meas_duals[m]));
    }
  f.setting_weight.assign(18, 1.0 / 18);
  return f;
}

inline TerminalFrame pauli_terminal_frame() {
  TerminalFrame f;
  const auto states = pauli_eigenstates();
  for (std::size_t e = 0; e < states.size(); ++e) {
    f.effects.push_back(states[e]);
    f.setting.push_back(static_cast<Index>(e / 2));
  }
  f.setting_weight = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  f.finalize();
  return f;
}

inline InstrumentFrame pauli_process_frame(Index k) {
  InstrumentFrame f;
  f.id = "pauli";
  const StepFrame step = pauli_step_frame();
  for (Index j = 0; j < k; ++j) f.steps.push_back(step);
  f.terminal = pauli_terminal_frame();
  return f;
}

/// Preparation frame {|+>, |i+>, |0>, |1>}.
inline std::vector<Matrix> four_state_preparations() {
  return {gates::projector(gates::ket_plus()),
          gates::projector(gates::ket_iplus()),
          gates::projector(gates::ket0()), gates::projector(gates::ket1())};
}

// ---------------------------------------------------------------------------
// Snapshots

struct Snapshot {
  std::vector<std::uint16_t> element;  // per step, earliest first
  std::uint16_t terminal = 0;
};

struct ShadowSet {
  InstrumentFrame frame;
  std::vector<Snapshot> snapshots;
  std::uint64_t seed = 0;
};

/// Enumerated joint distribution over complete outcome records. Record index
/// runs over terminal fastest, then step k-1 ... step 0 slowest.
struct RecordTable {
  std::vector<double> prob;
  std::vector<std::size_t> dims;  // [n_0, ..., n_{k-1}, n_terminal]

  std::size_t size() const { return prob.size(); }

  Snapshot unpack(std::size_t flat) const {
    Snapshot s;
    const std::size_t k = dims.size() - 1;
    s.terminal = static_cast<std::uint16_t>(flat % dims[k]);
    flat /= dims[k];
    s.element.resize(k);
    for (std::size_t j = k; j-- > 0;) {
      s.element[j] = static_cast<std::uint16_t>(flat % dims[j]);
      flat /= dims[j];
    }
    return s;
  }
};

inline RecordTable record_distribution(const ProcessTensor& pt,
                                       const InstrumentFrame& frame) {
  if (frame.num_steps() != pt.steps)
    throw std::invalid_argument("record_distribution: step count mismatch");
  RecordTable t;
  std::size_t total = 1;
  for (const auto& s : frame.steps) {
    t.dims.push_back(s.elements.size());
    total *= s.elements.size();
  }
  t.dims.push_back(frame.terminal.effects.size());
  total *= frame.terminal.effects.size();
  if (total > (1u << 22))
    throw std::invalid_argument("record_distribution: record space too large");
  t.prob.resize(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    const Snapshot s = t.unpack(flat);
    ControlSequence seq;
    double q = frame.terminal.element_weight(s.terminal);
    for (Index j = 0; j < pt.steps; ++j) {
      const auto& step = frame.steps[static_cast<std::size_t>(j)];
      seq.steps.push_back(step.elements[s.element[static_cast<std::size_t>(j)]]);
      q *= step.element_weight(s.element[static_cast<std::size_t>(j)]);
    }
    seq.terminal = frame.terminal.effects[s.terminal];
    const double p = born_probability(pt, seq);
    if (p < -1e-9)
      throw std::runtime_error("record_distribution: negative probability");
    t.prob[flat] = q * std::max(0.0, p);
  }
  return t;
}

/// Draw N snapshots from the exact record distribution.
inline ShadowSet sample_shadow(const ProcessTensor& pt,
                               const InstrumentFrame& frame, std::size_t n,
                               Rng& rng) {
  const RecordTable table = record_distribution(pt, frame);
  std::vector<double> cdf(table.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    acc += table.prob[i];
    cdf[i] = acc;
  }
  if (std::abs(acc - 1.0) > 1e-6)
    throw std::runtime_error("sample_shadow: record distribution not normalized");
  ShadowSet out;
  out.frame = frame;
  out.snapshots.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = rng.uniform() * acc;
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), r);
    const std::size_t flat =
        static_cast<std::size_t>(std::distance(cdf.begin(), it));
    out.snapshots.push_back(table.unpack(std::min(flat, table.size() - 1)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Estimation

/// Per-snapshot value of a factorized observable, computed leg by leg from
/// the dual factors: Tr[O Upsilon_hat] / d^k. `obs` lists one operator per
/// process leg in the order (o_k, i_k, ..., i_1, o_0).
struct ObservableFactors {
  std::vector<std::vector<double>> step_factor;  // [step][element]
  std::vector<double> terminal_factor;
  double norm = 1.0;
};

inline ObservableFactors precompute_factors(const InstrumentFrame& frame,
                                            const std::vector<Matrix>& obs) {
  const Index k = frame.num_steps();
  if (static_cast<Index>(obs.size()) != 2 * k + 1)
    throw std::invalid_argument("precompute_factors: one operator per leg");
  ObservableFactors f;
  f.norm = std::pow(static_cast<double>(frame.local_dim), k);
  // obs[0] is on o_k (terminal); pair for slot j is (i_{j+1}, o_j) which sits
  // at obs indices (2(k-j)-1, 2(k-j))
  f.terminal_factor.reserve(frame.terminal.duals.size());
  for (const auto& w : frame.terminal.duals) {
    const Complex v = (obs[0] * w).trace();
    if (std::abs(v.imag()) > 1e-8)
      throw std::runtime_error("precompute_factors: non-real terminal factor");
    f.terminal_factor.push_back(v.real());
  }
  f.step_factor.resize(static_cast<std::size_t>(k));
  for (Index j = 0; j < k; ++j) {
    const auto& step = frame.steps[static_cast<std::size_t>(j)];
    const Matrix pair = kron(obs[static_cast<std::size_t>(2 * (k - j) - 1)],
                             obs[static_cast<std::size_t>(2 * (k - j))]);
    auto& row = f.step_factor[static_cast<std::size_t>(j)];
    row.reserve(step.duals.size());
    for (const auto& d : step.duals) {
      const Complex v = (pair * d).trace();
      if (std::abs(v.imag()) > 1e-8)
        throw std::runtime_error("precompute_factors: non-real step factor");
      row.push_back(v.real());
    }
  }
  return f;
}

inline double snapshot_value(const ObservableFactors& f, const Snapshot& s) {
  double v = f.terminal_factor[s.terminal];
  for (std::size_t j = 0; j < s.element.size(); ++j)
    v *= f.step_factor[j][s.element[j]];
  return v / f.norm;
}

/// Median-of-means estimate of Tr[O Upsilon]/d^k over the shadow set.
/// Lower median on even group counts.
inline double estimate_observable(const ShadowSet& shadow,
                                  const std::vector<Matrix>& obs, Index k_groups) {
  const std::size_t n = shadow.snapshots.size();
  if (k_groups <= 0 || static_cast<std::size_t>(k_groups) > n)
    throw std::invalid_argument("estimate_observable: invalid group count");
  const ObservableFactors f = precompute_factors(shadow.frame, obs);
  std::vector<double> mean(static_cast<std::size_t>(k_groups), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(k_groups), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = i % static_cast<std::size_t>(k_groups);
    mean[g] += snapshot_value(f, shadow.snapshots[i]);
    count[g]++;
  }
  for (std::size_t g = 0; g < mean.size(); ++g) mean[g] /= count[g];
  std::sort(mean.begin(), mean.end());
  return mean[(mean.size() - 1) / 2];
}

/// Exact expectation of the snapshot estimator: the frame's reconstruction
/// map applied to Upsilon (equals Upsilon itself on the frame's span).
/// Dense; intended for validation at small k.
inline Matrix exact_shadow_expectation(const ProcessTensor& pt,
                                       const InstrumentFrame& frame) {
  const RecordTable table = record_distribution(pt, frame);
  Matrix acc = Matrix::Zero(pt.choi.rows(), pt.choi.cols());
  for (std::size_t flat = 0; flat < table.size(); ++flat) {
    if (table.prob[flat] == 0.0) continue;
    const Snapshot s = table.unpack(flat);
    Matrix snap = frame.terminal.duals[s.terminal];
    for (Index j = pt.steps; j-- > 0;)
      snap = kron(snap, frame.steps[static_cast<std::size_t>(j)]
                            .duals[s.element[static_cast<std::size_t>(j)]]);
    acc += table.prob[flat] * snap;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Planning

struct ShadowPlan {
  Index k_groups = 0;
  Index shots = 0;
};

/// Accuracy planning: K = ceil(2 ln(2M/delta)), N = ceil((34/eps^2) * norm^2),
/// with natural logs. `max_shadow_norm` is the largest (unsquared) shadow
/// norm among the target observables.
inline ShadowPlan plan(Index m, double eps, double delta,
                       double max_shadow_norm, bool force_odd = false) {
  if (eps <= 0.0 || eps >= 1.0 || delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("plan: eps and delta must lie in (0,1)");
  ShadowPlan p;
  p.k_groups = static_cast<Index>(
      std::ceil(2.0 * std::log(2.0 * static_cast<double>(m) / delta)));
  if (force_odd && p.k_groups % 2 == 0) p.k_groups += 1;
  p.shots = static_cast<Index>(
      std::ceil(34.0 / (eps * eps) * max_shadow_norm * max_shadow_norm));
  return p;
}

// ---------------------------------------------------------------------------
// Shadow norms

namespace detail {

/// Pure qubit states on a Bloch-sphere grid plus the supplied extras.
inline std::vector<Matrix> bloch_grid(Index points) {
  std::vector<Matrix> states;
  const Index n_theta = static_cast<Index>(std::sqrt(static_cast<double>(points)));
  const Index n_phi = n_theta;
  for (Index a = 0; a <= n_theta; ++a) {
    const double theta = M_PI * static_cast<double>(a) / n_theta;
    for (Index b = 0; b < n_phi; ++b) {
      const double phi = 2.0 * M_PI * static_cast<double>(b) / n_phi;
      Matrix rho(2, 2);
      const double z = std::cos(theta), x = std::sin(theta) * std::cos(phi),
                   y = std::sin(theta) * std::sin(phi);
      rho = 0.5 * (identity(2) + x * gates::pauli('X') + y * gates::pauli('Y') +
                   z * gates::pauli('Z'));
      states.push_back(rho);
      if (a == 0 || a == n_theta) break;  // poles
    }
  }
  return states;
}

}  // namespace detail

/// Squared per-step shadow norm of a single-leg observable sitting on the
/// measured (input) leg of a step: the Born-weighted second moment of the
/// snapshot factors, maximized over input states on a Bloch grid with local
/// refinement.
inline double shadow_norm_sq_step(const StepFrame& step, const Matrix& obs,
                                  Index grid_points = 10000) {
  std::vector<double> coeff(step.elements.size());
  for (std::size_t e = 0; e < step.elements.size(); ++e) {
    const Matrix pair = kron(identity(2), obs);
    coeff[e] = (pair * step.duals[e]).trace().real();
  }
  auto value = [&](const Matrix& sigma) {
    double v = 0.0;
    for (std::size_t e = 0; e < step.elements.size(); ++e) {
      const double p =
          (step.elements[e].matrix * kron(identity(2), sigma.transpose()))
              .trace()
              .real();
      v += step.element_weight(e) * p * coeff[e] * coeff[e];
    }
    return v;
  };
  double best = 0.0;
  Matrix best_sigma = identity(2) / 2.0;
  for (const auto& sigma : detail::bloch_grid(grid_points)) {
    const double v = value(sigma);
    if (v > best) {
      best = v;
      best_sigma = sigma;
    }
  }
  // local refinement around the best grid point
  double span = 0.1;
  for (int iter = 0; iter < 40; ++iter) {
    bool improved = false;
    const Matrix base = best_sigma;
    for (char w : {'X', 'Y', 'Z'})
      for (double sgn : {+1.0, -1.0}) {
        Matrix cand = base + sgn * span * 0.5 * gates::pauli(w);
        auto es = herm_eig(hermitize(cand), 1e10);
        // renormalize to the closest pure state direction
        Index top;
        es.eigenvalues().maxCoeff(&top);
        const Vector v = es.eigenvectors().col(top);
        cand = v * v.adjoint();
        const double val = value(cand);
        if (val > best) {
          best = val;
          best_sigma = cand;
          improved = true;
        }
      }
    if (!improved) span *= 0.5;
    if (span < 1e-6) break;
  }
  return best;
}

/// Squared shadow norm of an observable on the terminal leg.
inline double shadow_norm_sq_terminal(const TerminalFrame& term,
                                      const Matrix& obs,
                                      Index grid_points = 10000) {
  std::vector<double> coeff(term.effects.size());
  for (std::size_t e = 0; e < term.effects.size(); ++e)
    coeff[e] = (obs * term.duals[e]).trace().real();
  auto value = [&](const Matrix& sigma) {
    double v = 0.0;
    for (std::size_t e = 0; e < term.effects.size(); ++e) {
      const double p = (term.effects[e] * sigma).trace().real();
      v += term.element_weight(e) * p * coeff[e] * coeff[e];
    }
    return v;
  };
  double best = 0.0;
  for (const auto& sigma : detail::bloch_grid(grid_points))
    best = std::max(best, value(sigma));
  return best;
}

/// Inverse of the uniform Pauli-basis measurement channel on one qubit:
/// M1^{-1}(X) = 3X - Tr[X] I.
inline Matrix pauli_inverse_map(const Matrix& x) {
  if (x.rows() != 2 || x.cols() != 2)
    throw std::invalid_argument("pauli_inverse_map: single-qubit only");
  return 3.0 * x - x.trace() * identity(2);
}

}  // namespace ptshadow

#endif  // PTSHADOW_SHADOWS_HPP
