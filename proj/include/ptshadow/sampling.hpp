/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_SAMPLING_HPP
#define PTSHADOW_SAMPLING_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ptshadow/shadows.hpp"

namespace ptshadow {

namespace detail {

/// Kraus operators of a CP map from the eigendecomposition of its Choi.
inline std::vector<Matrix> kraus_from_choi(const ChoiOperator& c,
                                           double tol = 1e-12) {
  auto es = herm_eig(hermitize(c.matrix), 1e10);
  std::vector<Matrix> ks;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()(i);
    if (lam < tol) continue;
    ks.push_back(std::sqrt(lam) *
                 unvec_row(es.eigenvectors().col(i), c.dim_out, c.dim_in));
  }
  if (ks.empty())
    throw std::invalid_argument("kraus_from_choi: zero map");
  return ks;
}

/// Apply (K (x) I_E) to a state vector on (S (x) E), S slow.
inline Vector apply_system_kraus(const Matrix& k, const Vector& psi, Index d,
                                 Index de) {
  Vector out = Vector::Zero(psi.size());
  for (Index a = 0; a < d; ++a)
    for (Index b = 0; b < d; ++b) {
      const Complex amp = k(a, b);
      if (amp == Complex(0.0)) continue;
      for (Index e = 0; e < de; ++e) out(a * de + e) += amp * psi(b * de + e);
    }
  return out;
}

}  // namespace detail

/// Exact shot sampler by state-vector trajectories of system + environment
/// with mid-circuit instrument application: sample an initial pure branch of
/// rho_se0, then alternate instrument elements (on S) and step unitaries
/// (on S (x) E), ending with the terminal measurement. Equivalent in
/// distribution to sampling the enumerated record table, but the cost is
/// linear in the number of steps, so it scales to record spaces far beyond
/// the dense enumeration cap.
inline ShadowSet sample_shadow_trajectories(const std::vector<Matrix>& u_steps,
                                            const Matrix& rho_se0, Index d,
                                            const InstrumentFrame& frame,
                                            std::size_t n, Rng& rng) {
  const Index k = static_cast<Index>(u_steps.size());
  if (frame.num_steps() != k)
    throw std::invalid_argument(
        "sample_shadow_trajectories: frame/step count mismatch");
  const Index dse = rho_se0.rows();
  const Index de = dse / d;
  if (de * d != dse)
    throw std::invalid_argument(
        "sample_shadow_trajectories: rho_se0/local dim mismatch");
  for (const auto& u : u_steps)
    if (u.rows() != dse || !gates::is_unitary(u, 1e-10))
      throw std::invalid_argument(
          "sample_shadow_trajectories: invalid step unitary");

  // initial-state branches
  auto es = herm_eig(rho_se0, 1e-8);
  std::vector<double> branch_w(static_cast<std::size_t>(dse));
  for (Index b = 0; b < dse; ++b)
    branch_w[static_cast<std::size_t>(b)] =
        std::max(0.0, es.eigenvalues()(b));

  // per step: element indices grouped by setting, and Kraus sets per element
  struct StepTables {
    std::vector<std::vector<std::size_t>> by_setting;
    std::vector<std::vector<Matrix>> kraus;
  };
  std::vector<StepTables> tables;
  for (Index j = 0; j < k; ++j) {
    const StepFrame& sf = frame.steps[static_cast<std::size_t>(j)];
    StepTables t;
    t.by_setting.resize(static_cast<std::size_t>(sf.num_settings()));
    t.kraus.resize(sf.elements.size());
    for (std::size_t e = 0; e < sf.elements.size(); ++e) {
      t.by_setting[static_cast<std::size_t>(sf.setting[e])].push_back(e);
      t.kraus[e] = detail::kraus_from_choi(sf.elements[e]);
    }
    tables.push_back(std::move(t));
  }
  const TerminalFrame& tf = frame.terminal;
  std::vector<std::vector<std::size_t>> term_by_setting(
      tf.setting_weight.size());
  for (std::size_t e = 0; e < tf.effects.size(); ++e)
    term_by_setting[static_cast<std::size_t>(tf.setting[e])].push_back(e);

  ShadowSet out;
  out.frame = frame;
  out.snapshots.reserve(n);
  for (std::size_t shot = 0; shot < n; ++shot) {
    Vector psi = es.eigenvectors().col(
        static_cast<Index>(rng.sample_discrete(branch_w)));
    Snapshot snap;
    snap.element.resize(static_cast<std::size_t>(k));
    for (Index j = 0; j < k; ++j) {
      const StepTables& t = tables[static_cast<std::size_t>(j)];
      const StepFrame& sf = frame.steps[static_cast<std::size_t>(j)];
      const std::size_t setting = rng.sample_discrete(sf.setting_weight);
      // branch weights over (element in setting, kraus index)
      std::vector<double> w;
      std::vector<std::pair<std::size_t, std::size_t>> which;
      for (std::size_t e : t.by_setting[setting])
        for (std::size_t m = 0; m < t.kraus[e].size(); ++m) {
          const Vector phi =
              detail::apply_system_kraus(t.kraus[e][m], psi, d, de);
          w.push_back(phi.squaredNorm());
          which.emplace_back(e, m);
        }
      const std::size_t pick = rng.sample_discrete(w);
      const auto [e, m] = which[pick];
      Vector phi = detail::apply_system_kraus(t.kraus[e][m], psi, d, de);
      const double nrm = phi.norm();
      if (nrm <= 0.0)
        throw std::runtime_error(
            "sample_shadow_trajectories: zero-probability branch selected");
      psi = (u_steps[static_cast<std::size_t>(j)] * phi) / nrm;
      snap.element[static_cast<std::size_t>(j)] =
          static_cast<std::uint16_t>(e);
    }
    const std::size_t tsetting = rng.sample_discrete(tf.setting_weight);
    std::vector<double> w;
    for (std::size_t e : term_by_setting[tsetting]) {
      Complex p = 0.0;
      const Matrix& eff = tf.effects[e];
      for (Index env = 0; env < de; ++env)
        for (Index a = 0; a < d; ++a)
          for (Index b = 0; b < d; ++b)
            p += std::conj(psi(a * de + env)) * eff(a, b) * psi(b * de + env);
      w.push_back(std::max(0.0, p.real()));
    }
    snap.terminal = static_cast<std::uint16_t>(
        term_by_setting[tsetting][rng.sample_discrete(w)]);
    out.snapshots.push_back(std::move(snap));
  }
  return out;
}

}  // namespace ptshadow

#endif  // PTSHADOW_SAMPLING_HPP
