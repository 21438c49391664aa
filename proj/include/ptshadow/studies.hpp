/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_STUDIES_HPP
#define PTSHADOW_STUDIES_HPP

#include <map>
#include <string>
#include <vector>

#include "ptshadow/fcs.hpp"
#include "ptshadow/metrics.hpp"
#include "ptshadow/scenario.hpp"
#include "ptshadow/shadows.hpp"

namespace ptshadow {

// ---------------------------------------------------------------------------
// Linear shadow estimates of multi-time observables and leg marginals

/// Plain-mean estimate with its standard error.
struct MeanEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Mean and standard error of Tr[O Upsilon]/d^k over the snapshots, with O
/// given per leg as in precompute_factors (obs[0] on o_k, then slot pairs).
inline MeanEstimate shadow_mean(const ShadowSet& shadow,
                                const std::vector<Matrix>& obs) {
  const ObservableFactors f = precompute_factors(shadow.frame, obs);
  double sum = 0.0, sumsq = 0.0;
  for (const auto& s : shadow.snapshots) {
    const double v = snapshot_value(f, s);
    sum += v;
    sumsq += v * v;
  }
  const double n = static_cast<double>(shadow.snapshots.size());
  MeanEstimate e;
  e.value = sum / n;
  const double var = std::max(0.0, sumsq / n - e.value * e.value);
  e.stderr_ = std::sqrt(var / n);
  return e;
}

/// Per-leg operator list with `a` on leg `la`, `b` on leg `lb` (labels as in
/// process_leg_labels) and identity elsewhere.
inline std::vector<Matrix> two_point_observable(Index k, Index d,
                                                const std::string& la,
                                                const Matrix& a,
                                                const std::string& lb,
                                                const Matrix& b) {
  const auto labels = process_leg_labels(k);
  std::vector<Matrix> obs(labels.size(), identity(d));
  bool fa = false, fb = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == la) {
      obs[i] = a;
      fa = true;
    }
    if (labels[i] == lb) {
      obs[i] = b;
      fb = true;
    }
  }
  if (!fa || !fb)
    throw std::invalid_argument("two_point_observable: unknown leg label");
  return obs;
}

/// Dual-frame (linear-inversion) estimate of marginal(Upsilon, keep) from
/// shadow snapshots: the snapshot tensor factorizes over legs, so tracing
/// reduces to per-slot partial traces and scalar factors. Snapshots sharing
/// the element indices of the kept slots are pooled before the kron, so the
/// cost is (distinct pooled keys) x (marginal dimension).
class LegMarginalEstimator {
 public:
  LegMarginalEstimator(const InstrumentFrame& frame,
                       std::vector<std::string> keep)
      : frame_(frame), keep_(std::move(keep)) {
    const Index k = frame_.num_steps();
    const Index d = frame_.local_dim;
    const LegShape pair_shape({d, d}, {"in", "out"});
    keep_terminal_ = kept("o" + std::to_string(k));
    // per slot: which legs of the (i_{j+1}, o_j) dual survive
    for (Index j = k - 1; j >= 0; --j) {
      SlotRole role;
      role.slot = j;
      role.keep_in = kept("i" + std::to_string(j + 1));
      role.keep_out = kept("o" + std::to_string(j));
      if (!role.keep_in) ++traced_inputs_;
      const auto& duals = frame_.steps[static_cast<std::size_t>(j)].duals;
      for (const auto& w : duals) {
        if (role.keep_in && role.keep_out) {
          role.factors.push_back(w);
        } else if (role.keep_in) {
          role.factors.push_back(partial_trace(w, pair_shape, {"in"}));
        } else if (role.keep_out) {
          role.factors.push_back(partial_trace(w, pair_shape, {"out"}));
        } else {
          role.scalars.push_back(w.trace());
        }
      }
      if (role.keep_in || role.keep_out) slots_.push_back(std::move(role));
      else scalar_slots_.push_back(std::move(role));
    }
    dim_ = 1;
    if (keep_terminal_) dim_ *= d;
    for (const auto& r : slots_) {
      if (r.keep_in) dim_ *= d;
      if (r.keep_out) dim_ *= d;
    }
  }

  /// Mean of the per-snapshot marginal estimates, optionally reweighted
  /// (weights default to 1; bootstrap replicas pass resampled counts).
  Matrix mean(const ShadowSet& shadow,
              const std::vector<double>* weights = nullptr) const {
    const Index d = frame_.local_dim;
    std::map<std::uint64_t, double> pooled;
    double total = 0.0;
    for (std::size_t i = 0; i < shadow.snapshots.size(); ++i) {
      const Snapshot& s = shadow.snapshots[i];
      const double w = weights ? (*weights)[i] : 1.0;
      if (w == 0.0) continue;
      double scalar = w;
      for (const auto& r : scalar_slots_)
        scalar *= std::real(r.scalars[s.element[static_cast<std::size_t>(r.slot)]]);
      std::uint64_t key = keep_terminal_ ? s.terminal : 0;
      for (const auto& r : slots_)
        key = key * 65536 + s.element[static_cast<std::size_t>(r.slot)];
      pooled[key] += scalar;
      total += w;
    }
    Matrix acc = Matrix::Zero(dim_, dim_);
    for (const auto& [key, w] : pooled) {
      std::uint64_t rem = key;
      std::vector<std::size_t> idx(slots_.size());
      for (std::size_t r = slots_.size(); r-- > 0;) {
        idx[r] = rem % 65536;
        rem /= 65536;
      }
      Matrix f = keep_terminal_
                     ? frame_.terminal.duals[static_cast<std::size_t>(rem)]
                     : Matrix::Ones(1, 1);
      if (!keep_terminal_ && rem != 0)
        throw std::logic_error("LegMarginalEstimator: key overflow");
      for (std::size_t r = 0; r < slots_.size(); ++r)
        f = kron(f, slots_[r].factors[idx[r]]);
      acc += w * f;
    }
    const double norm =
        total * std::pow(static_cast<double>(d), traced_inputs_);
    return acc / norm;
  }

  Index dim() const { return dim_; }

 private:
  bool kept(const std::string& label) const {
    return std::find(keep_.begin(), keep_.end(), label) != keep_.end();
  }

  struct SlotRole {
    Index slot = 0;
    bool keep_in = false, keep_out = false;
    std::vector<Matrix> factors;    // per element, the surviving dual block
    std::vector<Complex> scalars;   // per element, the full trace
  };

  InstrumentFrame frame_;
  std::vector<std::string> keep_;
  std::vector<SlotRole> slots_;         // latest kept slot first
  std::vector<SlotRole> scalar_slots_;  // fully traced slots
  bool keep_terminal_ = false;
  Index traced_inputs_ = 0;
  Index dim_ = 1;
};

// ---------------------------------------------------------------------------
// Correlated-noise pair statistics

/// Fig.-4-style statistics of one ordered step pair (i, j), i < j, with
/// bootstrap standard deviations for the nonlinear ones.
struct PairStats {
  Index i = 0, j = 0;
  double negativity = 0.0, negativity_sigma = 0.0;
  double trace_distance = 0.0, trace_distance_sigma = 0.0;
  // correlators <P_j Q_i> - <P_j><Q_i> of the outputs at t_j and t_i
  double zz = 0.0, zz_sigma = 0.0;
  double xx = 0.0, xx_sigma = 0.0;
  double zx = 0.0, zx_sigma = 0.0;  // Z at t_j, X at t_i
  double xz = 0.0, xz_sigma = 0.0;
};

namespace studies_detail {

struct PairShapes {
  LegShape pair;     // (o_j, i_j, o_i, i_i)
  LegShape single;   // (o, i)
};

inline PairShapes pair_shapes(Index d) {
  PairShapes s{LegShape({d, d, d, d}, {"oj", "ij", "oi", "ii"}),
               LegShape({d, d}, {"o", "i"})};
  return s;
}

/// Negativity and trace-distance-to-product of a sampled pair Choi; inputs
/// are the raw (unnormalized, trace ~1 after marginal()) estimates.
inline void pair_shape_stats(const Matrix& pair, const Matrix& mi,
                             const Matrix& mj, Index d, double& neg,
                             double& td) {
  const PairShapes sh = pair_shapes(d);
  Matrix rho = hermitize(pair);
  rho /= rho.trace().real();
  const Matrix pt = partial_transpose(rho, sh.pair, {"oj", "ij"});
  neg = 0.5 * (trace_norm(pt) - 1.0);
  Matrix prod = kron(hermitize(mj), hermitize(mi));
  td = 0.5 * trace_norm(rho - prod / prod.trace().real());
}

}  // namespace studies_detail

/// Correlated-noise statistics of the ordered pair (i, j), 1 <= i < j <= k,
/// estimated linearly from shadow snapshots. `bootstrap` resamples the
/// snapshot set to put a standard deviation on negativity/trace distance.
inline PairStats pair_stats_from_shadow(const ShadowSet& shadow, Index i,
                                        Index j, Index bootstrap, Rng& rng) {
  const Index k = shadow.frame.num_steps();
  const Index d = shadow.frame.local_dim;
  if (!(1 <= i && i < j && j <= k))
    throw std::invalid_argument("pair_stats_from_shadow: need 1 <= i < j <= k");
  PairStats st;
  st.i = i;
  st.j = j;

  const std::string oi = "o" + std::to_string(i), ii = "i" + std::to_string(i);
  const std::string oj = "o" + std::to_string(j), ij = "i" + std::to_string(j);
  const LegMarginalEstimator est_pair(shadow.frame, {oj, ij, oi, ii});
  const LegMarginalEstimator est_i(shadow.frame, {oi, ii});
  const LegMarginalEstimator est_j(shadow.frame, {oj, ij});

  studies_detail::pair_shape_stats(est_pair.mean(shadow), est_i.mean(shadow),
                                   est_j.mean(shadow), d, st.negativity,
                                   st.trace_distance);
  if (bootstrap > 0) {
    const std::size_t n = shadow.snapshots.size();
    double sn = 0.0, sn2 = 0.0, st1 = 0.0, st2 = 0.0;
    for (Index b = 0; b < bootstrap; ++b) {
      std::vector<double> w(n, 0.0);
      for (std::size_t s = 0; s < n; ++s) w[rng.uniform_int(n)] += 1.0;
      double neg, td;
      studies_detail::pair_shape_stats(est_pair.mean(shadow, &w),
                                       est_i.mean(shadow, &w),
                                       est_j.mean(shadow, &w), d, neg, td);
      sn += neg;
      sn2 += neg * neg;
      st1 += td;
      st2 += td * td;
    }
    const double nb = static_cast<double>(bootstrap);
    st.negativity_sigma = std::sqrt(std::max(0.0, sn2 / nb - (sn / nb) * (sn / nb)));
    st.trace_distance_sigma =
        std::sqrt(std::max(0.0, st2 / nb - (st1 / nb) * (st1 / nb)));
  }

  const Matrix z = gates::pauli('Z'), x = gates::pauli('X');
  const auto corr = [&](const Matrix& pj, const Matrix& qi, double& val,
                        double& sig) {
    const MeanEstimate joint =
        shadow_mean(shadow, two_point_observable(k, d, oj, pj, oi, qi));
    const MeanEstimate mj =
        shadow_mean(shadow, two_point_observable(k, d, oj, pj, oi, identity(d)));
    const MeanEstimate mi =
        shadow_mean(shadow, two_point_observable(k, d, oj, identity(d), oi, qi));
    val = joint.value - mj.value * mi.value;
    // first-order error propagation; the joint term dominates
    sig = std::sqrt(joint.stderr_ * joint.stderr_ +
                    std::pow(mj.value * mi.stderr_, 2) +
                    std::pow(mi.value * mj.stderr_, 2));
  };
  corr(z, z, st.zz, st.zz_sigma);
  corr(x, x, st.xx, st.xx_sigma);
  corr(z, x, st.zx, st.zx_sigma);
  corr(x, z, st.xz, st.xz_sigma);
  return st;
}

/// Exact pair statistics from the dense process (oracle for the sampled
/// path); sigmas are zero.
inline PairStats pair_stats_exact(const ProcessTensor& pt, Index i, Index j) {
  const Index d = pt.local_dim;
  PairStats st;
  st.i = i;
  st.j = j;
  const std::string oi = "o" + std::to_string(i), ii = "i" + std::to_string(i);
  const std::string oj = "o" + std::to_string(j), ij = "i" + std::to_string(j);
  studies_detail::pair_shape_stats(marginal(pt, {oj, ij, oi, ii}),
                                   marginal(pt, {oi, ii}),
                                   marginal(pt, {oj, ij}), d, st.negativity,
                                   st.trace_distance);
  const Matrix z = gates::pauli('Z'), x = gates::pauli('X');
  const auto corr = [&](const Matrix& pj, const Matrix& qi) {
    const Matrix joint = marginal(pt, {oj, oi});
    const Matrix sj = marginal(pt, {oj});
    const Matrix si = marginal(pt, {oi});
    return std::real((kron(pj, qi) * joint).trace()) -
           std::real((pj * sj).trace()) * std::real((qi * si).trace());
  };
  st.zz = corr(z, z);
  st.xx = corr(x, x);
  st.zx = corr(z, x);
  st.xz = corr(x, z);
  return st;
}

// ---------------------------------------------------------------------------
// Window non-Markovianity curves

struct WindowNm {
  Index start = 0;
  double negativity = 0.0;
  double qmi = 0.0;
};

/// Negativity and QMI across the cut separating the latest step of each
/// window marginal from its past.
inline std::vector<WindowNm> window_nm_curves(const MarginalSet& ms) {
  std::vector<WindowNm> out;
  const std::string top_o = "o" + std::to_string(ms.window);
  const std::string top_i = "i" + std::to_string(ms.window);
  for (Index j = 0; j < ms.num_windows(); ++j) {
    const ProcessTensor w(ms.marginals[static_cast<std::size_t>(j)], ms.window,
                          ms.local_dim);
    const NmMeasures m = nm_measures(w, {top_o, top_i});
    out.push_back({j, m.negativity, m.qmi});
  }
  return out;
}

// ---------------------------------------------------------------------------
// MPO cross-validation (Hellinger tables)

struct ValidationRow {
  Index sequence = 0;
  Index window_len = 0;
  Index start = 0;
  double fidelity = 0.0;
};

/// For each random fixed-instrument sequence, compare the MPO-predicted
/// outcome distribution of every length-1..max_len window against a fresh
/// sample (or the exact distribution when shots == 0) drawn from the true
/// dynamics, via Hellinger fidelity.
inline std::vector<ValidationRow> validate_mpo(
    const MpoProcess& mpo, const ChainDynamics& dyn,
    const InstrumentFrame& frame, Index n_sequences, std::size_t shots,
    Index max_len, Rng& rng) {
  const Index k = mpo.steps;
  if (frame.num_steps() != k)
    throw std::invalid_argument("validate_mpo: frame/MPO step mismatch");
  std::vector<ValidationRow> rows;
  const auto normalize = [](std::vector<double> p) {
    double s = 0.0;
    for (double& x : p) s += (x = std::max(0.0, x));
    if (s <= 0.0) throw std::runtime_error("validate_mpo: empty distribution");
    for (double& x : p) x /= s;
    return p;
  };
  for (Index seq = 0; seq < n_sequences; ++seq) {
    std::vector<Instrument> controls;
    for (Index j = 0; j < k; ++j) {
      const auto& sf = frame.steps[static_cast<std::size_t>(j)];
      controls.push_back(setting_instrument(
          sf, static_cast<Index>(rng.uniform_int(
                  static_cast<std::uint64_t>(sf.num_settings())))));
    }
    const std::vector<Matrix> povm = setting_povm(
        frame.terminal,
        static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(
            frame.terminal.setting_weight.size()))));
    for (Index len = 1; len <= std::min(max_len, k); ++len) {
      for (Index start = 0; start + len <= k; ++start) {
        const std::vector<double> pred =
            normalize(window_distribution(mpo, controls, start, len));
        std::vector<double> truth =
            sequence_distribution(dyn, controls, povm, start, len);
        if (shots > 0) truth = sample_counts(truth, shots, rng);
        rows.push_back(
            {seq, len, start, hellinger_fidelity(pred, normalize(truth))});
      }
    }
  }
  return rows;
}

}  // namespace ptshadow

#endif  // PTSHADOW_STUDIES_HPP
