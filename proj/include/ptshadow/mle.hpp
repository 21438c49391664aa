/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_MLE_HPP
#define PTSHADOW_MLE_HPP

#include "ptshadow/shadows.hpp"

namespace ptshadow {

inline constexpr double kProbFloor = 1e-12;

/// Maximum-likelihood process tomography problem. The model probability of
/// sequence (mu, i) is p = Tr[Upsilon (Pi_i (x) B_{k-1}^{mu T} (x) ... (x)
/// B_0^{mu T})]; any sampling weights must be folded into the operators so
/// that p is the full record probability. Counts are stored flat with slot 0
/// slowest, slot k-1 next, terminal outcome fastest (the record-table order).
struct MleProblem {
  std::vector<Matrix> terminal_effects;               // on leg o_k
  std::vector<std::vector<ChoiOperator>> step_basis;  // [slot 0 .. k-1]
  std::vector<double> counts;
  ProcessTensor initial;

  Index steps() const { return static_cast<Index>(step_basis.size()); }

  Index local_dim() const {
    return terminal_effects.empty() ? 0 : terminal_effects.front().rows();
  }

  std::size_t num_sequences() const {
    std::size_t n = terminal_effects.size();
    for (const auto& b : step_basis) n *= b.size();
    return n;
  }

  std::size_t flat_index(const std::vector<std::size_t>& mu,
                         std::size_t i) const {
    if (mu.size() != step_basis.size())
      throw std::invalid_argument("MleProblem: one basis index per slot");
    std::size_t flat = 0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      if (mu[j] >= step_basis[j].size())
        throw std::invalid_argument("MleProblem: basis index out of range");
      flat = flat * step_basis[j].size() + mu[j];
    }
    return flat * terminal_effects.size() + i;
  }

  void validate() const {
    if (terminal_effects.empty())
      throw std::invalid_argument("MleProblem: no terminal effects");
    const Index d = local_dim();
    for (const auto& e : terminal_effects)
      if (e.rows() != d || e.cols() != d)
        throw std::invalid_argument("MleProblem: terminal dimension mismatch");
    for (const auto& slot : step_basis) {
      if (slot.empty())
        throw std::invalid_argument("MleProblem: empty step basis");
      for (const auto& b : slot)
        if (b.dim_in != d || b.dim_out != d)
          throw std::invalid_argument("MleProblem: step dimension mismatch");
    }
    if (counts.size() != num_sequences())
      throw std::invalid_argument("MleProblem: counts size mismatch");
    double total = 0.0;
    for (double n : counts) {
      if (!(n >= 0.0) || !std::isfinite(n))
        throw std::invalid_argument("MleProblem: counts must be finite and >= 0");
      total += n;
    }
    if (total <= 0.0)
      throw std::invalid_argument("MleProblem: at least one nonzero count");
    if (initial.steps != steps() || initial.local_dim != d)
      throw std::invalid_argument("MleProblem: initial guess shape mismatch");
  }
};

/// Maximally mixed (fully depolarizing) process tensor, the default initial
/// guess: identity scaled to trace d^k.
inline ProcessTensor maximally_mixed_process(Index k, Index d) {
  const Index dim = static_cast<Index>(std::pow(d, 2 * k + 1));
  const double c = std::pow(static_cast<double>(d), -(static_cast<double>(k) + 1));
  return ProcessTensor(c * Matrix::Identity(dim, dim), k, d);
}

/// Build an MleProblem whose sequences are the complete outcome records of an
/// instrument frame, with the setting weights folded into the observables so
/// model probabilities match the sampled record distribution.
inline MleProblem problem_from_frame(const InstrumentFrame& frame,
                                     std::vector<double> counts,
                                     ProcessTensor initial) {
  MleProblem p;
  for (std::size_t e = 0; e < frame.terminal.effects.size(); ++e)
    p.terminal_effects.push_back(frame.terminal.element_weight(e) *
                                 frame.terminal.effects[e]);
  for (const auto& step : frame.steps) {
    std::vector<ChoiOperator> slot;
    for (std::size_t e = 0; e < step.elements.size(); ++e)
      slot.emplace_back(step.element_weight(e) * step.elements[e].matrix,
                        frame.local_dim, frame.local_dim);
    p.step_basis.push_back(std::move(slot));
  }
  p.counts = std::move(counts);
  p.initial = std::move(initial);
  p.validate();
  return p;
}

/// Histogram a shadow set into flat record counts (the MleProblem order).
inline std::vector<double> counts_from_shadow(const ShadowSet& shadow) {
  std::size_t total = shadow.frame.terminal.effects.size();
  for (const auto& s : shadow.frame.steps) total *= s.elements.size();
  std::vector<double> counts(total, 0.0);
  for (const auto& snap : shadow.snapshots) {
    std::size_t flat = 0;
    for (std::size_t j = 0; j < snap.element.size(); ++j)
      flat = flat * shadow.frame.steps[j].elements.size() + snap.element[j];
    flat = flat * shadow.frame.terminal.effects.size() + snap.terminal;
    counts[flat] += 1.0;
  }
  return counts;
}

namespace detail {

/// Contract the slowest (head) leg block of m against a head factor f:
/// out[A,B] = sum_{a,b} f(b,a) m[(a,A),(b,B)]. Applying this for every kron
/// factor in turn computes Tr[m (f_0 (x) f_1 (x) ...)] leg by leg.
inline Matrix contract_head(const Matrix& m, const Matrix& f) {
  const Index fd = f.rows();
  const Index r = m.rows() / fd;
  Matrix out = Matrix::Zero(r, r);
  for (Index a = 0; a < fd; ++a)
    for (Index b = 0; b < fd; ++b) {
      const Complex w = f(b, a);
      if (w == Complex(0.0)) continue;
      out.noalias() += w * m.block(a * r, b * r, r, r);
    }
  return out;
}

/// Trace out the slowest leg block of dimension `head`.
inline Matrix trace_head(const Matrix& m, Index head) {
  const Index r = m.rows() / head;
  Matrix out = Matrix::Zero(r, r);
  for (Index t = 0; t < head; ++t) out += m.block(t * r, t * r, r, r);
  return out;
}

inline void probability_tree(const MleProblem& pr, const Matrix& m,
                             std::size_t level, std::size_t base,
                             const std::vector<std::size_t>& stride,
                             std::vector<double>& out) {
  const std::size_t k = pr.step_basis.size();
  if (level == 0) {
    for (std::size_t i = 0; i < pr.terminal_effects.size(); ++i)
      probability_tree(pr, contract_head(m, pr.terminal_effects[i]), 1,
                       base + i, stride, out);
    return;
  }
  if (level == k + 1) {
    out[base] = m(0, 0).real();
    return;
  }
  const std::size_t slot = k - level;  // level 1 contracts slot k-1
  const auto& basis = pr.step_basis[slot];
  for (std::size_t mu = 0; mu < basis.size(); ++mu)
    probability_tree(pr, contract_head(m, basis[mu].matrix.transpose()),
                     level + 1, base + mu * stride[slot], stride, out);
}

/// Reverse pass of the tree: sum of c[seq] * O_seq over all sequences,
/// built bottom-up so shared kron suffixes are formed once.
inline Matrix gradient_tree(const MleProblem& pr, std::size_t level,
                            std::size_t base,
                            const std::vector<std::size_t>& stride,
                            const std::vector<double>& c) {
  const std::size_t k = pr.step_basis.size();
  if (level == 0) {
    Matrix acc;
    for (std::size_t i = 0; i < pr.terminal_effects.size(); ++i) {
      const Matrix part = kron(pr.terminal_effects[i],
                               gradient_tree(pr, 1, base + i, stride, c));
      if (acc.size() == 0)
        acc = part;
      else
        acc += part;
    }
    return acc;
  }
  if (level == k + 1) {
    Matrix one(1, 1);
    one(0, 0) = c[base];
    return one;
  }
  const std::size_t slot = k - level;
  const auto& basis = pr.step_basis[slot];
  Matrix acc;
  for (std::size_t mu = 0; mu < basis.size(); ++mu) {
    const Matrix part =
        kron(basis[mu].matrix.transpose(),
             gradient_tree(pr, level + 1, base + mu * stride[slot], stride, c));
    if (acc.size() == 0)
      acc = part;
    else
      acc += part;
  }
  return acc;
}

inline std::vector<std::size_t> sequence_strides(const MleProblem& pr) {
  const std::size_t k = pr.step_basis.size();
  std::vector<std::size_t> stride(k);
  std::size_t acc = pr.terminal_effects.size();
  for (std::size_t j = k; j-- > 0;) {
    stride[j] = acc;
    acc *= pr.step_basis[j].size();
  }
  return stride;
}

}  // namespace detail

/// Model probabilities of every sequence, in the flat counts order.
inline std::vector<double> probabilities(const Matrix& upsilon,
                                         const MleProblem& problem) {
  std::vector<double> p(problem.num_sequences(), 0.0);
  detail::probability_tree(problem, upsilon, 0, 0,
                           detail::sequence_strides(problem), p);
  return p;
}

/// Negative log-likelihood f = sum -n ln p, probabilities floored at 1e-12.
inline double log_likelihood(const Matrix& upsilon, const MleProblem& problem) {
  const std::vector<double> p = probabilities(upsilon, problem);
  double f = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (problem.counts[s] == 0.0) continue;
    f -= problem.counts[s] * std::log(std::max(p[s], kProbFloor));
  }
  return f;
}

/// Euclidean gradient of f over Hermitian matrices: the Hermitization of
/// -sum (n/p) O with O the sequence observable. Descent steps use
/// Upsilon - t * gradient.
inline Matrix gradient(const Matrix& upsilon, const MleProblem& problem) {
  const std::vector<double> p = probabilities(upsilon, problem);
  std::vector<double> c(p.size(), 0.0);
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (problem.counts[s] == 0.0) continue;
    // below the floor f uses the constant ln(floor), so the term's
    // derivative vanishes
    if (p[s] < kProbFloor) continue;
    c[s] = -problem.counts[s] / p[s];
  }
  const Matrix g = detail::gradient_tree(problem, 0, 0,
                                         detail::sequence_strides(problem), c);
  return hermitize(g);
}

// ---------------------------------------------------------------------------
// Physical projection

struct ProjectionOptions {
  int max_cycles = 200;
  double residual = 1e-8;
};

struct ProjectionReport {
  int cycles = 0;
  double residual = 0.0;
};

namespace detail {

/// Metric projection onto { PSD, trace = target }: the spectrum is projected
/// onto the scaled simplex (shift-and-clip), which is the exact Frobenius
/// projection by unitary invariance. A plain rescale after clipping is not a
/// projection and creates spurious fixed points in the Dykstra iteration.
inline Matrix project_psd_trace(const Matrix& m, double target_trace) {
  auto es = herm_eig(hermitize(m), 1e10);
  RealVector lam = es.eigenvalues();
  const Index n = lam.size();
  // find theta with sum max(lam - theta, 0) = target; scan the sorted
  // spectrum (ascending from Eigen) from the top
  double suffix = 0.0;
  double theta = (lam.sum() - target_trace) / static_cast<double>(n);
  for (Index i = n; i-- > 0;) {
    suffix += lam(i);
    const Index active = n - i;
    const double cand = (suffix - target_trace) / static_cast<double>(active);
    if (i == 0 || lam(i - 1) <= cand) {
      theta = cand;
      break;
    }
  }
  lam = (lam.array() - theta).cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

/// Orthogonal projection onto the causality (containment) subspace
/// { Tr_{o_j}[Upsilon_{j:0}] = I_{i_j} (x) Upsilon_{j-1:0} for all j }.
/// Each level's constraint map C_j annihilates the other levels' corrections,
/// so one sweep of the closed-form per-level projections is exact.
inline Matrix project_causal(const Matrix& m, Index k, Index d) {
  Matrix x = m;
  for (Index j = k; j >= 1; --j) {
    // prefix = future legs (o_k,i_k,...,i_{j+1}) plus o_j
    const Index prefix =
        static_cast<Index>(std::pow(d, 2 * (k - j))) * d;
    const Matrix y1 = trace_head(x, prefix);              // on (i_j, past)
    const Matrix z = trace_head(y1, d);                   // on past
    const Matrix cy =
        y1 - kron(identity(d), z) / static_cast<double>(d);
    x -= kron(identity(prefix), cy) / static_cast<double>(prefix);
  }
  return x;
}

}  // namespace detail

/// Project a Hermitian matrix onto the physical set (PSD, trace d^k, causal)
/// by Dykstra-style alternation between the cone step and the causal
/// subspace projection.
inline ProcessTensor project_physical(const Matrix& m, Index k, Index d,
                                      ProjectionOptions opts = {},
                                      ProjectionReport* report = nullptr) {
  const Index dim = static_cast<Index>(std::pow(d, 2 * k + 1));
  if (m.rows() != dim || m.cols() != dim)
    throw std::invalid_argument("project_physical: dimension mismatch");
  if (!is_hermitian(m, 1e-8))
    throw std::invalid_argument("project_physical: input is not Hermitian");
  const double target = std::pow(static_cast<double>(d), k);
  Matrix x = hermitize(m);
  Matrix p = Matrix::Zero(dim, dim), q = Matrix::Zero(dim, dim);
  Matrix y;
  double res = 0.0;
  int cycle = 0;
  for (; cycle < opts.max_cycles; ++cycle) {
    y = detail::project_psd_trace(x + p, target);
    p = x + p - y;
    x = detail::project_causal(y + q, k, d);
    q = y + q - x;
    res = (y - x).cwiseAbs().maxCoeff();
    if (res < opts.residual) break;
  }
  if (report) {
    report->cycles = cycle + 1;
    report->residual = res;
  }
  // y is exactly PSD with the right trace; its causality defect is bounded
  // by the convergence residual
  return ProcessTensor(y, k, d);
}

// ---------------------------------------------------------------------------
// Projected gradient fit

struct FitOptions {
  Index max_iters = 500;
  double step0 = 0.0;  // 0 -> 1/L from the curvature scale sum n/p^2
  double backtrack = 0.5;
  double armijo = 1e-4;
  double tol = 1e-9;
  ProjectionOptions projection;
};

struct IterationRecord {
  Index iter = 0;
  double f = 0.0;
  double step = 0.0;
};

struct MleResult {
  ProcessTensor estimate;
  double log_likelihood = 0.0;
  std::vector<IterationRecord> trace;
  bool converged = false;
};

namespace detail {

inline double observable_norm_bound(const MleProblem& pr) {
  double bound = 0.0;
  for (const auto& e : pr.terminal_effects)
    bound = std::max(bound, e.squaredNorm());
  for (const auto& slot : pr.step_basis) {
    double best = 0.0;
    for (const auto& b : slot) best = std::max(best, b.matrix.squaredNorm());
    bound *= best;
  }
  return bound;
}

}  // namespace detail

/// Projected gradient descent with Armijo backtracking on the negative
/// log-likelihood over the physical set.
inline MleResult fit(const MleProblem& problem, FitOptions opts = {}) {
  problem.validate();
  const Index k = problem.steps();
  const Index d = problem.local_dim();

  MleResult res;
  res.estimate =
      project_physical(problem.initial.choi, k, d, opts.projection);
  Matrix x = res.estimate.choi;
  double f = log_likelihood(x, problem);
  res.trace.push_back({0, f, 0.0});

  double t = opts.step0;
  if (t <= 0.0) {
    // Lipschitz estimate of the log-likelihood Hessian
    const std::vector<double> p0 = probabilities(x, problem);
    double curvature = 0.0;
    for (std::size_t s = 0; s < p0.size(); ++s) {
      if (problem.counts[s] == 0.0) continue;
      const double ps = std::max(p0[s], kProbFloor);
      curvature += problem.counts[s] / (ps * ps);
    }
    const double l = curvature * detail::observable_norm_bound(problem);
    t = l > 0.0 ? 1.0 / l : 1.0;
  }

  for (Index it = 1; it <= opts.max_iters; ++it) {
    const Matrix g = gradient(x, problem);
    double f_new = f;
    Matrix x_new = x;
    bool accepted = false;
    bool stationary = false;
    double last_dot = 0.0;
    while (t > 1e-18) {
      const ProcessTensor cand =
          project_physical(x - t * g, k, d, opts.projection);
      const Matrix delta = cand.choi - x;
      const double dot = (g * delta).trace().real();
      last_dot = dot;
      const double cand_f = log_likelihood(cand.choi, problem);
      if (cand_f <= f + opts.armijo * dot && cand_f <= f) {
        x_new = cand.choi;
        f_new = cand_f;
        accepted = true;
        break;
      }
      if (delta.cwiseAbs().maxCoeff() <
          std::max(1e-12, 20.0 * opts.projection.residual)) {
        // projected step no longer moves: stationary point of the
        // constrained problem
        accepted = true;
        stationary = true;
        break;
      }
      t *= opts.backtrack;
    }
    if (!accepted) {
      // the projected step fails the descent test at every scale: the
      // iterate is stationary within the accuracy of the projection
      (void)last_dot;
      res.converged = true;
      break;
    }
    if (stationary) {
      res.converged = true;
      res.trace.push_back({it, f, t});
      break;
    }
    const double decrease = (f - f_new) / std::max(std::abs(f), 1.0);
    x = x_new;
    f = f_new;
    res.trace.push_back({it, f, t});
    if (decrease < opts.tol) {
      res.converged = true;
      break;
    }
    t /= opts.backtrack;  // gentle growth after an accepted step
  }

  res.estimate = ProcessTensor(x, k, d);
  res.log_likelihood = f;
  return res;
}

}  // namespace ptshadow

#endif  // PTSHADOW_MLE_HPP
