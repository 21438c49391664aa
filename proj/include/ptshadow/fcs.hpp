/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_FCS_HPP
#define PTSHADOW_FCS_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ptshadow/mle.hpp"

namespace ptshadow {

// ---------------------------------------------------------------------------
// Vectorized window reshapes
//
// A window operator on n legs (each of dimension d, ordered latest first) is
// treated as a tensor with one vectorized index of size q = d^2 per leg, the
// per-leg index being a = r*d + c. All stitching below happens on matrices
// obtained by grouping the top `split` legs into rows.

namespace fcs_detail {

inline Index ipow(Index b, Index e) {
  Index r = 1;
  for (Index i = 0; i < e; ++i) r *= b;
  return r;
}

inline void digits(Index flat, Index base, Index n, std::vector<Index>& out) {
  out.resize(static_cast<std::size_t>(n));
  for (Index s = n; s-- > 0;) {
    out[static_cast<std::size_t>(s)] = flat % base;
    flat /= base;
  }
}

/// Reshape an n-leg operator into a q^split x q^(n-split) matrix with the
/// top legs as rows.
inline Matrix to_vec_matrix(const Matrix& m, Index nlegs, Index d,
                            Index split) {
  const Index dim = ipow(d, nlegs);
  if (m.rows() != dim || m.cols() != dim)
    throw std::invalid_argument("to_vec_matrix: dimension mismatch");
  const Index q = d * d;
  Matrix out = Matrix::Zero(ipow(q, split), ipow(q, nlegs - split));
  std::vector<Index> rs, cs;
  for (Index r = 0; r < dim; ++r) {
    digits(r, d, nlegs, rs);
    for (Index c = 0; c < dim; ++c) {
      digits(c, d, nlegs, cs);
      Index row = 0, col = 0;
      for (Index s = 0; s < split; ++s)
        row = row * q + rs[static_cast<std::size_t>(s)] * d +
              cs[static_cast<std::size_t>(s)];
      for (Index s = split; s < nlegs; ++s)
        col = col * q + rs[static_cast<std::size_t>(s)] * d +
              cs[static_cast<std::size_t>(s)];
      out(row, col) = m(r, c);
    }
  }
  return out;
}

/// Inverse of to_vec_matrix for a fully vectorized (single-row-group) tensor.
inline Matrix from_vec(const Vector& v, Index nlegs, Index d) {
  const Index dim = ipow(d, nlegs);
  const Index q = d * d;
  if (v.size() != ipow(q, nlegs))
    throw std::invalid_argument("from_vec: dimension mismatch");
  Matrix out(dim, dim);
  std::vector<Index> rs, cs;
  for (Index r = 0; r < dim; ++r) {
    digits(r, d, nlegs, rs);
    for (Index c = 0; c < dim; ++c) {
      digits(c, d, nlegs, cs);
      Index flat = 0;
      for (Index s = 0; s < nlegs; ++s)
        flat = flat * q + rs[static_cast<std::size_t>(s)] * d +
               cs[static_cast<std::size_t>(s)];
      out(r, c) = v(flat);
    }
  }
  return out;
}

/// Partial trace over the last (oldest) leg.
inline Matrix trace_tail_leg(const Matrix& m, Index d) {
  const Index rest = m.rows() / d;
  Matrix out = Matrix::Zero(rest, rest);
  for (Index r = 0; r < rest; ++r)
    for (Index c = 0; c < rest; ++c)
      for (Index t = 0; t < d; ++t) out(r, c) += m(r * d + t, c * d + t);
  return out;
}

/// Partial trace over the first (latest) leg.
inline Matrix trace_head_leg(const Matrix& m, Index d) {
  const Index rest = m.rows() / d;
  Matrix out = Matrix::Zero(rest, rest);
  for (Index r = 0; r < rest; ++r)
    for (Index c = 0; c < rest; ++c)
      for (Index t = 0; t < d; ++t) out(r, c) += m(t * rest + r, t * rest + c);
  return out;
}

}  // namespace fcs_detail

// ---------------------------------------------------------------------------
// Marginal chains

/// Sliding-window marginals Upsilon_{j+ell:j} of a k-step process, j
/// ascending. Marginals follow the convention of marginal(): traced input
/// legs are renormalized by d, so each fragment keeps the Choi convention
/// (trace d^ell).
struct MarginalSet {
  Index window = 0;     // ell, steps per fragment
  Index steps = 0;      // k
  Index local_dim = 2;  // d
  std::vector<Matrix> marginals;  // [j] = Upsilon_{j+ell:j}

  Index num_windows() const { return steps - window + 1; }

  LegShape window_shape(Index j) const {
    std::vector<std::string> labels;
    for (Index m = j + window; m >= j + 1; --m) {
      labels.push_back(leg_o(m));
      labels.push_back(leg_i(m));
    }
    labels.push_back(leg_o(j));
    std::vector<Index> dims(labels.size(), local_dim);
    return LegShape(dims, labels);
  }

  /// Largest disagreement between adjacent windows on their common legs.
  double consistency_defect() const {
    using fcs_detail::trace_head_leg;
    using fcs_detail::trace_tail_leg;
    const Index d = local_dim;
    double worst = 0.0;
    for (std::size_t j = 0; j + 1 < marginals.size(); ++j) {
      // window j minus (i_{j+1}, o_j) vs window j+1 minus (o, i) on top
      const Matrix a =
          trace_tail_leg(trace_tail_leg(marginals[j], d), d) / d;
      const Matrix b =
          trace_head_leg(trace_head_leg(marginals[j + 1], d), d) / d;
      worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
    return worst;
  }

  void validate(double tol) const {
    if (window < 1 || steps < window)
      throw std::invalid_argument("MarginalSet: need 1 <= ell <= k");
    if (static_cast<Index>(marginals.size()) != num_windows())
      throw std::invalid_argument("MarginalSet: window count mismatch");
    const Index dim = fcs_detail::ipow(local_dim, 2 * window + 1);
    for (const auto& m : marginals)
      if (m.rows() != dim || m.cols() != dim)
        throw std::invalid_argument("MarginalSet: fragment dimension mismatch");
    const double defect = consistency_defect();
    if (defect > tol)
      throw std::invalid_argument(
          "MarginalSet: adjacent windows disagree on their overlap (defect " +
          std::to_string(defect) + ")");
  }
};

/// Exact window marginals of a dense process tensor.
inline MarginalSet exact_marginals(const ProcessTensor& pt, Index ell) {
  if (ell < 1 || ell > pt.steps)
    throw std::invalid_argument("exact_marginals: need 1 <= ell <= k");
  MarginalSet ms;
  ms.window = ell;
  ms.steps = pt.steps;
  ms.local_dim = pt.local_dim;
  for (Index j = 0; j + ell <= pt.steps; ++j) {
    std::vector<std::string> keep;
    for (Index m = j + ell; m >= j + 1; --m) {
      keep.push_back(leg_o(m));
      keep.push_back(leg_i(m));
    }
    keep.push_back(leg_o(j));
    ms.marginals.push_back(marginal(pt, keep));
  }
  return ms;
}

// ---------------------------------------------------------------------------
// Window marginals from shadow data
//
// Histogramming a shadow over a window of slots marginalizes the other
// slots by the outcome-averaged step map. When that average is the fully
// depolarizing channel (true for the random-Pauli frame), the averaged legs
// reduce exactly to the renormalized partial traces of marginal(), so the
// window histogram is an unbiased sample of the window marginal's own record
// distribution. The slot just above the window acts as an effective terminal
// measurement with effects Tr_out[element]^T.

struct MarginalOptions {
  FitOptions fit;
  double consistency_tol = 1e-2;
  std::size_t min_shots = 1000;
};

namespace fcs_detail {

inline void require_depolarizing_average(const StepFrame& sf, Index d) {
  Matrix avg = Matrix::Zero(d * d, d * d);
  for (std::size_t e = 0; e < sf.elements.size(); ++e)
    avg += sf.element_weight(e) * sf.elements[e].matrix;
  const Matrix dep = kron(identity(d) / static_cast<double>(d), identity(d));
  if ((avg - dep).cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument(
        "marginals_from_shadow: outcome-averaged step map must be the fully "
        "depolarizing channel for window marginalization");
}

/// MLE problem of a single window [j, j+ell) with the induced terminal.
inline MleProblem window_problem(const InstrumentFrame& frame, Index j,
                                 Index ell) {
  const Index d = frame.local_dim;
  const Index k = frame.num_steps();
  MleProblem p;
  for (Index s = j; s < j + ell; ++s) {
    const StepFrame& sf = frame.steps[static_cast<std::size_t>(s)];
    std::vector<ChoiOperator> slot;
    for (std::size_t e = 0; e < sf.elements.size(); ++e)
      slot.emplace_back(sf.element_weight(e) * sf.elements[e].matrix, d, d);
    p.step_basis.push_back(std::move(slot));
  }
  if (j + ell == k) {
    for (std::size_t e = 0; e < frame.terminal.effects.size(); ++e)
      p.terminal_effects.push_back(frame.terminal.element_weight(e) *
                                   frame.terminal.effects[e]);
  } else {
    const StepFrame& top = frame.steps[static_cast<std::size_t>(j + ell)];
    for (std::size_t e = 0; e < top.elements.size(); ++e) {
      const ChoiOperator& a = top.elements[e];
      const Matrix eff = partial_trace(a.matrix, a.shape(), {"in"}).transpose();
      p.terminal_effects.push_back(top.element_weight(e) * eff);
    }
  }
  p.initial = maximally_mixed_process(ell, d);
  return p;
}

/// Histogram of the window records (window slots plus the effective
/// terminal) in the MleProblem flat order.
inline std::vector<double> window_counts(const ShadowSet& shadow, Index j,
                                         Index ell,
                                         const MleProblem& problem) {
  const Index k = shadow.frame.num_steps();
  std::vector<double> counts(problem.num_sequences(), 0.0);
  const std::size_t nterm = problem.terminal_effects.size();
  for (const auto& snap : shadow.snapshots) {
    std::size_t flat = 0;
    for (Index s = j; s < j + ell; ++s)
      flat = flat * problem.step_basis[static_cast<std::size_t>(s - j)].size() +
             snap.element[static_cast<std::size_t>(s)];
    const std::size_t top =
        (j + ell == k) ? snap.terminal
                       : snap.element[static_cast<std::size_t>(j + ell)];
    counts[flat * nterm + top] += 1.0;
  }
  return counts;
}

inline std::size_t distinct_records(const std::vector<double>& counts) {
  std::size_t n = 0;
  for (double c : counts)
    if (c > 0.0) n++;
  return n;
}

}  // namespace fcs_detail

/// Estimate all sliding-window marginals from one shadow data set by
/// independent window MLE fits.
inline MarginalSet marginals_from_shadow(const ShadowSet& shadow, Index ell,
                                         const MarginalOptions& opts = {}) {
  const Index k = shadow.frame.num_steps();
  const Index d = shadow.frame.local_dim;
  if (ell < 1 || ell > k)
    throw std::invalid_argument("marginals_from_shadow: need 1 <= ell <= k");
  for (const auto& sf : shadow.frame.steps)
    fcs_detail::require_depolarizing_average(sf, d);

  MarginalSet ms;
  ms.window = ell;
  ms.steps = k;
  ms.local_dim = d;

  std::vector<std::vector<double>> all_counts;
  std::vector<MleProblem> problems;
  for (Index j = 0; j + ell <= k; ++j) {
    problems.push_back(fcs_detail::window_problem(shadow.frame, j, ell));
    all_counts.push_back(
        fcs_detail::window_counts(shadow, j, ell, problems.back()));
  }
  if (shadow.snapshots.size() < opts.min_shots) {
    std::size_t worst = 0;
    std::size_t fewest = std::numeric_limits<std::size_t>::max();
    for (std::size_t j = 0; j < all_counts.size(); ++j) {
      const std::size_t n = fcs_detail::distinct_records(all_counts[j]);
      if (n < fewest) {
        fewest = n;
        worst = j;
      }
    }
    throw std::invalid_argument(
        "marginals_from_shadow: insufficient shots for conditioning; worst "
        "window " +
        std::to_string(worst) + " has " + std::to_string(fewest) +
        " distinct records");
  }
  for (std::size_t j = 0; j < problems.size(); ++j) {
    problems[j].counts = std::move(all_counts[j]);
    const MleResult res = fit(problems[j], opts.fit);
    ms.marginals.push_back(res.estimate.choi);
  }
  ms.validate(opts.consistency_tol);
  return ms;
}

// ---------------------------------------------------------------------------
// The stitching chain E

/// Ordered operator chain, latest first: marginals interleaved with the
/// identity-padded one-leg traces that causality provides for free,
/// E = [M_{k-ell}, N_{k-ell-1}, M_{k-ell-1}, ..., N_0, M_0] with
/// N_j = I (x) Tr_{o_j}[M_j]. Length 2(k-ell)+1.
inline std::vector<Matrix> build_E(const MarginalSet& ms) {
  ms.validate(std::numeric_limits<double>::infinity());  // structure only
  std::vector<Matrix> e;
  const Index d = ms.local_dim;
  for (Index j = ms.steps - ms.window; j >= 0; --j) {
    e.push_back(ms.marginals[static_cast<std::size_t>(j)]);
    if (j > 0)
      e.push_back(kron(
          identity(d),
          fcs_detail::trace_tail_leg(ms.marginals[static_cast<std::size_t>(j - 1)], d)));
  }
  return e;
}

// ---------------------------------------------------------------------------
// MPO assembly

struct MpoOptions {
  double cutoff = 1e-6;        // relative SVD cutoff at junctions and splits
  double min_singular = 1e-9;  // refusal threshold on retained spectra
};

/// Matrix-product form of a process tensor: one core per process leg,
/// ordered latest first (core 0 carries o_k). Core t maps the left bond to
/// (vectorized physical leg (x) right bond) and is stored as a
/// bond_l x (q * bond_r) matrix with q = d^2; adjacent core pairs
/// (i_{j+1}, o_j) form the 4-index time-slot blocks.
struct MpoProcess {
  Index steps = 0;
  Index local_dim = 2;
  Index window = 0;
  std::vector<Matrix> cores;
  std::vector<Index> bond_dims;      // 2k+2 entries, 1 at both ends
  std::vector<SvReport> junctions;   // conditioning of each stitched overlap

  Index phys_dim() const { return local_dim * local_dim; }
  Index num_legs() const { return 2 * steps + 1; }
};

namespace fcs_detail {

/// Split a (q^nphys x right) block into nphys left-canonical cores.
inline std::vector<Matrix> split_block_left(Matrix a, Index nphys, Index q,
                                            double cutoff) {
  std::vector<Matrix> cores;
  Index bl = 1;
  for (Index i = 0; i + 1 < nphys; ++i) {
    // rows of a are (bl, leg i, trailing legs): regroup to (bl*q) x rest
    const Index rest = a.rows() / (bl * q);
    Matrix b(bl * q, rest * a.cols());
    for (Index r = 0; r < a.rows(); ++r) {
      const Index x = r / rest % q, l = r / (rest * q), y = r % rest;
      for (Index c = 0; c < a.cols(); ++c)
        b(l * q + x, y * a.cols() + c) = a(r, c);
    }
    Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    Index rank = 0;
    for (Index s = 0; s < sv.size(); ++s)
      if (sv(s) > cutoff * sv(0)) rank = s + 1;
    rank = std::max<Index>(rank, 1);
    Matrix u = svd.matrixU().leftCols(rank);
    Matrix core(bl, q * rank);
    for (Index l = 0; l < bl; ++l)
      for (Index x = 0; x < q; ++x)
        for (Index g = 0; g < rank; ++g) core(l, x * rank + g) = u(l * q + x, g);
    cores.push_back(std::move(core));
    Matrix next = sv.head(rank).asDiagonal() *
                  svd.matrixV().leftCols(rank).adjoint();  // rank x rest*cols
    Matrix an(rank * rest, a.cols());
    for (Index g = 0; g < rank; ++g)
      for (Index y = 0; y < rest; ++y)
        for (Index c = 0; c < a.cols(); ++c)
          an(g * rest + y, c) = next(g, y * a.cols() + c);
    a = std::move(an);
    bl = rank;
  }
  // final block: rows are (bl, x), regroup to bl x (q * right)
  Matrix last(bl, q * a.cols());
  for (Index l = 0; l < bl; ++l)
    for (Index x = 0; x < q; ++x)
      for (Index c = 0; c < a.cols(); ++c)
        last(l, x * a.cols() + c) = a(l * q + x, c);
  cores.push_back(std::move(last));
  return cores;
}

/// Split a (left x q^nphys) block into nphys cores, peeling from the right.
inline std::vector<Matrix> split_block_right(Matrix a, Index nphys, Index q,
                                             double cutoff) {
  std::vector<Matrix> rev;
  Index br = 1;
  for (Index i = 0; i + 1 < nphys; ++i) {
    // cols of a are (leading legs, leg, br): regroup to rows x (q*br)
    const Index lead = a.cols() / (q * br);
    Matrix b(a.rows() * lead, q * br);
    for (Index r = 0; r < a.rows(); ++r)
      for (Index c = 0; c < a.cols(); ++c) {
        const Index y = c / (q * br), x = c / br % q, g = c % br;
        b(r * lead + y, x * br + g) = a(r, c);
      }
    Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    Index rank = 0;
    for (Index s = 0; s < sv.size(); ++s)
      if (sv(s) > cutoff * sv(0)) rank = s + 1;
    rank = std::max<Index>(rank, 1);
    rev.push_back(svd.matrixV().leftCols(rank).adjoint());  // rank x (q*br)
    Matrix next = svd.matrixU().leftCols(rank) *
                  sv.head(rank).asDiagonal();  // (rows*lead) x rank
    Matrix an(a.rows(), lead * rank);
    for (Index r = 0; r < a.rows(); ++r)
      for (Index y = 0; y < lead; ++y)
        for (Index g = 0; g < rank; ++g)
          an(r, y * rank + g) = next(r * lead + y, g);
    a = std::move(an);
    br = rank;
  }
  rev.push_back(std::move(a));  // first core of the block: left x (q*br)
  std::vector<Matrix> cores(rev.rbegin(), rev.rend());
  return cores;
}

}  // namespace fcs_detail

/// Stitch the chain E into an MPO by pseudoinverting the two-sided overlaps
/// between consecutive elements. For exact marginals of a process whose
/// temporal memory fits in the window (bond rank <= d^{2 ell}) the
/// reconstruction is exact.
inline MpoProcess assemble_mpo(const std::vector<Matrix>& e, Index d,
                               const MpoOptions& opts = {}) {
  using namespace fcs_detail;
  if (e.empty()) throw std::invalid_argument("assemble_mpo: empty chain");
  if (e.size() % 2 == 0)
    throw std::invalid_argument("assemble_mpo: chain length must be odd");
  const Index dim = e.front().rows();
  Index nlegs = 0;
  while (ipow(d, nlegs) < dim) nlegs++;
  if (ipow(d, nlegs) != dim || nlegs % 2 == 0)
    throw std::invalid_argument("assemble_mpo: element is not a window operator");
  const Index ell = (nlegs - 1) / 2;
  const Index t_last = static_cast<Index>(e.size()) - 1;
  const Index k = ell + t_last / 2;
  const Index q = d * d;
  for (const auto& m : e)
    if (m.rows() != dim || m.cols() != dim)
      throw std::invalid_argument("assemble_mpo: inconsistent element sizes");

  MpoProcess mpo;
  mpo.steps = k;
  mpo.local_dim = d;
  mpo.window = ell;

  if (t_last == 0) {
    // degenerate ell = k: split the single dense window directly
    const Matrix vec = to_vec_matrix(e[0], nlegs, d, nlegs);  // q^n x 1
    mpo.cores = split_block_left(vec, nlegs, q, opts.cutoff);
  } else {
    // Junction t glues elements e_{t-1} and e_t through their 2*ell leg
    // overlap, matricized with the top s_t legs as rows. The bridged chain
    // cut sits between legs t+s_t-1 and t+s_t; it must fall on a step
    // boundary, where the process bond is the environment memory, rather
    // than inside a time slot, so s_t alternates between ell and ell+1 with
    // the parity of t.
    const auto split_of = [ell](Index t) {
      return ((ell + t) % 2 == 0) ? ell : ell + 1;
    };

    // junction factors: pinv(S_t) = P_t * Q_t through the retained rank
    std::vector<Matrix> p(static_cast<std::size_t>(t_last) + 1),
        qf(static_cast<std::size_t>(t_last) + 1);
    for (Index t = 1; t <= t_last; ++t) {
      Matrix s = trace_tail_leg(e[static_cast<std::size_t>(t)], d);
      if (t % 2 == 1) s /= static_cast<double>(d);  // traced leg is an input
      const Matrix vecs = to_vec_matrix(s, 2 * ell, d, split_of(t));
      Eigen::JacobiSVD<Matrix> svd(vecs,
                                   Eigen::ComputeThinU | Eigen::ComputeThinV);
      const auto& sv = svd.singularValues();
      SvReport rep;
      if (sv.size() > 0) rep.largest = sv(0);
      for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > opts.cutoff * rep.largest) {
          rep.rank = i + 1;
          rep.smallest = sv(i);
        }
      mpo.junctions.push_back(rep);
      if (rep.rank == 0 || rep.smallest < opts.min_singular)
        throw std::runtime_error(
            "assemble_mpo: junction " + std::to_string(t) +
            " is ill-conditioned (smallest retained singular value " +
            std::to_string(rep.smallest) + ")");
      RealVector isqrt(rep.rank);
      for (Index i = 0; i < rep.rank; ++i) isqrt(i) = 1.0 / std::sqrt(sv(i));
      p[static_cast<std::size_t>(t)] =
          svd.matrixV().leftCols(rep.rank) * isqrt.asDiagonal();
      qf[static_cast<std::size_t>(t)] =
          isqrt.asDiagonal() * svd.matrixU().leftCols(rep.rank).adjoint();
    }

    // head block: legs above the first junction cut
    const Matrix head =
        to_vec_matrix(e[0], nlegs, d, split_of(1) + 1) * p[1];
    mpo.cores = split_block_left(head, split_of(1) + 1, q, opts.cutoff);

    // interior elements expose either a full (leg, leg) slot pair or act as
    // pure bond transfers, depending on how the cut advances
    for (Index t = 1; t < t_last; ++t) {
      const Index s = split_of(t), sn = split_of(t + 1);
      const Matrix b =
          qf[static_cast<std::size_t>(t)] *
          to_vec_matrix(e[static_cast<std::size_t>(t)], nlegs, d, s);
      const Index trail = ipow(q, 2 * ell - sn);
      const Matrix& pn = p[static_cast<std::size_t>(t + 1)];
      const Index rn = pn.cols();
      if (sn + 1 - s == 0) {
        // no exposed leg: absorb the bond map into the previous core
        const Matrix map = b * pn;  // r_t x r_{t+1}
        Matrix& prev = mpo.cores.back();
        const Index br = prev.cols() / q;
        Matrix np(prev.rows(), q * rn);
        for (Index x = 0; x < q; ++x)
          np.middleCols(x * rn, rn) = prev.middleCols(x * br, br) * map;
        prev = std::move(np);
      } else {
        // two exposed legs: fold the next junction, then split by SVD
        Matrix folded(b.rows(), q * q * rn);
        for (Index x = 0; x < q * q; ++x)
          folded.middleCols(x * rn, rn) = b.middleCols(x * trail, trail) * pn;
        Matrix m(b.rows() * q, q * rn);
        for (Index r = 0; r < b.rows(); ++r)
          for (Index x1 = 0; x1 < q; ++x1)
            for (Index c = 0; c < q * rn; ++c)
              m(r * q + x1, c) = folded(r, x1 * q * rn + c);
        Eigen::JacobiSVD<Matrix> svd(m,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        Index rank = 0;
        for (Index i = 0; i < sv.size(); ++i)
          if (sv(i) > opts.cutoff * sv(0)) rank = i + 1;
        rank = std::max<Index>(rank, 1);
        const Matrix u = svd.matrixU().leftCols(rank);
        Matrix core_a(b.rows(), q * rank);
        for (Index r = 0; r < b.rows(); ++r)
          for (Index x1 = 0; x1 < q; ++x1)
            for (Index g = 0; g < rank; ++g)
              core_a(r, x1 * rank + g) = u(r * q + x1, g);
        Matrix core_b =
            sv.head(rank).asDiagonal() * svd.matrixV().leftCols(rank).adjoint();
        mpo.cores.push_back(std::move(core_a));
        mpo.cores.push_back(std::move(core_b));
      }
    }

    // tail block: legs below the last junction cut
    const Index st = split_of(t_last);
    const Matrix tail =
        qf[static_cast<std::size_t>(t_last)] *
        to_vec_matrix(e[static_cast<std::size_t>(t_last)], nlegs, d, st);
    auto tail_cores =
        split_block_right(tail, 2 * ell + 1 - st, q, opts.cutoff);
    for (auto& c : tail_cores) mpo.cores.push_back(std::move(c));
  }

  mpo.bond_dims.push_back(1);
  for (const auto& c : mpo.cores) mpo.bond_dims.push_back(c.cols() / q);
  if (static_cast<Index>(mpo.cores.size()) != mpo.num_legs() ||
      mpo.bond_dims.back() != 1)
    throw std::runtime_error("assemble_mpo: internal core layout error");
  return mpo;
}

// ---------------------------------------------------------------------------
// Contraction

namespace fcs_detail {

/// Pairing weights of a one-leg operator factor f placed against the Choi:
/// w[(r,c)] = f(c,r).
inline Vector leg_pairing(const Matrix& f, Index d) {
  Vector w(d * d);
  for (Index r = 0; r < d; ++r)
    for (Index c = 0; c < d; ++c) w(r * d + c) = f(c, r);
  return w;
}

}  // namespace fcs_detail

/// Born probability Tr[(Pi (x) A_{k-1}^T (x) ... (x) A_0^T) Upsilon] by a
/// single left-to-right sweep over the cores: cost linear in the step count
/// and polynomial in the bond dimension.
inline double contract_probability(const MpoProcess& mpo,
                                   const ControlSequence& seq) {
  const Index d = mpo.local_dim;
  const Index q = mpo.phys_dim();
  const Index k = mpo.steps;
  if (static_cast<Index>(seq.steps.size()) != k)
    throw std::invalid_argument("contract_probability: sequence length mismatch");
  for (const auto& a : seq.steps)
    if (a.dim_in != d || a.dim_out != d)
      throw std::invalid_argument("contract_probability: slot dimension mismatch");

  // terminal leg o_k
  const Matrix term = seq.terminal.value_or(identity(d));
  const Vector w0 = fcs_detail::leg_pairing(term, d);
  const Matrix& c0 = mpo.cores.front();
  Index b = c0.cols() / q;
  Eigen::RowVectorXcd v = Eigen::RowVectorXcd::Zero(b);
  for (Index x = 0; x < q; ++x) v += w0(x) * c0.middleCols(x * b, b).row(0);

  // slots j = k-1 .. 0 on leg pairs (i_{j+1}, o_j)
  for (Index j = k - 1; j >= 0; --j) {
    const Matrix& a = seq.steps[static_cast<std::size_t>(j)].matrix;
    const Matrix& c1 = mpo.cores[static_cast<std::size_t>(2 * (k - 1 - j) + 1)];
    const Matrix& c2 = mpo.cores[static_cast<std::size_t>(2 * (k - 1 - j) + 2)];
    const Index b1 = c1.cols() / q;
    const Index b2 = c2.cols() / q;
    const Eigen::RowVectorXcd y = v * c1;  // over (x1, b1)
    Eigen::RowVectorXcd u = Eigen::RowVectorXcd::Zero(b2);
    for (Index x1 = 0; x1 < q; ++x1) {
      const Eigen::RowVectorXcd z = y.segment(x1 * b1, b1) * c2;  // (x2, b2)
      for (Index x2 = 0; x2 < q; ++x2) {
        // w2[(x1, x2)] = A[(r1 r2), (c1 c2)] for x = r*d + c per leg
        const Complex w = a((x1 / d) * d + x2 / d, (x1 % d) * d + x2 % d);
        if (w == Complex(0.0)) continue;
        u += w * z.segment(x2 * b2, b2);
      }
    }
    v = std::move(u);
  }
  if (v.size() != 1)
    throw std::runtime_error("contract_probability: dangling bond");
  return v(0).real();
}

/// Joint outcome distribution of the instruments applied in
/// [window_start, window_start + window_len): earlier slots are applied and
/// discarded (element sums), later slots and the terminal are left open
/// (identity), per causality. Flat index: earliest window slot slowest.
inline std::vector<double> window_distribution(
    const MpoProcess& mpo, const std::vector<Instrument>& controls,
    Index window_start, Index window_len) {
  const Index k = mpo.steps;
  const Index d = mpo.local_dim;
  if (static_cast<Index>(controls.size()) != k)
    throw std::invalid_argument("window_distribution: one instrument per slot");
  if (window_start < 0 || window_len < 1 || window_start + window_len > k)
    throw std::invalid_argument("window_distribution: window out of range");
  const ChoiOperator idle = choi_from_unitary(identity(d));
  std::size_t total = 1;
  for (Index s = 0; s < window_len; ++s)
    total *= controls[static_cast<std::size_t>(window_start + s)].elements.size();
  std::vector<double> dist(total);
  std::vector<std::size_t> outcome(static_cast<std::size_t>(window_len), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    for (Index s = window_len; s-- > 0;) {
      const std::size_t n =
          controls[static_cast<std::size_t>(window_start + s)].elements.size();
      outcome[static_cast<std::size_t>(s)] = rem % n;
      rem /= n;
    }
    ControlSequence seq;
    for (Index s = 0; s < k; ++s) {
      if (s < window_start)
        seq.steps.push_back(controls[static_cast<std::size_t>(s)].sum_map());
      else if (s < window_start + window_len)
        seq.steps.push_back(
            controls[static_cast<std::size_t>(s)]
                .elements[outcome[static_cast<std::size_t>(s - window_start)]]);
      else
        seq.steps.push_back(idle);
    }
    dist[flat] = contract_probability(mpo, seq);
  }
  return dist;
}

// ---------------------------------------------------------------------------
// Dense reconstruction

/// Contract all cores into the dense Choi matrix. Exponential in k; guarded
/// by the dense cap.
inline ProcessTensor reconstruct_dense(const MpoProcess& mpo,
                                       Index cap = kDenseStepCap) {
  if (mpo.steps > cap)
    throw std::invalid_argument("reconstruct_dense: step count exceeds cap");
  const Index q = mpo.phys_dim();
  // running tensor: (vectorized legs so far) x (current bond)
  const Index b0 = mpo.cores.front().cols() / q;
  Matrix acc(q, b0);
  for (Index x = 0; x < q; ++x)
    acc.row(x) = mpo.cores.front().row(0).segment(x * b0, b0);
  for (std::size_t t = 1; t < mpo.cores.size(); ++t) {
    const Matrix& c = mpo.cores[t];
    const Index bn = c.cols() / q;
    const Matrix prod = acc * c;  // rows x (q * bn)
    Matrix next(acc.rows() * q, bn);
    for (Index r = 0; r < acc.rows(); ++r)
      for (Index x = 0; x < q; ++x)
        next.row(r * q + x) = prod.row(r).segment(x * bn, bn);
    acc = std::move(next);
  }
  if (acc.cols() != 1)
    throw std::runtime_error("reconstruct_dense: dangling bond");
  const Vector vec = acc.col(0);
  return ProcessTensor(
      fcs_detail::from_vec(vec, mpo.num_legs(), mpo.local_dim), mpo.steps,
      mpo.local_dim);
}

}  // namespace ptshadow

#endif  // PTSHADOW_FCS_HPP
