/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_PROCESS_HPP
#define PTSHADOW_PROCESS_HPP

#include <optional>

#include "ptshadow/channels.hpp"
#include "ptshadow/core.hpp"
#include "ptshadow/metrics.hpp"

namespace ptshadow {

inline std::string leg_o(Index j) { return "o" + std::to_string(j); }
inline std::string leg_i(Index j) { return "i" + std::to_string(j); }

/// Leg labels of a k-step process tensor, latest first:
/// (o_k, i_k, o_{k-1}, i_{k-1}, ..., i_1, o_0).
inline std::vector<std::string> process_leg_labels(Index k) {
  std::vector<std::string> labels;
  for (Index j = k; j >= 1; --j) {
    labels.push_back(leg_o(j));
    labels.push_back(leg_i(j));
  }
  labels.push_back(leg_o(0));
  return labels;
}

inline constexpr Index kDenseStepCap = 5;

/// Choi state of a k-step process on a d-dimensional system. Unnormalized
/// convention: trace is d^k.
struct ProcessTensor {
  Matrix choi;
  Index steps = 0;
  Index local_dim = 2;

  ProcessTensor() = default;
  ProcessTensor(Matrix m, Index k, Index d)
      : choi(std::move(m)), steps(k), local_dim(d) {
    check_shape(choi, shape());
  }

  LegShape shape() const {
    std::vector<Index> dims(static_cast<std::size_t>(2 * steps + 1), local_dim);
    return LegShape(dims, process_leg_labels(steps));
  }
};

/// Control operations for slots 0..k-1 (element j maps leg o_j to i_{j+1}),
/// plus an optional terminal POVM effect measured on o_k.
struct ControlSequence {
  std::vector<ChoiOperator> steps;
  std::optional<Matrix> terminal;
};

// ---------------------------------------------------------------------------
// Construction from system-environment dynamics

namespace detail {

/// One pure branch of the generalized Choi state circuit: Bell halves are
/// swapped in before every system-environment unitary. Registers are kept in
/// the order [S_cur, E, o_0, i_1, o_1, i_2, ..., i_k]; the current system
/// register ends up holding o_k.
inline Vector cji_branch(const std::vector<Matrix>& u_steps, Vector psi_se,
                         Index d, Index de) {
  // psi_se arrives on (S (x) E)
  Vector psi = psi_se;
  Index dlegs = 1;  // dimension of the stored legs
  for (std::size_t step = 0; step < u_steps.size(); ++step) {
    // detach S_cur into a stored leg, then entangle a fresh S_cur with a new
    // input leg through an unnormalized Bell pair sum_b |b>|b>
    Vector next = Vector::Zero(d * de * dlegs * d * d);
    for (Index s = 0; s < d; ++s)
      for (Index e = 0; e < de; ++e)
        for (Index l = 0; l < dlegs; ++l) {
          const Complex amp = psi((s * de + e) * dlegs + l);
          if (amp == Complex(0.0)) continue;
          for (Index b = 0; b < d; ++b)
            next((((b * de + e) * dlegs + l) * d + s) * d + b) = amp;
        }
    dlegs *= d * d;
    // apply the unitary on (S_cur, E); the (S_cur, E) pair is the slow index
    Matrix view(d * de, dlegs);
    for (Index se = 0; se < d * de; ++se)
      for (Index l = 0; l < dlegs; ++l) view(se, l) = next(se * dlegs + l);
    view = u_steps[step] * view;
    for (Index se = 0; se < d * de; ++se)
      for (Index l = 0; l < dlegs; ++l) next(se * dlegs + l) = view(se, l);
    psi = std::move(next);
  }
  return psi;  // on [S_cur=o_k, E, o_0, i_1, ..., i_k]
}

}  // namespace detail

/// Build the k-step process tensor of the dynamics: rho_se0 on (S (x) E),
/// then u_steps[0], ..., u_steps[k-1] on (S (x) E) with a control slot before
/// each unitary and a final output after the last one.
inline ProcessTensor simulate_process(const std::vector<Matrix>& u_steps,
                                      const Matrix& rho_se0, Index d,
                                      Index dense_cap = kDenseStepCap) {
  const Index k = static_cast<Index>(u_steps.size());
  if (k > dense_cap)
    throw std::invalid_argument(
        "simulate_process: step count exceeds the dense cap; use the "
        "finitely-correlated (fcs) reconstruction for long processes");
  const Index dse = rho_se0.rows();
  const Index de = dse / d;
  if (de * d != dse)
    throw std::invalid_argument("simulate_process: rho_se0/local dim mismatch");
  for (const auto& u : u_steps)
    if (u.rows() != dse || !gates::is_unitary(u, 1e-10))
      throw std::invalid_argument("simulate_process: invalid step unitary");

  const Index dchoi = static_cast<Index>(std::pow(d, 2 * k + 1));
  Matrix acc = Matrix::Zero(dchoi, dchoi);

  auto es = herm_eig(rho_se0, 1e-8);
  for (Index b = 0; b < es.eigenvalues().size(); ++b) {
    const double lam = es.eigenvalues()(b);
    if (lam < 1e-14) continue;
    Vector psi = detail::cji_branch(u_steps, es.eigenvectors().col(b), d, de);
    // trace out E: registers [o_k, E, legs]; slice per E value
    const Index dlegs = psi.size() / (d * de);
    for (Index e = 0; e < de; ++e) {
      Vector slice(d * dlegs);
      for (Index s = 0; s < d; ++s)
        for (Index l = 0; l < dlegs; ++l)
          slice(s * dlegs + l) = psi((s * de + e) * dlegs + l);
      acc.noalias() += lam * (slice * slice.adjoint());
    }
  }

  // current register order: o_k, o_0, i_1, o_1, ..., i_k
  std::vector<std::string> cur_labels{leg_o(k), leg_o(0)};
  for (Index j = 1; j <= k; ++j) {
    cur_labels.push_back(leg_i(j));
    if (j < k) cur_labels.push_back(leg_o(j));
  }
  std::vector<Index> cur_dims(cur_labels.size(), d);
  const Matrix choi =
      permute_legs(acc, LegShape(cur_dims, cur_labels), process_leg_labels(k));
  return ProcessTensor(choi, k, d);
}

/// Markov process: tensor product of per-step channel Chois with the initial
/// state, Upsilon = C_k (x) ... (x) C_1 (x) rho_0.
inline ProcessTensor markov_product(const std::vector<ChoiOperator>& channels,
                                    const Matrix& rho0) {
  const Index d = rho0.rows();
  Matrix m = Matrix::Identity(1, 1);
  for (auto it = channels.rbegin(); it != channels.rend(); ++it) {
    if (it->dim_in != d || it->dim_out != d)
      throw std::invalid_argument("markov_product: dimension mismatch");
    if (tp_defect(*it) > 1e-8)
      throw std::invalid_argument("markov_product: channel is not CPTP");
    m = kron(m, it->matrix);
  }
  m = kron(m, rho0);
  return ProcessTensor(m, static_cast<Index>(channels.size()), d);
}

// ---------------------------------------------------------------------------
// Action on control sequences

/// Tensor product of the control Chois in descending slot order, living on
/// legs (i_k, o_{k-1}, ..., i_1, o_0).
inline Matrix control_tensor(const ControlSequence& seq) {
  Matrix a = Matrix::Identity(1, 1);
  for (auto it = seq.steps.rbegin(); it != seq.steps.rend(); ++it)
    a = kron(a, it->matrix);
  return a;
}

/// Final state after applying the control sequence through the process:
/// rho = Tr_{all but o_k}[(I_{o_k} (x) A^T) Upsilon]. With a terminal POVM
/// effect the full trace is the sequence probability.
inline Matrix act(const ProcessTensor& pt, const ControlSequence& seq) {
  if (static_cast<Index>(seq.steps.size()) != pt.steps)
    throw std::invalid_argument("act: sequence length mismatch");
  const Index d = pt.local_dim;
  for (const auto& s : seq.steps)
    if (s.dim_in != d || s.dim_out != d)
      throw std::invalid_argument("act: control dimension mismatch");
  const Matrix a = control_tensor(seq);
  Matrix top = seq.terminal ? *seq.terminal : identity(d);
  const Matrix big = kron(top, a.transpose());
  const Matrix rho = partial_trace(big * pt.choi, pt.shape(), {leg_o(pt.steps)});
  return rho;
}

/// Probability of the sequence with terminal effect M: Tr[Upsilon (M (x) A^T)].
inline double born_probability(const ProcessTensor& pt,
                               const ControlSequence& seq) {
  const Complex t = act(pt, seq).trace();
  if (std::abs(t.imag()) > 1e-9)
    throw std::runtime_error("born_probability: non-real probability");
  return t.real();
}

// ---------------------------------------------------------------------------
// Causality

/// One containment defect per step j=k..1: how far Tr_{o_j}[Upsilon_{j:0}]
/// is from Upsilon_{j-1:0} (x) I_{i_j}. Index 0 of the result is step k.
inline std::vector<double> causality_defect(const ProcessTensor& pt) {
  std::vector<double> defects;
  Matrix cur = pt.choi;
  const Index d = pt.local_dim;
  for (Index j = pt.steps; j >= 1; --j) {
    std::vector<std::string> labels;
    for (Index m = j; m >= 1; --m) {
      labels.push_back(leg_o(m));
      labels.push_back(leg_i(m));
    }
    labels.push_back(leg_o(0));
    std::vector<Index> dims(labels.size(), d);
    const LegShape sh(dims, labels);
    std::vector<std::string> keep_no_out(labels.begin() + 1, labels.end());
    std::vector<std::string> keep_past(labels.begin() + 2, labels.end());
    const Matrix m1 = partial_trace(cur, sh, keep_no_out);
    const Matrix past = partial_trace(cur, sh, keep_past) / static_cast<double>(d);
    defects.push_back((m1 - kron(identity(d), past)).cwiseAbs().maxCoeff());
    cur = past;
  }
  return defects;
}

// ---------------------------------------------------------------------------
// Marginals

/// Partial trace keeping `keep` legs, renormalized by d per traced input leg
/// so that channel marginals of Markov products keep the Choi convention.
inline Matrix marginal(const ProcessTensor& pt,
                       const std::vector<std::string>& keep,
                       LegShape* out_shape = nullptr) {
  const LegShape sh = pt.shape();
  Index traced_inputs = 0;
  for (const auto& l : sh.labels) {
    if (l[0] == 'i' && std::find(keep.begin(), keep.end(), l) == keep.end())
      traced_inputs++;
  }
  Matrix m = partial_trace(pt.choi, sh, keep, out_shape);
  m /= std::pow(static_cast<double>(pt.local_dim), traced_inputs);
  return m;
}

// ---------------------------------------------------------------------------
// Non-Markovianity

struct CausalBreakResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
};

/// Compare the conditional future statistics after two different pasts.
/// `past_x` and `past_x2` fill slots 0..j-1 (the last element must end with
/// a fresh-input preparation so the break is genuine); `future` fills slots
/// j..k-1 plus the terminal effect. Each conditional probability is
/// p(future, past) / p(past).
inline CausalBreakResult causal_break_test(const ProcessTensor& pt,
                                           const ControlSequence& future,
                                           const std::vector<ChoiOperator>& past_x,
                                           const std::vector<ChoiOperator>& past_x2) {
  if (past_x.size() != past_x2.size())
    throw std::invalid_argument("causal_break_test: past length mismatch");
  const Index j = static_cast<Index>(past_x.size());
  if (j + static_cast<Index>(future.steps.size()) != pt.steps)
    throw std::invalid_argument("causal_break_test: slot count mismatch");
  const Index d = pt.local_dim;
  const ChoiOperator id_map = choi_from_unitary(identity(d));

  auto conditional = [&](const std::vector<ChoiOperator>& past) {
    ControlSequence joint;
    joint.steps = past;
    joint.steps.insert(joint.steps.end(), future.steps.begin(),
                       future.steps.end());
    joint.terminal = future.terminal;
    const double p_joint = born_probability(pt, joint);
    ControlSequence past_only;
    past_only.steps = past;
    for (Index s = j; s < pt.steps; ++s) past_only.steps.push_back(id_map);
    const double p_past = born_probability(pt, past_only);
    if (p_past < 1e-12)
      throw std::runtime_error("causal_break_test: past has zero probability");
    return p_joint / p_past;
  };

  CausalBreakResult r;
  r.lhs = conditional(past_x);
  r.rhs = conditional(past_x2);
  r.gap = std::abs(r.lhs - r.rhs);
  return r;
}

struct NmMeasures {
  double negativity = 0.0;
  double qmi = 0.0;
};

/// Temporal entanglement and total correlations across a cut of the legs,
/// computed on the unit-trace normalization of the Choi state.
inline NmMeasures nm_measures(const ProcessTensor& pt,
                              const std::vector<std::string>& cut) {
  const double norm = std::pow(static_cast<double>(pt.local_dim), pt.steps);
  const Matrix rho = hermitize(pt.choi) / norm;
  NmMeasures m;
  m.negativity = negativity(rho, pt.shape(), cut);
  m.qmi = qmi(rho, pt.shape(), cut);
  return m;
}

}  // namespace ptshadow

#endif  // PTSHADOW_PROCESS_HPP
