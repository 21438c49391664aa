/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_CHANNELS_HPP
#define PTSHADOW_CHANNELS_HPP

#include "ptshadow/core.hpp"
#include "ptshadow/gates.hpp"
#include "ptshadow/metrics.hpp"

namespace ptshadow {

enum class TraceClass { kCptp, kCptni, kUnchecked };

/// Choi representation of a CP map on (out (x) in) legs, unnormalized:
/// the Choi of a CPTP map on a d-dimensional system has trace d.
struct ChoiOperator {
  Matrix matrix;
  Index dim_in = 0;
  Index dim_out = 0;
  TraceClass trace_class = TraceClass::kUnchecked;

  ChoiOperator() = default;
  ChoiOperator(Matrix m, Index din, Index dout,
               TraceClass tc = TraceClass::kUnchecked)
      : matrix(std::move(m)), dim_in(din), dim_out(dout), trace_class(tc) {
    if (matrix.rows() != din * dout || matrix.cols() != din * dout)
      throw std::invalid_argument("ChoiOperator: dimension mismatch");
  }

  LegShape shape(const std::string& out_label = "out",
                 const std::string& in_label = "in") const {
    return LegShape({dim_out, dim_in}, {out_label, in_label});
  }
};

inline Matrix unnormalized_bell(Index d) {
  Vector phi = Vector::Zero(d * d);
  for (Index i = 0; i < d; ++i) phi(i * d + i) = 1.0;
  return phi * phi.adjoint();
}

inline double cp_defect(const Matrix& choi) {
  auto es = herm_eig(hermitize(choi), 1e10);  // hermitize unconditionally
  return std::max(0.0, -es.eigenvalues().minCoeff());
}

inline double tp_defect(const ChoiOperator& c) {
  const Matrix marg =
      partial_trace(c.matrix, c.shape(), {"in"});
  return (marg - identity(c.dim_in)).cwiseAbs().maxCoeff();
}

/// Largest eigenvalue of Tr_out[choi] - I; <= 0 (within tol) for CPTNI.
inline double tni_excess(const ChoiOperator& c) {
  const Matrix marg = partial_trace(c.matrix, c.shape(), {"in"});
  auto es = herm_eig(hermitize(marg - identity(c.dim_in)), 1e10);
  return es.eigenvalues().maxCoeff();
}

inline ChoiOperator choi_from_unitary(const Matrix& u) {
  if (!gates::is_unitary(u, 1e-10))
    throw std::invalid_argument("choi_from_unitary: input is not unitary");
  const Index d = u.rows();
  const Matrix ext = kron(u, identity(d));
  return ChoiOperator(ext * unnormalized_bell(d) * ext.adjoint(), d, d,
                      TraceClass::kCptp);
}

inline ChoiOperator choi_from_kraus(const std::vector<Matrix>& ks) {
  if (ks.empty()) throw std::invalid_argument("choi_from_kraus: empty set");
  const Index dout = ks.front().rows();
  const Index din = ks.front().cols();
  Matrix sum = Matrix::Zero(din, din);
  Matrix choi = Matrix::Zero(dout * din, dout * din);
  const Matrix bell = unnormalized_bell(din);
  for (const auto& k : ks) {
    if (k.rows() != dout || k.cols() != din)
      throw std::invalid_argument("choi_from_kraus: inconsistent dims");
    sum += k.adjoint() * k;
    const Matrix ext = kron(k, identity(din));
    choi += ext * bell * ext.adjoint();
  }
  auto es = herm_eig(hermitize(sum - identity(din)), 1e10);
  if (es.eigenvalues().maxCoeff() > 1e-8)
    throw std::invalid_argument("choi_from_kraus: sum K^dag K exceeds I");
  const TraceClass tc = (sum - identity(din)).cwiseAbs().maxCoeff() < 1e-8
                            ? TraceClass::kCptp
                            : TraceClass::kCptni;
  return ChoiOperator(std::move(choi), din, dout, tc);
}

/// E[rho] = Tr_in[(I_out (x) rho^T) choi].
inline Matrix apply_choi(const ChoiOperator& c, const Matrix& rho) {
  if (rho.rows() != c.dim_in || rho.cols() != c.dim_in)
    throw std::invalid_argument("apply_choi: dimension mismatch");
  const Matrix ext = kron(identity(c.dim_out), rho.transpose());
  return partial_trace(ext * c.matrix, c.shape(), {"out"});
}

/// Choi of e2 . e1 (apply e1 first).
inline ChoiOperator compose_choi(const ChoiOperator& e2,
                                 const ChoiOperator& e1) {
  if (e2.dim_in != e1.dim_out)
    throw std::invalid_argument("compose_choi: dimension mismatch");
  const Index din = e1.dim_in, dmid = e1.dim_out, dout = e2.dim_out;
  Matrix out = Matrix::Zero(dout * din, dout * din);
  // out[(a,r),(b,c)] = sum_{i,j} C2[(a,i),(b,j)] C1[(i,r),(j,c)]
  for (Index a = 0; a < dout; ++a)
    for (Index b = 0; b < dout; ++b)
      for (Index r = 0; r < din; ++r)
        for (Index cc = 0; cc < din; ++cc) {
          Complex s = 0.0;
          for (Index i = 0; i < dmid; ++i)
            for (Index j = 0; j < dmid; ++j)
              s += e2.matrix(a * dmid + i, b * dmid + j) *
                   e1.matrix(i * din + r, j * din + cc);
          out(a * din + r, b * din + cc) = s;
        }
  TraceClass tc = TraceClass::kUnchecked;
  if (e1.trace_class == TraceClass::kCptp && e2.trace_class == TraceClass::kCptp)
    tc = TraceClass::kCptp;
  return ChoiOperator(std::move(out), din, dout, tc);
}

/// Collection of CPTNI maps indexed by measurement outcome; sums to CPTP.
struct Instrument {
  std::vector<ChoiOperator> elements;

  void validate(double tol = 1e-8) const {
    if (elements.empty()) throw std::invalid_argument("Instrument: empty");
    Matrix sum = Matrix::Zero(elements.front().matrix.rows(),
                              elements.front().matrix.cols());
    for (const auto& e : elements) {
      if (cp_defect(e.matrix) > tol)
        throw std::invalid_argument("Instrument: element not CP");
      if (tni_excess(e) > tol)
        throw std::invalid_argument("Instrument: element not TNI");
      sum += e.matrix;
    }
    ChoiOperator total(sum, elements.front().dim_in, elements.front().dim_out);
    if (tp_defect(total) > tol)
      throw std::invalid_argument("Instrument: sum map is not CPTP");
  }

  ChoiOperator sum_map() const {
    Matrix sum = Matrix::Zero(elements.front().matrix.rows(),
                              elements.front().matrix.cols());
    for (const auto& e : elements) sum += e.matrix;
    return ChoiOperator(std::move(sum), elements.front().dim_in,
                        elements.front().dim_out, TraceClass::kCptp);
  }
};

inline void validate_povm(const std::vector<Matrix>& povm, double tol = 1e-8) {
  if (povm.empty()) throw std::invalid_argument("POVM: empty");
  Matrix sum = Matrix::Zero(povm.front().rows(), povm.front().cols());
  for (const auto& e : povm) {
    if (!is_hermitian(e, tol)) throw std::invalid_argument("POVM: not Hermitian");
    auto es = herm_eig(hermitize(e), 1e10);
    if (es.eigenvalues().minCoeff() < -tol)
      throw std::invalid_argument("POVM: effect not PSD");
    sum += e;
  }
  if ((sum - identity(povm.front().rows())).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("POVM: effects do not sum to identity");
}

/// Instrument from a system-ancilla dilation: the system interacts with an
/// ancilla prepared in rho_a via u_sa (system first), then the ancilla is
/// measured with povm_a.
inline Instrument stinespring_instrument(const Matrix& u_sa,
                                         const Matrix& rho_a,
                                         const std::vector<Matrix>& povm_a) {
  if (!gates::is_unitary(u_sa, 1e-10))
    throw std::invalid_argument("stinespring_instrument: u not unitary");
  validate_povm(povm_a);
  const Index da = rho_a.rows();
  const Index ds = u_sa.rows() / da;
  if (ds * da != u_sa.rows())
    throw std::invalid_argument("stinespring_instrument: dims inconsistent");
  const LegShape sa({ds, da}, {"s", "a"});
  Instrument inst;
  for (const auto& effect : povm_a) {
    Matrix choi = Matrix::Zero(ds * ds, ds * ds);
    // act on halves of the unnormalized maximally entangled state
    for (Index i = 0; i < ds; ++i)
      for (Index j = 0; j < ds; ++j) {
        Matrix eij = Matrix::Zero(ds, ds);
        eij(i, j) = 1.0;
        const Matrix evolved =
            u_sa * kron(eij, rho_a) * u_sa.adjoint();
        const Matrix weighted = kron(identity(ds), effect) * evolved;
        const Matrix elem = partial_trace(weighted, sa, {"s"});
        for (Index a = 0; a < ds; ++a)
          for (Index b = 0; b < ds; ++b)
            choi(a * ds + i, b * ds + j) += elem(a, b);
      }
    inst.elements.emplace_back(std::move(choi), ds, ds, TraceClass::kCptni);
  }
  inst.validate();
  return inst;
}

/// Single-qubit Pauli transfer matrix. With `normalized` (the default),
/// R_ij = Tr[P_i A[P_j]] / 2 so the identity channel maps to the identity.
struct Ptm {
  Eigen::Matrix4d r;
  bool normalized = true;
};

inline Ptm ptm_from_choi(const ChoiOperator& c, bool normalized = true) {
  if (c.dim_in != 2 || c.dim_out != 2)
    throw std::invalid_argument("ptm_from_choi: single-qubit only");
  const char labels[4] = {'I', 'X', 'Y', 'Z'};
  Ptm p;
  p.normalized = normalized;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const Matrix op =
          kron(gates::pauli(labels[i]), gates::pauli(labels[j]).transpose());
      Complex v = (op * c.matrix).trace();
      if (normalized) v /= 2.0;
      if (std::abs(v.imag()) > 1e-10)
        throw std::runtime_error("ptm_from_choi: non-real entry");
      p.r(i, j) = v.real();
    }
  return p;
}

struct ChannelDiagnostics {
  double unitality_defect = 0.0;
  double trace_defect = 0.0;
};

/// How far the map is from unital and from trace preserving.
inline ChannelDiagnostics diagnostics(const ChoiOperator& c) {
  ChannelDiagnostics d;
  const Matrix mm = identity(c.dim_in) / static_cast<double>(c.dim_in);
  const Matrix out = apply_choi(c, mm);
  const Matrix ideal =
      out.trace() * identity(c.dim_out) / static_cast<double>(c.dim_out);
  d.unitality_defect = trace_norm(out - ideal);
  const Matrix marg = partial_trace(c.matrix, c.shape(), {"in"});
  d.trace_defect = operator_inf_norm(marg - identity(c.dim_in));
  return d;
}

}  // namespace ptshadow

#endif  // PTSHADOW_CHANNELS_HPP
