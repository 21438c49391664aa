/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_CORE_HPP
#define PTSHADOW_CORE_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ptshadow {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kHermTol = 1e-9;
inline constexpr double kDefaultSvdCutoff = 1e-10;

/// Ordered list of subsystem (leg) dimensions with unique string labels.
/// The flattened index of a multi-leg operator runs over legs left to right,
/// leftmost label most significant.
struct LegShape {
  std::vector<Index> dims;
  std::vector<std::string> labels;

  LegShape() = default;
  LegShape(std::vector<Index> d, std::vector<std::string> l)
      : dims(std::move(d)), labels(std::move(l)) {
    if (dims.size() != labels.size())
      throw std::invalid_argument("LegShape: dims/labels size mismatch");
    for (std::size_t i = 0; i < labels.size(); ++i)
      for (std::size_t j = i + 1; j < labels.size(); ++j)
        if (labels[i] == labels[j])
          throw std::invalid_argument("LegShape: duplicate label " + labels[i]);
  }

  Index num_legs() const { return static_cast<Index>(dims.size()); }

  Index total_dim() const {
    Index d = 1;
    for (Index x : dims) d *= x;
    return d;
  }

  Index index_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label) return static_cast<Index>(i);
    throw std::invalid_argument("LegShape: unknown label " + label);
  }

  bool has(const std::string& label) const {
    return std::find(labels.begin(), labels.end(), label) != labels.end();
  }

  /// Strides of each leg in the flattened index (leftmost most significant).
  std::vector<Index> strides() const {
    std::vector<Index> s(dims.size());
    Index acc = 1;
    for (Index i = num_legs() - 1; i >= 0; --i) {
      s[static_cast<std::size_t>(i)] = acc;
      acc *= dims[static_cast<std::size_t>(i)];
    }
    return s;
  }
};

inline void check_shape(const Matrix& m, const LegShape& shape) {
  if (m.rows() != m.cols() || m.rows() != shape.total_dim())
    throw std::invalid_argument("shape does not annotate this matrix");
}

// ---------------------------------------------------------------------------
// Basic constructions

inline Matrix identity(Index d) { return Matrix::Identity(d, d); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Matrix kron(const std::vector<Matrix>& factors) {
  if (factors.empty()) return Matrix::Identity(1, 1);
  Matrix out = factors.front();
  for (std::size_t i = 1; i < factors.size(); ++i) out = kron(out, factors[i]);
  return out;
}

inline bool is_hermitian(const Matrix& m, double tol = kHermTol) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline Matrix hermitize(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

/// Hermitian eigensolve with a Hermitization guard.
inline Eigen::SelfAdjointEigenSolver<Matrix> herm_eig(const Matrix& m,
                                                      double tol = kHermTol) {
  if (!is_hermitian(m, tol))
    throw std::invalid_argument("herm_eig: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(m));
  if (es.info() != Eigen::Success)
    throw std::runtime_error("herm_eig: eigensolver failed");
  return es;
}

// ---------------------------------------------------------------------------
// Leg manipulation

namespace detail {

inline std::vector<Index> leg_positions(const LegShape& shape,
                                        const std::vector<std::string>& labels) {
  std::vector<Index> pos;
  pos.reserve(labels.size());
  for (const auto& l : labels) pos.push_back(shape.index_of(l));
  return pos;
}

inline std::vector<Index> unravel(Index flat, const std::vector<Index>& dims) {
  std::vector<Index> idx(dims.size());
  for (Index i = static_cast<Index>(dims.size()) - 1; i >= 0; --i) {
    idx[static_cast<std::size_t>(i)] = flat % dims[static_cast<std::size_t>(i)];
    flat /= dims[static_cast<std::size_t>(i)];
  }
  return idx;
}

}  // namespace detail

/// Reorder legs of an operator to `new_order` (a permutation of the labels).
inline Matrix permute_legs(const Matrix& m, const LegShape& shape,
                           const std::vector<std::string>& new_order,
                           LegShape* out_shape = nullptr) {
  check_shape(m, shape);
  if (static_cast<Index>(new_order.size()) != shape.num_legs())
    throw std::invalid_argument("permute_legs: order must list every label");
  const auto pos = detail::leg_positions(shape, new_order);
  std::vector<Index> new_dims(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i)
    new_dims[i] = shape.dims[static_cast<std::size_t>(pos[i])];
  const Index d = shape.total_dim();
  const auto old_strides = shape.strides();
  // stride of each *old* leg inside the new flattened index
  std::vector<Index> new_stride_of_old(pos.size());
  {
    Index acc = 1;
    for (Index i = static_cast<Index>(pos.size()) - 1; i >= 0; --i) {
      new_stride_of_old[static_cast<std::size_t>(pos[static_cast<std::size_t>(i)])] = acc;
      acc *= new_dims[static_cast<std::size_t>(i)];
    }
  }
  std::vector<Index> map(static_cast<std::size_t>(d));
  for (Index f = 0; f < d; ++f) {
    const auto idx = detail::unravel(f, shape.dims);
    Index nf = 0;
    for (std::size_t l = 0; l < idx.size(); ++l)
      nf += idx[l] * new_stride_of_old[l];
    map[static_cast<std::size_t>(f)] = nf;
  }
  Matrix out(d, d);
  for (Index r = 0; r < d; ++r)
    for (Index c = 0; c < d; ++c)
      out(map[static_cast<std::size_t>(r)], map[static_cast<std::size_t>(c)]) = m(r, c);
  if (out_shape) *out_shape = LegShape(new_dims, new_order);
  return out;
}

/// Partial trace keeping the legs in `keep` (in their original order).
inline Matrix partial_trace(const Matrix& m, const LegShape& shape,
                            const std::vector<std::string>& keep,
                            LegShape* out_shape = nullptr) {
  check_shape(m, shape);
  for (const auto& l : keep) (void)shape.index_of(l);
  std::vector<std::string> kept, traced;
  for (const auto& l : shape.labels) {
    if (std::find(keep.begin(), keep.end(), l) != keep.end())
      kept.push_back(l);
    else
      traced.push_back(l);
  }
  // Move kept legs to the front, traced to the back, then block-trace.
  std::vector<std::string> order = kept;
  order.insert(order.end(), traced.begin(), traced.end());
  LegShape perm_shape;
  Matrix p = permute_legs(m, shape, order, &perm_shape);
  Index dk = 1, dt = 1;
  for (const auto& l : kept) dk *= shape.dims[static_cast<std::size_t>(shape.index_of(l))];
  for (const auto& l : traced) dt *= shape.dims[static_cast<std::size_t>(shape.index_of(l))];
  Matrix out = Matrix::Zero(dk, dk);
  for (Index r = 0; r < dk; ++r)
    for (Index c = 0; c < dk; ++c) {
      Complex s = 0.0;
      for (Index t = 0; t < dt; ++t) s += p(r * dt + t, c * dt + t);
      out(r, c) = s;
    }
  if (out_shape) {
    std::vector<Index> kd;
    for (const auto& l : kept) kd.push_back(shape.dims[static_cast<std::size_t>(shape.index_of(l))]);
    *out_shape = LegShape(kd, kept);
  }
  return out;
}

/// Partial transpose over the legs in `flip`. Involutive.
inline Matrix partial_transpose(const Matrix& m, const LegShape& shape,
                                const std::vector<std::string>& flip) {
  check_shape(m, shape);
  std::vector<bool> flipped(static_cast<std::size_t>(shape.num_legs()), false);
  for (const auto& l : flip)
    flipped[static_cast<std::size_t>(shape.index_of(l))] = true;
  const Index d = shape.total_dim();
  const auto strides = shape.strides();
  Matrix out(d, d);
  for (Index r = 0; r < d; ++r) {
    const auto ri = detail::unravel(r, shape.dims);
    for (Index c = 0; c < d; ++c) {
      const auto ci = detail::unravel(c, shape.dims);
      Index nr = 0, nc = 0;
      for (std::size_t l = 0; l < ri.size(); ++l) {
        if (flipped[l]) {
          nr += ci[l] * strides[l];
          nc += ri[l] * strides[l];
        } else {
          nr += ri[l] * strides[l];
          nc += ci[l] * strides[l];
        }
      }
      out(nr, nc) = m(r, c);
    }
  }
  return out;
}

/// Embed an operator supported on `op_shape` legs into the larger `full`
/// space, acting as identity on the remaining legs.
inline Matrix embed(const Matrix& op, const LegShape& op_shape,
                    const LegShape& full) {
  check_shape(op, op_shape);
  std::vector<std::string> rest;
  Index drest = 1;
  for (const auto& l : full.labels) {
    if (!op_shape.has(l)) {
      rest.push_back(l);
      drest *= full.dims[static_cast<std::size_t>(full.index_of(l))];
    }
  }
  std::vector<Index> dims = op_shape.dims;
  std::vector<std::string> labels = op_shape.labels;
  for (const auto& l : rest) {
    dims.push_back(full.dims[static_cast<std::size_t>(full.index_of(l))]);
    labels.push_back(l);
  }
  Matrix big = kron(op, identity(drest));
  return permute_legs(big, LegShape(dims, labels), full.labels);
}

// ---------------------------------------------------------------------------
// Pseudoinverse

/// Moore-Penrose pseudoinverse with a relative singular-value cutoff.
inline Matrix pseudoinverse(const Matrix& m,
                            double cutoff = kDefaultSvdCutoff) {
  if (cutoff <= 0.0 || cutoff >= 1.0)
    throw std::invalid_argument("pseudoinverse: cutoff must be in (0,1)");
  if (m.rows() == 0 || m.cols() == 0) return m.adjoint();
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return Matrix::Zero(m.cols(), m.rows());
  const double thresh = cutoff * sv(0);
  RealVector inv = RealVector::Zero(sv.size());
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

/// Smallest and largest retained singular values; used for conditioning reports.
struct SvReport {
  double smallest = 0.0;
  double largest = 0.0;
  Index rank = 0;
};

inline SvReport singular_value_report(const Matrix& m,
                                      double cutoff = kDefaultSvdCutoff) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  SvReport rep;
  if (sv.size() == 0) return rep;
  rep.largest = sv(0);
  const double thresh = cutoff * sv(0);
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > thresh) {
      rep.rank = i + 1;
      rep.smallest = sv(i);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Row-major vectorization (used by dual-frame construction)

inline Vector vec_row(const Matrix& m) {
  Vector v(m.size());
  Index p = 0;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) v(p++) = m(r, c);
  return v;
}

inline Matrix unvec_row(const Vector& v, Index rows, Index cols) {
  Matrix m(rows, cols);
  Index p = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = v(p++);
  return m;
}

}  // namespace ptshadow

#endif  // PTSHADOW_CORE_HPP
