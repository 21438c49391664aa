/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_METRICS_HPP
#define PTSHADOW_METRICS_HPP

#include "ptshadow/core.hpp"

namespace ptshadow {

inline constexpr double kStateTol = 1e-9;

inline double trace_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

inline double operator_inf_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

namespace detail {
inline void check_state(const Matrix& rho, double tol = 1e-6) {
  if (!is_hermitian(rho, 1e-8))
    throw std::invalid_argument("metric input is not Hermitian");
  if (std::abs(rho.trace().real() - 1.0) > tol ||
      std::abs(rho.trace().imag()) > tol)
    throw std::invalid_argument("metric input is not unit trace");
}
}  // namespace detail

/// (1/2)||rho - sigma||_1 for unit-trace Hermitian inputs.
inline double trace_distance(const Matrix& rho, const Matrix& sigma) {
  detail::check_state(rho);
  detail::check_state(sigma);
  return 0.5 * trace_norm(rho - sigma);
}

inline double purity(const Matrix& rho) {
  detail::check_state(rho);
  return (rho * rho).trace().real();
}

/// (sum_i sqrt(p_i q_i))^2 for classical distributions.
inline double hellinger_fidelity(const std::vector<double>& p,
                                 const std::vector<double>& q) {
  if (p.size() != q.size())
    throw std::invalid_argument("hellinger_fidelity: length mismatch");
  double sp = 0.0, sq = 0.0, bc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < -1e-12 || q[i] < -1e-12)
      throw std::invalid_argument("hellinger_fidelity: negative probability");
    sp += p[i];
    sq += q[i];
    bc += std::sqrt(std::max(0.0, p[i]) * std::max(0.0, q[i]));
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw std::invalid_argument("hellinger_fidelity: inputs must sum to 1");
  return bc * bc;
}

/// Entanglement negativity (||rho^{T_cut}||_1 - 1)/2 across the legs in `cut`.
inline double negativity(const Matrix& rho, const LegShape& shape,
                         const std::vector<std::string>& cut) {
  detail::check_state(rho);
  const Matrix pt = partial_transpose(rho, shape, cut);
  return 0.5 * (trace_norm(pt) - 1.0);
}

/// Von Neumann entropy in bits.
inline double von_neumann_entropy(const Matrix& rho) {
  auto es = herm_eig(rho);
  double s = 0.0;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()(i);
    if (lam > 1e-14) s -= lam * std::log2(lam);
  }
  return s;
}

/// Quantum mutual information S(A)+S(B)-S(AB) in bits, A = legs in `cut`.
inline double qmi(const Matrix& rho, const LegShape& shape,
                  const std::vector<std::string>& cut) {
  detail::check_state(rho);
  std::vector<std::string> rest;
  for (const auto& l : shape.labels)
    if (std::find(cut.begin(), cut.end(), l) == cut.end()) rest.push_back(l);
  const Matrix a = partial_trace(rho, shape, cut);
  const Matrix b = partial_trace(rho, shape, rest);
  return von_neumann_entropy(a) + von_neumann_entropy(b) -
         von_neumann_entropy(rho);
}

/// Square root of a PSD Hermitian matrix; small negative eigenvalues clipped.
inline Matrix psd_sqrt(const Matrix& m) {
  auto es = herm_eig(m, 1e-7);
  RealVector lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

/// Uhlmann fidelity F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double uhlmann_fidelity(const Matrix& rho, const Matrix& sigma) {
  const Matrix sr = psd_sqrt(rho);
  const Matrix inner = sr * sigma * sr;
  Eigen::JacobiSVD<Matrix> svd(inner);
  // inner is PSD up to numerical noise; trace norm equals Tr sqrt(inner)^2
  double t = 0.0;
  for (Index i = 0; i < svd.singularValues().size(); ++i)
    t += std::sqrt(std::max(0.0, svd.singularValues()(i)));
  return t * t;
}

}  // namespace ptshadow

#endif  // PTSHADOW_METRICS_HPP
