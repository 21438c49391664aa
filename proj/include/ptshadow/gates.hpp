/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_GATES_HPP
#define PTSHADOW_GATES_HPP

#include "ptshadow/core.hpp"

namespace ptshadow::gates {

inline const Complex kI1{0.0, 1.0};

inline Matrix pauli(char c) {
  Matrix m(2, 2);
  switch (c) {
    case 'I':
    case 'i':
      m << 1, 0, 0, 1;
      break;
    case 'X':
    case 'x':
      m << 0, 1, 1, 0;
      break;
    case 'Y':
    case 'y':
      m << 0, Complex(0, -1), Complex(0, 1), 0;
      break;
    case 'Z':
    case 'z':
      m << 1, 0, 0, -1;
      break;
    default:
      throw std::invalid_argument("pauli: unknown label");
  }
  return m;
}

inline Matrix h() {
  Matrix m(2, 2);
  const double s = 1.0 / std::sqrt(2.0);
  m << s, s, s, -s;
  return m;
}

/// Phase gate diag(1, i); f()*f() = Z.
inline Matrix f() {
  Matrix m(2, 2);
  m << 1, 0, 0, kI1;
  return m;
}

/// General single-qubit unitary; w(0,0,0) = I.
inline Matrix w(double theta, double phi, double lambda) {
  Matrix m(2, 2);
  const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
  m << c, -std::exp(kI1 * lambda) * s, std::exp(kI1 * phi) * s,
      std::exp(kI1 * (lambda + phi)) * c;
  return m;
}

/// exp(-i(gamma/2) X (x) Z) on the ordered pair (first (x) second).
inline Matrix v_gamma(double gamma) {
  const Matrix xz = kron(pauli('X'), pauli('Z'));
  return std::cos(gamma / 2.0) * identity(4) -
         kI1 * std::sin(gamma / 2.0) * xz;
}

inline Matrix swap2() {
  Matrix m = Matrix::Zero(4, 4);
  m(0, 0) = 1;
  m(1, 2) = 1;
  m(2, 1) = 1;
  m(3, 3) = 1;
  return m;
}

/// exp(-i alpha (XX + YY + ZZ) / 2): exchange coupling between two qubits.
inline Matrix exchange(double alpha) {
  const Matrix heis = kron(pauli('X'), pauli('X')) +
                      kron(pauli('Y'), pauli('Y')) +
                      kron(pauli('Z'), pauli('Z'));
  auto es = herm_eig(heis);
  Vector phase(es.eigenvalues().size());
  for (Index i = 0; i < phase.size(); ++i)
    phase(i) = std::exp(-kI1 * alpha * es.eigenvalues()(i) / 2.0);
  return es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
}

inline bool is_unitary(const Matrix& u, double tol = 1e-12) {
  return (u.adjoint() * u - identity(u.rows())).cwiseAbs().maxCoeff() <= tol;
}

// Common pure states as kets.
inline Vector ket0() {
  Vector v(2);
  v << 1, 0;
  return v;
}
inline Vector ket1() {
  Vector v(2);
  v << 0, 1;
  return v;
}
inline Vector ket_plus() { return (ket0() + ket1()) / std::sqrt(2.0); }
inline Vector ket_iplus() { return (ket0() + kI1 * ket1()) / std::sqrt(2.0); }

inline Matrix projector(const Vector& ket) { return ket * ket.adjoint(); }

}  // namespace ptshadow::gates

#endif  // PTSHADOW_GATES_HPP
