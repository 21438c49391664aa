/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_RNG_HPP
#define PTSHADOW_RNG_HPP

#include "ptshadow/core.hpp"

namespace ptshadow {

/// Deterministic splittable RNG (splitmix64 core). Distributions are
/// hand-rolled so that streams are bit-exact across platforms and thread
/// counts: worker streams are derived by `split`, never by sharing state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Independent child stream; the documented splitting rule is
  /// child_seed = mix(parent_state, key).
  Rng split(std::uint64_t key) {
    Rng mixer(state_ ^ (0x632be59bd9b4e019ULL * (key + 1)));
    return Rng(mixer.next_u64());
  }

  double uniform() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t uniform_int(std::uint64_t n) {  // [0, n)
    // modulo bias is < 2^-53 for our n; acceptable and reproducible
    return next_u64() % n;
  }

  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Sample an index from a discrete distribution (need not be normalized).
  std::size_t sample_discrete(const std::vector<double>& w) {
    double tot = 0.0;
    for (double x : w) tot += std::max(0.0, x);
    double r = uniform() * tot;
    for (std::size_t i = 0; i < w.size(); ++i) {
      r -= std::max(0.0, w[i]);
      if (r <= 0.0) return i;
    }
    return w.size() - 1;
  }

  /// Haar-random unitary via QR of a Ginibre matrix.
  Matrix haar_unitary(Index d) {
    Matrix g(d, d);
    for (Index r = 0; r < d; ++r)
      for (Index c = 0; c < d; ++c) g(r, c) = Complex(gaussian(), gaussian());
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    Matrix rm = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index i = 0; i < d; ++i) {
      Complex diag = rm(i, i);
      q.col(i) *= (diag == Complex(0.0) ? 1.0 : diag / std::abs(diag));
    }
    return q;
  }

 private:
  std::uint64_t state_;
};

}  // namespace ptshadow

#endif  // PTSHADOW_RNG_HPP
