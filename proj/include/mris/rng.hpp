#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "mris/common.hpp"

namespace mris {

// Counter-based generator: draw k of stream `seed` is mix(key(seed) + k * gamma),
// with the SplitMix64 finalizer as mixing function. Bit-identical on every
// platform; uniform and normal variates are derived here rather than through
// <random> distributions, whose algorithms are implementation-defined.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * kGamma); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Inverse-CDF draw from unnormalized nonnegative weights w[0..n).
template <class Weights>
int sample_index(const Weights& w, int n, double u) {
  double total = 0.0;
  for (int k = 0; k < n; ++k) total += w[k];
  const double target = u * total;
  double acc = 0.0;
  int last = -1;
  for (int k = 0; k < n; ++k) {
    if (w[k] <= 0.0) continue;
    acc += w[k];
    last = k;
    if (target < acc) return k;
  }
  return last;
}

inline Mat random_complex_matrix(int rows, int cols, CounterRng& rng) {
  Mat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = cplx(rng.normal(), rng.normal());
  return m;
}

inline Mat random_hermitian(int d, CounterRng& rng) {
  const Mat g = random_complex_matrix(d, d, rng);
  return 0.5 * (g + g.adjoint());
}

inline Mat random_real_symmetric(int d, CounterRng& rng) {
  RMat g(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) g(i, j) = rng.normal();
  return (0.5 * (g + g.transpose())).cast<cplx>();
}

// Full-rank density matrix G G^dagger / tr.
inline Mat random_density(int d, CounterRng& rng) {
  const Mat g = random_complex_matrix(d, d, rng);
  Mat rho = g * g.adjoint();
  return rho / rho.trace().real();
}

inline Mat random_unitary(int d, CounterRng& rng) {
  Eigen::HouseholderQR<Mat> qr(random_complex_matrix(d, d, rng));
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR();
  for (int k = 0; k < d; ++k) {
    const cplx rk = r(k, k);
    if (std::abs(rk) > 0.0) q.col(k) *= rk / std::abs(rk);
  }
  return q;
}

inline RMat random_stochastic(int n, CounterRng& rng, double floor = 0.0) {
  RMat p(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) p(i, j) = floor + rng.uniform();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

}  // namespace mris
