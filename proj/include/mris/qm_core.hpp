#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "mris/common.hpp"

namespace mris {

// ---------------------------------------------------------------------------
// Plain matrix helpers

inline Mat identity(int d) { return Mat::Identity(d, d); }

inline Mat tensor(const Mat& a, const Mat& b) {
  const Eigen::Index ra = a.rows(), ca = a.cols(), rb = b.rows(), cb = b.cols();
  Mat out(ra * rb, ca * cb);
  for (Eigen::Index i = 0; i < ra; ++i)
    for (Eigen::Index j = 0; j < ca; ++j) out.block(i * rb, j * cb, rb, cb) = a(i, j) * b;
  return out;
}

// Index convention on H_S (x) H_E: row i*dE + a, system index i, probe index a.
inline Mat partial_trace_env(const Mat& m, int dS, int dE) {
  if (m.rows() != dS * dE || m.cols() != dS * dE)
    throw DimensionError("partial_trace_env: matrix is not (dS*dE)x(dS*dE)");
  Mat out = Mat::Zero(dS, dS);
  for (int i = 0; i < dS; ++i)
    for (int j = 0; j < dS; ++j)
      for (int a = 0; a < dE; ++a) out(i, j) += m(i * dE + a, j * dE + a);
  return out;
}

inline Mat partial_trace_sys(const Mat& m, int dS, int dE) {
  if (m.rows() != dS * dE || m.cols() != dS * dE)
    throw DimensionError("partial_trace_sys: matrix is not (dS*dE)x(dS*dE)");
  Mat out = Mat::Zero(dE, dE);
  for (int a = 0; a < dE; ++a)
    for (int b = 0; b < dE; ++b)
      for (int i = 0; i < dS; ++i) out(a, b) += m(i * dE + a, i * dE + b);
  return out;
}

inline double hermiticity_residual(const Mat& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline Mat hermitian_part(const Mat& m) { return 0.5 * (m + m.adjoint()); }

// Column-stacking vectorization: vec(rho)[i + d*j] = rho(i, j).
inline Vec vec(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

inline Mat unvec(const Vec& v, int d) {
  if (v.size() != static_cast<Eigen::Index>(d) * d) throw DimensionError("unvec: size mismatch");
  return Eigen::Map<const Mat>(v.data(), d, d);
}

struct HermitianEigen {
  RVec values;  // ascending
  Mat vectors;  // columns
};

inline HermitianEigen eigh(const Mat& h) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(h));
  if (es.info() != Eigen::Success) throw NumericalError("eigh: eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

// f(H) for Hermitian H via its eigendecomposition.
template <class F>
Mat hermitian_function(const Mat& h, F&& f) {
  const auto e = eigh(h);
  Vec fv(e.values.size());
  for (Eigen::Index k = 0; k < e.values.size(); ++k) fv(k) = f(e.values(k));
  return e.vectors * fv.asDiagonal() * e.vectors.adjoint();
}

// Trace norm of a (not necessarily Hermitian) matrix.
inline double trace_norm(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues().sum();
}

// ---------------------------------------------------------------------------
// Validated operator types

class Observable {
 public:
  Observable() = default;
  explicit Observable(const Mat& m, const Tolerances& tol = {}) {
    if (m.rows() != m.cols() || m.rows() == 0) throw DimensionError("Observable: matrix must be square");
    const double r = hermiticity_residual(m);
    if (!(r <= tol.herm)) throw DomainError("Observable: matrix is not Hermitian (residual " + std::to_string(r) + ")");
    m_ = hermitian_part(m);
  }
  int dim() const { return static_cast<int>(m_.rows()); }
  const Mat& matrix() const { return m_; }

 private:
  Mat m_;
};

class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(const Mat& m, const Tolerances& tol = {}) {
    if (m.rows() != m.cols() || m.rows() == 0) throw DimensionError("DensityMatrix: matrix must be square");
    const double r = hermiticity_residual(m);
    if (!(r <= tol.herm)) throw DomainError("DensityMatrix: matrix is not Hermitian (residual " + std::to_string(r) + ")");
    m_ = hermitian_part(m);
    const double tr = m_.trace().real();
    if (!(std::abs(tr - 1.0) <= tol.trace)) throw DomainError("DensityMatrix: trace " + std::to_string(tr) + " != 1");
    const double lo = eigh(m_).values.minCoeff();
    if (!(lo >= -tol.psd)) throw DomainError("DensityMatrix: negative eigenvalue " + std::to_string(lo));
  }
  static DensityMatrix maximally_mixed(int d) {
    DensityMatrix r;
    r.m_ = identity(d) / static_cast<double>(d);
    return r;
  }
  int dim() const { return static_cast<int>(m_.rows()); }
  const Mat& matrix() const { return m_; }

 private:
  Mat m_;
};

class UnitaryPropagator {
 public:
  UnitaryPropagator() = default;
  explicit UnitaryPropagator(const Mat& u, const Tolerances& tol = {}) {
    if (u.rows() != u.cols() || u.rows() == 0) throw DimensionError("UnitaryPropagator: matrix must be square");
    const double r = (u * u.adjoint() - identity(static_cast<int>(u.rows()))).cwiseAbs().maxCoeff();
    if (!(r <= tol.unit)) throw DomainError("UnitaryPropagator: matrix is not unitary (residual " + std::to_string(r) + ")");
    u_ = u;
  }
  int dim() const { return static_cast<int>(u_.rows()); }
  const Mat& matrix() const { return u_; }

 private:
  Mat u_;
};

// ---------------------------------------------------------------------------
// Channels

// Superoperator of rho -> sum K rho K^dagger under column stacking.
inline Mat superop_from_kraus(const std::vector<Mat>& kraus, int d) {
  Mat s = Mat::Zero(d * d, d * d);
  for (const auto& k : kraus) s += tensor(k.conjugate(), k);
  return s;
}

class QuantumChannel {
 public:
  QuantumChannel() = default;
  QuantumChannel(int dim, std::vector<Mat> kraus) : dim_(dim), kraus_(std::move(kraus)) {
    for (const auto& k : kraus_)
      if (k.rows() != dim_ || k.cols() != dim_) throw DimensionError("QuantumChannel: Kraus operator has wrong shape");
    superop_ = superop_from_kraus(kraus_, dim_);
  }
  static QuantumChannel identity_channel(int d) { return QuantumChannel(d, {identity(d)}); }
  static QuantumChannel unitary_channel(const Mat& u) { return QuantumChannel(static_cast<int>(u.rows()), {u}); }

  int dim() const { return dim_; }
  const std::vector<Mat>& kraus() const { return kraus_; }
  const Mat& superop() const { return superop_; }

  Mat apply(const Mat& rho) const {
    Mat out = Mat::Zero(dim_, dim_);
    for (const auto& k : kraus_) out += k * rho * k.adjoint();
    return out;
  }
  // Heisenberg-picture dual L*(X) = sum K^dagger X K.
  Mat apply_dual(const Mat& x) const {
    Mat out = Mat::Zero(dim_, dim_);
    for (const auto& k : kraus_) out += k.adjoint() * x * k;
    return out;
  }
  Mat apply_superop(const Mat& rho) const { return unvec(superop_ * vec(rho), dim_); }

  double tp_residual() const {
    Mat s = Mat::Zero(dim_, dim_);
    for (const auto& k : kraus_) s += k.adjoint() * k;
    return (s - identity(dim_)).cwiseAbs().maxCoeff();
  }
  // Max deviation between Kraus and superoperator actions on matrix units.
  double consistency_residual() const {
    double r = 0.0;
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) {
        Mat e = Mat::Zero(dim_, dim_);
        e(i, j) = 1.0;
        r = std::max(r, (apply(e) - apply_superop(e)).cwiseAbs().maxCoeff());
      }
    return r;
  }

 private:
  int dim_ = 0;
  std::vector<Mat> kraus_;
  Mat superop_;
};

// Choi matrix sum_ij E_ij (x) Phi(E_ij) of the map with superoperator s.
inline Mat choi_matrix(const Mat& superop, int d) {
  Mat c = Mat::Zero(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      Mat e = Mat::Zero(d, d);
      e(i, j) = 1.0;
      const Mat img = unvec(superop * vec(e), d);
      c.block(i * d, j * d, d, d) = img;
    }
  return c;
}

struct ChoiReport {
  double min_choi_eig;
  double tp_residual;
};

// Works for any linear map given by its superoperator; tp_residual is
// max_ij |tr Phi(E_ij) - delta_ij|.
inline ChoiReport choi_verify(const Mat& superop, int d) {
  const Mat c = choi_matrix(superop, d);
  const double lo = eigh(c).values.minCoeff();
  double tp = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      cplx t = 0.0;
      for (int k = 0; k < d; ++k) t += superop(k + d * k, i + d * j);
      tp = std::max(tp, std::abs(t - (i == j ? 1.0 : 0.0)));
    }
  return {lo, tp};
}

inline ChoiReport choi_verify(const QuantumChannel& k) {
  auto r = choi_verify(k.superop(), k.dim());
  r.tp_residual = k.tp_residual();
  return r;
}

// ---------------------------------------------------------------------------
// Thermal states, propagators, reduced maps

struct ThermalState {
  DensityMatrix rho;
  std::optional<double> free_energy;  // absent at beta = 0
};

inline ThermalState thermal_state(const Observable& h, double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("thermal_state: beta must be finite and >= 0");
  const auto e = eigh(h.matrix());
  const double emin = e.values.minCoeff();
  RVec w = (-beta * (e.values.array() - emin)).exp();
  const double z = w.sum();
  Mat rho = e.vectors * (w / z).cast<cplx>().asDiagonal() * e.vectors.adjoint();
  ThermalState out{DensityMatrix(rho), std::nullopt};
  if (beta > 0.0) out.free_energy = emin - std::log(z) / beta;
  return out;
}

inline UnitaryPropagator propagator(const Observable& h_total, double tau, const Tolerances& tol = {}) {
  const Mat u = hermitian_function(h_total.matrix(), [tau](double x) { return std::exp(cplx(0.0, -tau * x)); });
  return UnitaryPropagator(u, tol);
}

struct SpectralDecomposition {
  std::vector<double> eigenvalues;  // ascending, one per cluster
  std::vector<Mat> projections;
  std::vector<Mat> bases;  // orthonormal columns spanning each projection
  double degeneracy_tol = 0.0;
};

// Eigenvalues closer than degeneracy_tol to their neighbour share a cluster.
inline SpectralDecomposition spectral_projections(const Observable& h, double degeneracy_tol) {
  const auto e = eigh(h.matrix());
  SpectralDecomposition out;
  out.degeneracy_tol = degeneracy_tol;
  const Eigen::Index n = e.values.size();
  Eigen::Index start = 0;
  for (Eigen::Index k = 1; k <= n; ++k) {
    if (k < n && e.values(k) - e.values(k - 1) <= degeneracy_tol) continue;
    const Eigen::Index len = k - start;
    const Mat basis = e.vectors.middleCols(start, len);
    out.eigenvalues.push_back(e.values.segment(start, len).mean());
    out.bases.push_back(basis);
    out.projections.push_back(basis * basis.adjoint());
    start = k;
  }
  return out;
}

// Kraus family of rho -> tr_E(U (rho (x) rho_env) U^dagger) in the eigenbasis
// {phi_a} of rho_env: K_{ab} = sqrt(p_a) <phi_b|U|phi_a>_E. Operators with
// p_a == 0 are dropped, so singular probe states are accepted.
inline QuantumChannel reduced_map(const UnitaryPropagator& u, const DensityMatrix& rho_env, int dS) {
  const int dE = rho_env.dim();
  if (u.dim() != dS * dE) throw DimensionError("reduced_map: propagator dimension is not dS*dE");
  const auto e = eigh(rho_env.matrix());
  const Mat w = tensor(identity(dS), e.vectors).adjoint() * u.matrix() * tensor(identity(dS), e.vectors);
  std::vector<Mat> kraus;
  for (int a = 0; a < dE; ++a) {
    const double p = e.values(a);
    if (p <= 0.0) continue;
    const double amp = std::sqrt(p);
    for (int b = 0; b < dE; ++b) {
      Mat k(dS, dS);
      for (int i = 0; i < dS; ++i)
        for (int j = 0; j < dS; ++j) k(i, j) = amp * w(i * dE + b, j * dE + a);
      kraus.push_back(std::move(k));
    }
  }
  return QuantumChannel(dS, std::move(kraus));
}

// ---------------------------------------------------------------------------
// Entropies

inline double von_neumann_entropy(const Mat& rho) {
  const auto e = eigh(rho);
  double s = 0.0;
  for (Eigen::Index k = 0; k < e.values.size(); ++k) {
    const double p = e.values(k);
    if (p > 0.0) s -= p * std::log(p);
  }
  return s;
}

struct RelativeEntropy {
  double value;
  bool infinite;
};

// Ent(mu | sigma) = tr mu (log mu - log sigma); +inf when Ran mu is not
// contained in Ran sigma beyond support_tol.
inline RelativeEntropy relative_entropy(const Mat& mu, const Mat& sigma, double floor = 1e-300,
                                        double support_tol = 1e-10) {
  const auto em = eigh(mu);
  const auto es = eigh(sigma);
  double v = 0.0;
  for (Eigen::Index k = 0; k < em.values.size(); ++k) {
    const double p = em.values(k);
    if (p > 0.0) v += p * std::log(std::max(p, floor));
  }
  const Mat mu_in_sigma = es.vectors.adjoint() * hermitian_part(mu) * es.vectors;
  for (Eigen::Index k = 0; k < es.values.size(); ++k) {
    const double weight = mu_in_sigma(k, k).real();
    const double q = es.values(k);
    if (q <= support_tol && weight > support_tol) return {std::numeric_limits<double>::infinity(), true};
    v -= weight * std::log(std::max(q, floor));
  }
  return {v, false};
}

}  // namespace mris
