#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <vector>

#include "mris/chain.hpp"
#include "mris/qm_core.hpp"
#include "mris/unraveling.hpp"

namespace mris {

// Block families over Omega. Stacked as v[w * d^2 + vec-index].
struct BlockFamily {
  int dim = 0;
  std::vector<Mat> blocks;

  int omega_count() const { return static_cast<int>(blocks.size()); }

  Vec stacked() const {
    const int d2 = dim * dim;
    Vec v(static_cast<Eigen::Index>(d2) * omega_count());
    for (int w = 0; w < omega_count(); ++w) v.segment(static_cast<Eigen::Index>(w) * d2, d2) = vec(blocks[w]);
    return v;
  }
  static BlockFamily from_stacked(const Vec& v, int d) {
    const int d2 = d * d;
    if (v.size() % d2 != 0) throw DimensionError("BlockFamily: stacked size is not a multiple of d^2");
    BlockFamily f;
    f.dim = d;
    for (Eigen::Index w = 0; w < v.size() / d2; ++w) f.blocks.push_back(unvec(v.segment(w * d2, d2), d));
    return f;
  }
  static BlockFamily constant(int d, int n, const Mat& m) { return {d, std::vector<Mat>(n, m)}; }
};

struct ExtendedState : BlockFamily {
  double total_trace() const {
    double t = 0.0;
    for (const auto& b : blocks) t += b.trace().real();
    return t;
  }
  static ExtendedState from_stacked(const Vec& v, int d) { return {BlockFamily::from_stacked(v, d)}; }
};

struct ExtendedObservable : BlockFamily {
  static ExtendedObservable from_stacked(const Vec& v, int d) { return {BlockFamily::from_stacked(v, d)}; }
  static ExtendedObservable identity_obs(int d, int n) { return {BlockFamily::constant(d, n, identity(d))}; }
};

// Throws DomainError if r is not a valid extended state.
inline void check_extended_state(const ExtendedState& r, const Tolerances& tol = {}) {
  for (const auto& b : r.blocks) {
    if (hermiticity_residual(b) > tol.herm) throw DomainError("ExtendedState: block is not Hermitian");
    if (eigh(b).values.minCoeff() < -tol.psd) throw DomainError("ExtendedState: block is not PSD");
  }
  if (std::abs(r.total_trace() - 1.0) > tol.trace) throw DomainError("ExtendedState: total trace != 1");
}

// <R, X> = sum_w tr(R(w)^dagger X(w)).
inline cplx pairing(const BlockFamily& r, const BlockFamily& x) {
  if (r.dim != x.dim || r.omega_count() != x.omega_count()) throw DimensionError("pairing: shape mismatch");
  cplx s = 0.0;
  for (int w = 0; w < r.omega_count(); ++w) s += (r.blocks[w].adjoint() * x.blocks[w]).trace();
  return s;
}

inline double expectation(const ExtendedState& r, const ExtendedObservable& x) { return pairing(r, x).real(); }

inline double trace_norm(const BlockFamily& f) {
  double s = 0.0;
  for (const auto& b : f.blocks) s += trace_norm(b);
  return s;
}

enum class GeneratorKind { reducible, irreducible_periodic, primitive };

inline const char* to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::reducible: return "reducible";
    case GeneratorKind::irreducible_periodic: return "irreducible_periodic";
    case GeneratorKind::primitive: return "primitive";
  }
  return "?";
}

struct GeneratorClassification {
  GeneratorKind kind = GeneratorKind::reducible;
  int period = 0;
  double gap = 0.0;
  double dominant_eigenvalue = 0.0;
  int one_multiplicity = 0;
  double left_right_overlap = 0.0;
  std::optional<ExtendedState> ess;
  std::optional<ExtendedObservable> left_fixed;
  std::vector<cplx> spectrum;  // sorted by decreasing modulus
  bool irreducible() const { return kind != GeneratorKind::reducible; }
  bool primitive() const { return kind == GeneratorKind::primitive; }
};

class ExtendedGenerator {
 public:
  ExtendedGenerator() = default;
  ExtendedGenerator(MarkovChain chain, std::vector<QuantumChannel> channels)
      : chain_(std::move(chain)), channels_(std::move(channels)) {
    if (static_cast<int>(channels_.size()) != chain_.size())
      throw DimensionError("build_generator: channel count does not match the chain");
    d_ = channels_.front().dim();
    for (const auto& c : channels_)
      if (c.dim() != d_) throw DimensionError("build_generator: channels have different dimensions");
    const int n = chain_.size(), d2 = d_ * d_;
    matrix_ = Mat::Zero(static_cast<Eigen::Index>(n) * d2, static_cast<Eigen::Index>(n) * d2);
    for (int w = 0; w < n; ++w)
      for (int v = 0; v < n; ++v) {
        const double p = chain_.P()(v, w);
        if (p != 0.0) matrix_.block(w * d2, v * d2, d2, d2) = p * channels_[v].superop();
      }
  }

  int dim() const { return d_; }
  int omega_count() const { return chain_.size(); }
  const Mat& matrix() const { return matrix_; }
  const MarkovChain& chain() const { return chain_; }
  const std::vector<QuantumChannel>& channels() const { return channels_; }

  // (LR)(w) = sum_v P_vw L_v R(v), evaluated blockwise through the Kraus maps.
  ExtendedState apply(const ExtendedState& r) const {
    const int n = omega_count();
    ExtendedState out{{d_, std::vector<Mat>(n, Mat::Zero(d_, d_))}};
    std::vector<Mat> images(n);
    for (int v = 0; v < n; ++v) images[v] = channels_[v].apply(r.blocks[v]);
    for (int w = 0; w < n; ++w)
      for (int v = 0; v < n; ++v) out.blocks[w] += chain_.P()(v, w) * images[v];
    return out;
  }

  // (L*X)(w) = sum_v P_wv L_w*(X(v)).
  ExtendedObservable apply_adjoint(const ExtendedObservable& x) const {
    const int n = omega_count();
    ExtendedObservable out{{d_, std::vector<Mat>(n)}};
    for (int w = 0; w < n; ++w) {
      Mat mix = Mat::Zero(d_, d_);
      for (int v = 0; v < n; ++v) mix += chain_.P()(w, v) * x.blocks[v];
      out.blocks[w] = channels_[w].apply_dual(mix);
    }
    return out;
  }

  struct Spectrum {
    Eigen::VectorXcd values;
    Mat right;
    Eigen::VectorXcd adjoint_values;
    Mat left;  // eigenvectors of matrix^dagger
  };

  // Full eigendecomposition, computed once and shared by copies.
  const Spectrum& spectrum() const {
    std::call_once(cache_->once, [this] {
      Eigen::ComplexEigenSolver<Mat> es(matrix_);
      Eigen::ComplexEigenSolver<Mat> ea(matrix_.adjoint());
      if (es.info() != Eigen::Success || ea.info() != Eigen::Success)
        throw NumericalError("classify_generator: eigensolver failed");
      cache_->spectrum = {es.eigenvalues(), es.eigenvectors(), ea.eigenvalues(), ea.eigenvectors()};
    });
    return cache_->spectrum;
  }

 private:
  struct Cache {
    std::once_flag once;
    Spectrum spectrum;
  };
  MarkovChain chain_;
  std::vector<QuantumChannel> channels_;
  int d_ = 0;
  Mat matrix_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

inline ExtendedGenerator build_generator(const MarkovChain& chain, const std::vector<QuantumChannel>& channels) {
  return ExtendedGenerator(chain, channels);
}

// Block-diagonal complete-positivity margin and trace-preservation residual
// of the generator viewed as a map on extended states.
inline ChoiReport generator_choi_verify(const ExtendedGenerator& g) {
  double lo = std::numeric_limits<double>::infinity(), tp = 0.0;
  const int n = g.omega_count();
  for (int v = 0; v < n; ++v) {
    const auto r = choi_verify(g.channels()[v]);
    for (int w = 0; w < n; ++w) lo = std::min(lo, g.chain().P()(v, w) * r.min_choi_eig);
    tp = std::max(tp, r.tp_residual);
  }
  const int d2 = g.dim() * g.dim();
  Vec ones(static_cast<Eigen::Index>(n) * d2);
  for (int w = 0; w < n; ++w) ones.segment(static_cast<Eigen::Index>(w) * d2, d2) = vec(identity(g.dim()));
  tp = std::max(tp, (g.matrix().adjoint() * ones - ones).cwiseAbs().maxCoeff());
  return {lo, tp};
}

// R_0(w) = sum_v pi_v P_vw rho_v.
inline ExtendedState initial_extended_state(const MarkovChain& chain, const std::vector<DensityMatrix>& rho_init) {
  const int n = chain.size();
  if (static_cast<int>(rho_init.size()) != n) throw DimensionError("initial_extended_state: one state per label required");
  const int d = rho_init.front().dim();
  ExtendedState r{{d, std::vector<Mat>(n, Mat::Zero(d, d))}};
  for (int w = 0; w < n; ++w)
    for (int v = 0; v < n; ++v) r.blocks[w] += chain.pi()(v) * chain.P()(v, w) * rho_init[v].matrix();
  return r;
}

inline ExtendedState evolve(const ExtendedGenerator& g, ExtendedState r, int n) {
  for (int k = 0; k < n; ++k) r = g.apply(r);
  return r;
}

inline double fixed_point_residual(const ExtendedGenerator& g, const ExtendedState& r) {
  const ExtendedState lr = g.apply(r);
  double s = 0.0;
  for (int w = 0; w < g.omega_count(); ++w) s += trace_norm(Mat(lr.blocks[w] - r.blocks[w]));
  return s;
}

namespace detail {

inline int count_near_one(const Eigen::VectorXcd& values, double tol) {
  int m = 0;
  for (Eigen::Index k = 0; k < values.size(); ++k)
    if (std::abs(values(k) - 1.0) <= tol) ++m;
  return m;
}

// Normalized ESS from the fixed-point equation (L - I) r = 0, sum tr r = 1.
inline ExtendedState solve_fixed_point(const ExtendedGenerator& g, const Tolerances& tol) {
  const int n = g.omega_count(), d = g.dim(), d2 = d * d;
  const Eigen::Index big = static_cast<Eigen::Index>(n) * d2;
  Mat a(big + 1, big);
  a.topRows(big) = g.matrix() - Mat::Identity(big, big);
  a.row(big).setZero();
  for (int w = 0; w < n; ++w)
    for (int i = 0; i < d; ++i) a(big, static_cast<Eigen::Index>(w) * d2 + i + d * i) = 1.0;
  Vec b = Vec::Zero(big + 1);
  b(big) = 1.0;
  const Vec x = a.colPivHouseholderQr().solve(b);
  ExtendedState r = ExtendedState::from_stacked(x, d);
  for (auto& blk : r.blocks) {
    const auto e = eigh(blk);
    RVec lam = e.values;
    for (Eigen::Index k = 0; k < lam.size(); ++k) {
      if (lam(k) < -tol.ess_clip)
        throw NumericalError("find_ess: fixed point has eigenvalue " + std::to_string(lam(k)) + " below the clip floor");
      if (lam(k) < 0.0) lam(k) = 0.0;
    }
    blk = e.vectors * lam.cast<cplx>().asDiagonal() * e.vectors.adjoint();
  }
  const double t = r.total_trace();
  for (auto& blk : r.blocks) blk /= t;
  return r;
}

}  // namespace detail

inline ExtendedState find_ess(const ExtendedGenerator& g, const Tolerances& tol = {}) {
  const int m = detail::count_near_one(g.spectrum().values, tol.eig_one);
  if (m != 1) throw NotSimpleError("find_ess: eigenvalue 1 has multiplicity " + std::to_string(m), m);
  return detail::solve_fixed_point(g, tol);
}

inline GeneratorClassification classify_generator(const ExtendedGenerator& g, const Tolerances& tol = {}) {
  const auto& sp = g.spectrum();
  GeneratorClassification out;
  const Eigen::Index big = sp.values.size();
  out.spectrum.assign(sp.values.data(), sp.values.data() + big);
  std::sort(out.spectrum.begin(), out.spectrum.end(), [](cplx a, cplx b) { return std::abs(a) > std::abs(b); });
  out.dominant_eigenvalue = std::abs(out.spectrum.front());
  out.one_multiplicity = detail::count_near_one(sp.values, tol.eig_one);

  // Algebraic simplicity: the left and right eigenvectors of eigenvalue 1
  // must not be orthogonal (a Jordan block would make them so).
  bool simple = false;
  if (out.one_multiplicity == 1) {
    Eigen::Index ir = 0, il = 0;
    for (Eigen::Index k = 0; k < big; ++k) {
      if (std::abs(sp.values(k) - 1.0) < std::abs(sp.values(ir) - 1.0)) ir = k;
      if (std::abs(sp.adjoint_values(k) - 1.0) < std::abs(sp.adjoint_values(il) - 1.0)) il = k;
    }
    const Vec r = sp.right.col(ir), l = sp.left.col(il);
    out.left_right_overlap = std::abs(l.dot(r)) / (l.norm() * r.norm());
    simple = out.left_right_overlap > 1e-8;
  }

  std::vector<cplx> peripheral;
  double inner = 0.0;
  for (cplx z : out.spectrum) {
    if (std::abs(std::abs(z) - 1.0) <= tol.peripheral)
      peripheral.push_back(z);
    else
      inner = std::max(inner, std::abs(z));
  }
  out.gap = inner > 0.0 ? -std::log(inner) : std::numeric_limits<double>::infinity();

  // Period p: the peripheral spectrum is exactly the p-th roots of unity.
  const int p = static_cast<int>(peripheral.size());
  bool roots = p > 0;
  for (int a = 0; a < p && roots; ++a) {
    if (std::abs(std::pow(peripheral[a], p) - 1.0) > 1e-6 * p) roots = false;
    for (int b = a + 1; b < p; ++b)
      if (std::abs(peripheral[a] - peripheral[b]) <= 1e-6) roots = false;
  }
  out.period = roots ? p : 0;

  if (!simple) {
    out.kind = GeneratorKind::reducible;
    return out;
  }
  out.kind = (out.period == 1 && out.gap > tol.gap) ? GeneratorKind::primitive : GeneratorKind::irreducible_periodic;
  out.ess = detail::solve_fixed_point(g, tol);

  Eigen::Index il = 0;
  for (Eigen::Index k = 0; k < big; ++k)
    if (std::abs(sp.adjoint_values(k) - 1.0) < std::abs(sp.adjoint_values(il) - 1.0)) il = k;
  auto left = ExtendedObservable::from_stacked(sp.left.col(il), g.dim());
  const cplx norm = pairing(*out.ess, left);
  for (auto& b : left.blocks) b = hermitian_part(Mat(b / norm));
  out.left_fixed = left;
  return out;
}

// True when every block with tr R(w) > pi_floor is positive definite.
inline bool ess_faithful(const ExtendedState& r, const Tolerances& tol = {}) {
  for (const auto& b : r.blocks)
    if (b.trace().real() > tol.pi_floor && eigh(b).values.minCoeff() <= 0.0) return false;
  return true;
}

struct EssDecomposition {
  RVec pi_plus;
  std::vector<Mat> rho_plus;
};

inline EssDecomposition ess_decompose(const ExtendedGenerator& g, const ExtendedState& r_plus,
                                      const Tolerances& tol = {}) {
  if (fixed_point_residual(g, r_plus) > 1e-8) throw DomainError("ess_decompose: state is not fixed by the generator");
  const int n = g.omega_count(), d = g.dim();
  EssDecomposition out;
  out.pi_plus.resize(n);
  for (int w = 0; w < n; ++w) {
    const double t = r_plus.blocks[w].trace().real();
    out.pi_plus(w) = t;
    if (t > tol.pi_floor)
      out.rho_plus.push_back(hermitian_part(Mat(g.channels()[w].apply(r_plus.blocks[w]) / t)));
    else
      out.rho_plus.push_back(identity(d) / static_cast<double>(d));
  }
  return out;
}

// sum_v P_vw pi_+v rho_+v, which reproduces R_+(w).
inline ExtendedState reconstruct_ess(const MarkovChain& chain, const EssDecomposition& dec) {
  const int n = chain.size(), d = static_cast<int>(dec.rho_plus.front().rows());
  ExtendedState r{{d, std::vector<Mat>(n, Mat::Zero(d, d))}};
  for (int w = 0; w < n; ++w)
    for (int v = 0; v < n; ++v) r.blocks[w] += chain.P()(v, w) * dec.pi_plus(v) * dec.rho_plus[v];
  return r;
}

// The alpha-tilted generator: (L^[a] R)(w) = sum_v P_vw L_v^[a_v] R(v). CP,
// generally not trace preserving.
class DeformedGenerator {
 public:
  DeformedGenerator(const MarkovChain& chain, const std::vector<Unraveling>& unravelings, const RVec& alpha) {
    const int n = chain.size();
    if (static_cast<int>(unravelings.size()) != n || alpha.size() != n)
      throw DimensionError("deformed_generator: alpha/unraveling count does not match the chain");
    const Eigen::Index d2 = unravelings.front().terms.front().superop.rows();
    d_ = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d2))));
    n_ = n;
    matrix_ = Mat::Zero(n * d2, n * d2);
    for (int v = 0; v < n; ++v) {
      const Mat sv = unravelings[v].deformed_superop(alpha(v));
      for (int w = 0; w < n; ++w) {
        const double p = chain.P()(v, w);
        if (p != 0.0) matrix_.block(w * d2, v * d2, d2, d2) = p * sv;
      }
    }
  }
  int dim() const { return d_; }
  int omega_count() const { return n_; }
  const Mat& matrix() const { return matrix_; }
  Vec apply(const Vec& r) const { return matrix_ * r; }

 private:
  int d_ = 0, n_ = 0;
  Mat matrix_;
};

}  // namespace mris
