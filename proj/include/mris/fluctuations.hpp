#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <vector>

#include "mris/extended.hpp"
#include "mris/parallel.hpp"
#include "mris/probes.hpp"
#include "mris/trajectories.hpp"

namespace mris {

// e(alpha) = log l(alpha), l the spectral radius of the deformed generator.
// Values are cached under alpha quantized to 12 decimals.
class CumulantFunction {
 public:
  explicit CumulantFunction(const MrisModel& m) : m_(&m) {
    if (!classify_generator(m.generator(), m.tol()).irreducible())
      throw DomainError("cumulant: generator is reducible");
    (void)m.unravelings();
  }
  explicit CumulantFunction(MrisModel&&) = delete;  // holds a pointer to the model

  const MrisModel& model() const { return *m_; }
  int size() const { return m_->omega_count(); }

  double ell(const RVec& alpha) const {
    const Key key = quantize(alpha);
    {
      std::lock_guard<std::mutex> lock(*mutex_);
      const auto it = cache_->find(key);
      if (it != cache_->end()) return it->second;
    }
    const double l = dominant_eigenvalue(DeformedGenerator(m_->chain(), m_->unravelings(), alpha).matrix());
    std::lock_guard<std::mutex> lock(*mutex_);
    cache_->emplace(key, l);
    return l;
  }

  double operator()(const RVec& alpha) const { return std::log(ell(alpha)); }

  // Diagonal similarity by powers of two equalizing row and column norms
  // (Parlett-Reinsch). Exact in floating point; deformed generators at large
  // |alpha| are badly scaled in the energy basis and need it.
  static Mat balanced(Mat a) {
    const Eigen::Index n = a.rows();
    bool converged = false;
    while (!converged) {
      converged = true;
      for (Eigen::Index i = 0; i < n; ++i) {
        double c = 0.0, r = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
          if (j != i) {
            c += std::abs(a(j, i));
            r += std::abs(a(i, j));
          }
        if (c == 0.0 || r == 0.0) continue;
        const double s = c + r;
        double f = 1.0;
        while (c < r / 2.0) {
          f *= 2.0;
          c *= 4.0;
        }
        while (c > r * 2.0) {
          f /= 2.0;
          c /= 4.0;
        }
        if ((c + r) / f < 0.95 * s) {
          converged = false;
          a.row(i) /= f;
          a.col(i) *= f;
        }
      }
    }
    return a;
  }

  // Real positive eigenvalue of largest modulus; throws if the dominant
  // eigenvalue is not real and positive.
  static double dominant_eigenvalue(const Mat& a) {
    Eigen::ComplexEigenSolver<Mat> es(balanced(a), false);
    if (es.info() != Eigen::Success) throw NumericalError("cumulant: eigensolver failed");
    const auto& ev = es.eigenvalues();
    double rmax = 0.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) rmax = std::max(rmax, std::abs(ev(k)));
    cplx best = ev(0);
    bool found = false;
    for (Eigen::Index k = 0; k < ev.size(); ++k)
      if (std::abs(ev(k)) >= rmax * (1.0 - 1e-9) && (!found || ev(k).real() > best.real())) {
        best = ev(k);
        found = true;
      }
    if (std::abs(best.imag()) > 1e-10 * std::max(1.0, rmax) || !(best.real() > 0.0))
      throw NumericalError("cumulant: dominant eigenvalue is not real positive");
    return best.real();
  }

 private:
  using Key = std::vector<long long>;
  static Key quantize(const RVec& a) {
    Key k;
    for (Eigen::Index i = 0; i < a.size(); ++i) k.push_back(std::llround(a(i) * 1e12));
    return k;
  }
  const MrisModel* m_;
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
  std::shared_ptr<std::map<Key, double>> cache_ = std::make_shared<std::map<Key, double>>();
};

inline double e_of_alpha(const MrisModel& m, const RVec& alpha) { return CumulantFunction(m)(alpha); }

struct SymmetryReport {
  double max_residual = 0.0;
  bool pass = false;
  int points = 0;
};

// max |e(1 - alpha) - e(alpha)| over the grid, verdict at 1e-8.
inline SymmetryReport gc_symmetry_report(const MrisModel& m, const std::vector<RVec>& alpha_grid,
                                         double tol = 1e-8) {
  const CumulantFunction e(m);
  const RVec one = RVec::Ones(m.omega_count());
  SymmetryReport r;
  for (const auto& a : alpha_grid) {
    r.max_residual = std::max(r.max_residual, std::abs(e(RVec(one - a)) - e(a)));
    ++r.points;
  }
  r.pass = r.max_residual <= tol;
  return r;
}

// max |e(alpha + gamma beta^-1) - e(alpha)| with beta^-1 = (1/beta_w)_w.
inline SymmetryReport translation_symmetry_report(const MrisModel& model_zeta, const std::vector<RVec>& alpha_grid,
                                                  const std::vector<double>& gamma_grid, double tol = 1e-8) {
  const CumulantFunction e(model_zeta);
  const RVec binv = model_zeta.betas().cwiseInverse();
  SymmetryReport r;
  for (const auto& a : alpha_grid)
    for (double g : gamma_grid) {
      r.max_residual = std::max(r.max_residual, std::abs(e(RVec(a + g * binv)) - e(a)));
      ++r.points;
    }
  r.pass = r.max_residual <= tol;
  return r;
}

// ---------------------------------------------------------------------------
// Finite differences

namespace detail {

using ScalarField = std::function<double(const RVec&)>;

inline RVec unit(int n, int i) {
  RVec u = RVec::Zero(n);
  u(i) = 1.0;
  return u;
}

// Central gradient at x with one Richardson step (h, h/2).
inline RVec fd_gradient(const ScalarField& f, const RVec& x, double h) {
  const int n = static_cast<int>(x.size());
  RVec g(n);
  for (int i = 0; i < n; ++i) {
    const RVec u = unit(n, i);
    auto central = [&](double s) { return (f(RVec(x + s * u)) - f(RVec(x - s * u))) / (2.0 * s); };
    g(i) = (4.0 * central(h / 2.0) - central(h)) / 3.0;
  }
  return g;
}

// Hessian from the 3x3 stencil on every coordinate pair, Richardson-extrapolated.
inline RMat fd_hessian(const ScalarField& f, const RVec& x, double h, bool richardson = true) {
  const int n = static_cast<int>(x.size());
  const double f0 = f(x);
  RMat hm(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const RVec ui = unit(n, i), uj = unit(n, j);
      auto stencil = [&](double s) {
        if (i == j) return (f(RVec(x + s * ui)) - 2.0 * f0 + f(RVec(x - s * ui))) / (s * s);
        return (f(RVec(x + s * ui + s * uj)) - f(RVec(x + s * ui - s * uj)) - f(RVec(x - s * ui + s * uj)) +
                f(RVec(x - s * ui - s * uj))) /
               (4.0 * s * s);
      };
      const double v = richardson ? (4.0 * stencil(h / 2.0) - stencil(h)) / 3.0 : stencil(h);
      hm(i, j) = hm(j, i) = v;
    }
  return hm;
}

}  // namespace detail

struct CltCovariance {
  RMat C;
  RVec first_derivs;   // l_w
  RMat second_derivs;  // l_wv
};

// C = l_wv - l_w l_v at alpha = 0. The Hessian step is larger than the
// gradient step: below ~1e-3 eigensolver round-off dominates the stencil.
inline CltCovariance clt_covariance(const MrisModel& m, double h = 1e-4, double h_hess = 1e-3) {
  const CumulantFunction e(m);
  const detail::ScalarField ell = [&](const RVec& a) { return e.ell(a); };
  const RVec zero = RVec::Zero(m.omega_count());
  CltCovariance out;
  out.first_derivs = detail::fd_gradient(ell, zero, h);
  out.second_derivs = detail::fd_hessian(ell, zero, h_hess);
  out.C = out.second_derivs - out.first_derivs * out.first_derivs.transpose();
  out.C = 0.5 * (out.C + out.C.transpose());
  return out;
}

// -(d e / d alpha)(0): the asymptotic mean of S_N J / N.
inline RVec mean_entropy_rate(const MrisModel& m, double h = 1e-4) {
  const CumulantFunction e(m);
  const detail::ScalarField f = [&](const RVec& a) { return e(a); };
  return -detail::fd_gradient(f, RVec::Zero(m.omega_count()), h);
}

// ---------------------------------------------------------------------------
// Legendre transforms

struct LegendrePoint {
  double value = 0.0;
  bool infinite = false;
  RVec maximizer;
  int iterations = 0;
};

struct LegendreOptions {
  int max_iter = 200;
  double clamp = 50.0;
  double grad_step = 1e-5;
  double hess_step = 1e-4;
};

// sup_alpha (alpha.s - e(-alpha)) by damped Newton ascent: Levenberg-regularized
// Newton direction, step halving on non-increase, alpha kept in the box
// |alpha|_inf <= clamp. A supremum pushed onto the box is reported as +inf.
inline LegendrePoint legendre_sup(const detail::ScalarField& e, const RVec& s, const RVec& warm,
                                  const LegendreOptions& opt = {}) {
  const int n = static_cast<int>(s.size());
  auto objective = [&](const RVec& a) { return a.dot(s) - e(RVec(-a)); };
  const detail::ScalarField obj = objective;
  LegendrePoint out;
  RVec a = warm.size() == n ? warm : RVec::Zero(n);
  a = a.cwiseMax(-opt.clamp).cwiseMin(opt.clamp);
  double f = objective(a);
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const RVec g = detail::fd_gradient(obj, a, opt.grad_step);
    if (g.lpNorm<Eigen::Infinity>() < 1e-11) break;
    const RMat hneg = -detail::fd_hessian(obj, a, opt.hess_step, false);
    const double mu = 1e-9 * std::max(1.0, hneg.trace());
    RVec dir = (hneg + mu * RMat::Identity(n, n)).ldlt().solve(g);
    if (!dir.allFinite() || dir.dot(g) <= 0.0) dir = g;
    double t = 1.0, gain = 0.0;
    for (int k = 0; k < 60 && gain <= 0.0; ++k, t *= 0.5) {
      const RVec cand = (a + t * dir).cwiseMax(-opt.clamp).cwiseMin(opt.clamp);
      const double fc = objective(cand);
      if (fc > f) {
        gain = fc - f;
        a = cand;
        f = fc;
      }
    }
    if (gain < 1e-15 * std::max(1.0, std::abs(f))) break;
  }
  out.iterations = it;
  out.maximizer = a;
  out.value = f;
  if (a.lpNorm<Eigen::Infinity>() >= opt.clamp * (1.0 - 1e-9)) {
    out.infinite = true;
    out.value = std::numeric_limits<double>::infinity();
  }
  return out;
}

struct RateFunction {
  std::vector<RVec> grid;
  std::vector<double> values;  // +inf where flagged
  std::vector<RVec> maximizers;
  RVec minimizer;  // the mean s_bar
};

// I(s) = sup_alpha (alpha.s - e(-alpha)).
inline RateFunction rate_function(const MrisModel& m, const std::vector<RVec>& s_grid,
                                  const LegendreOptions& opt = {}) {
  const CumulantFunction e(m);
  const detail::ScalarField f = [&](const RVec& a) { return e(a); };
  RateFunction out;
  out.minimizer = mean_entropy_rate(m);
  RVec warm = RVec::Zero(m.omega_count());
  for (const auto& s : s_grid) {
    const auto p = legendre_sup(f, s, warm, opt);
    out.grid.push_back(s);
    out.values.push_back(p.value);
    out.maximizers.push_back(p.maximizer);
    if (!p.infinite) warm = p.maximizer;
  }
  return out;
}

// I_bar(s) from the scalar cumulant e_bar(a) = e(a 1).
inline RateFunction entropy_rate_function(const MrisModel& m, const std::vector<double>& s_grid,
                                          const LegendreOptions& opt = {}) {
  const CumulantFunction e(m);
  const RVec one = RVec::Ones(m.omega_count());
  const detail::ScalarField f = [&](const RVec& a) { return e(RVec(a(0) * one)); };
  RateFunction out;
  out.minimizer = RVec::Constant(1, mean_entropy_rate(m).sum());
  RVec warm = RVec::Zero(1);
  for (double s : s_grid) {
    const RVec sv = RVec::Constant(1, s);
    const auto p = legendre_sup(f, sv, warm, opt);
    out.grid.push_back(sv);
    out.values.push_back(p.value);
    out.maximizers.push_back(p.maximizer);
    if (!p.infinite) warm = p.maximizer;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear response

struct KineticMatrix {
  RMat L;        // route (a): zeta-derivatives of the steady fluxes
  RMat L_gclr;   // route (b): second derivatives of e at 0 over 2 beta_bar^2
  double beta_bar = 0.0;
  double zeta_step = 0.0;
  double discrepancy = 0.0;  // max |L - L_gclr|
};

inline double common_beta(const MrisModel& m) {
  const RVec b = m.betas();
  if ((b.array() - b(0)).abs().maxCoeff() > 1e-12) throw DomainError("linear response: reservoirs at different temperatures");
  return b(0);
}

inline void require_equilibrium(const MrisModel& m) {
  const ExtendedState r = find_ess(m.generator(), m.tol());
  const auto rep = check_equilibrium(m, r, ess_decompose(m.generator(), r, m.tol()));
  if (rep.max_residual > 1e-8) throw DomainError("linear response: equilibrium condition violated");
}

// Steady fluxes <R_+zeta, J_w zeta> for every w.
inline RVec steady_fluxes(const MrisModel& m) {
  const ExtendedState r = find_ess(m.generator(), m.tol());
  RVec j(m.omega_count());
  for (int w = 0; w < m.omega_count(); ++w) j(w) = expectation(r, flux_extended(m, w));
  return j;
}

inline KineticMatrix kinetic_coefficients(const MrisModel& m, double zeta_step = 1e-3, double h = 1e-3) {
  require_equilibrium(m);
  const int n = m.omega_count();
  KineticMatrix k;
  k.beta_bar = common_beta(m);
  k.zeta_step = zeta_step;
  k.L.resize(n, n);
  for (int v = 0; v < n; ++v) {
    auto central = [&](double s) {
      const RVec z = s * detail::unit(n, v);
      return RVec((steady_fluxes(temperature_deform(m, z)) - steady_fluxes(temperature_deform(m, RVec(-z)))) /
                  (2.0 * s));
    };
    k.L.col(v) = (4.0 * central(zeta_step / 2.0) - central(zeta_step)) / 3.0;
  }
  const CumulantFunction e(m);
  const detail::ScalarField f = [&](const RVec& a) { return e(a); };
  k.L_gclr = detail::fd_hessian(f, RVec::Zero(n), h) / (2.0 * k.beta_bar * k.beta_bar);
  k.discrepancy = (k.L - k.L_gclr).cwiseAbs().maxCoeff();
  return k;
}

struct GreenKuboResult {
  std::vector<double> epsilons;
  std::vector<RMat> partial_sums;  // one matrix per epsilon
  RMat extrapolated;               // epsilon -> 0
  RMat tail_bound;                 // |corr(lag_cap)| per pair, a proxy for truncation
  double beta_bar = 0.0;
  int lag_cap = 0;
};

// 1/(2 beta_bar^2) sum_{|n| <= lag_cap} e^{-|n| eps} corr_wv(n), with
// corr_wv(-n) = corr_vw(n), then polynomial extrapolation to eps = 0.
inline GreenKuboResult green_kubo(const MrisModel& m, const std::vector<double>& epsilons, int lag_cap) {
  require_equilibrium(m);
  const int n = m.omega_count();
  GreenKuboResult out;
  out.epsilons = epsilons;
  out.beta_bar = common_beta(m);
  out.lag_cap = lag_cap;
  std::vector<std::vector<Correlation>> corr(n, std::vector<Correlation>(n));
  for (int w = 0; w < n; ++w)
    for (int v = 0; v < n; ++v) corr[w][v] = flux_autocorrelation(m, w, v, lag_cap);
  const double pref = 1.0 / (2.0 * out.beta_bar * out.beta_bar);
  out.tail_bound.resize(n, n);
  for (int w = 0; w < n; ++w)
    for (int v = 0; v < n; ++v) out.tail_bound(w, v) = std::abs(corr[w][v].value[lag_cap]);
  for (double eps : epsilons) {
    RMat s(n, n);
    for (int w = 0; w < n; ++w)
      for (int v = 0; v < n; ++v) {
        CompensatedSum acc;
        acc.add(corr[w][v].value[0]);
        for (int lag = 1; lag <= lag_cap; ++lag)
          acc.add(std::exp(-lag * eps) * (corr[w][v].value[lag] + corr[v][w].value[lag]));
        s(w, v) = pref * acc.value();
      }
    out.partial_sums.push_back(s);
  }
  // Lagrange interpolation through (eps_k, S_k) evaluated at 0.
  out.extrapolated = RMat::Zero(n, n);
  const auto ne = epsilons.size();
  for (std::size_t a = 0; a < ne; ++a) {
    double w = 1.0;
    for (std::size_t b = 0; b < ne; ++b)
      if (b != a) w *= epsilons[b] / (epsilons[b] - epsilons[a]);
    out.extrapolated += w * out.partial_sums[a];
  }
  return out;
}

}  // namespace mris
