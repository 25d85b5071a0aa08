#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mris/chain.hpp"
#include "mris/extended.hpp"
#include "mris/qm_core.hpp"
#include "mris/unraveling.hpp"

namespace mris {

struct ProbeSpec {
  Observable h_env;
  double beta = 1.0;
  double tau = 1.0;
  Observable coupling;  // on H_S (x) H_E
};

// theta = conj followed by W, in the computational basis.
struct TimeReversalData {
  Mat w_sys;
  std::vector<Mat> w_env;
};

struct ModelConfig {
  Observable h_sys;
  MarkovChain chain;
  std::vector<ProbeSpec> probes;  // indexed like chain labels
  std::vector<DensityMatrix> rho_init;
  std::optional<TimeReversalData> tri;
  Tolerances tol;
};

class MrisModel {
 public:
  explicit MrisModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
    const int n = cfg_.chain.size();
    const int dS = cfg_.h_sys.dim();
    if (static_cast<int>(cfg_.probes.size()) != n) throw DimensionError("build_model: one probe per label required");
    if (static_cast<int>(cfg_.rho_init.size()) != n)
      throw DimensionError("build_model: one initial state per label required");
    for (const auto& r : cfg_.rho_init)
      if (r.dim() != dS) throw DimensionError("build_model: initial state has wrong dimension");
    if (cfg_.tri && static_cast<int>(cfg_.tri->w_env.size()) != n)
      throw DimensionError("build_model: time-reversal data needs one W_E per label");

    for (int w = 0; w < n; ++w) {
      const ProbeSpec& pr = cfg_.probes[w];
      const int dE = pr.h_env.dim();
      if (pr.coupling.dim() != dS * dE) throw DimensionError("build_model: coupling is not an operator on H_S (x) H_E");
      if (!(pr.beta >= 0.0)) throw DomainError("build_model: beta must be >= 0");
      if (!(pr.tau > 0.0)) throw DomainError("build_model: tau must be > 0");

      PerProbe d;
      d.thermal = thermal_state(pr.h_env, pr.beta);
      const Mat h_total = tensor(cfg_.h_sys.matrix(), identity(dE)) + tensor(identity(dS), pr.h_env.matrix()) +
                          pr.coupling.matrix();
      d.u = propagator(Observable(h_total, cfg_.tol), pr.tau, cfg_.tol);
      d.channel = reduced_map(d.u, d.thermal.rho, dS);
      const auto choi = choi_verify(d.channel);
      if (choi.min_choi_eig < -cfg_.tol.psd || choi.tp_residual > cfg_.tol.tp)
        throw NumericalError("build_model: reduced map failed the CPTP check");
      if (faithful(d.thermal.rho.matrix()))
        d.unraveling = build_unraveling(d.u, d.thermal.rho, dS, cfg_.tol.degeneracy);
      d.flux = compute_flux(d, pr, dS, dE);
      if (d.unraveling) d.entropy_flux = compute_entropy_flux(d, dS, dE);
      per_.push_back(std::move(d));
    }
    std::vector<QuantumChannel> channels;
    for (const auto& d : per_) channels.push_back(d.channel);
    generator_ = ExtendedGenerator(cfg_.chain, channels);
    if (has_unravelings())
      for (const auto& d : per_) unravelings_.push_back(*d.unraveling);
  }

  const ModelConfig& config() const { return cfg_; }
  const Tolerances& tol() const { return cfg_.tol; }
  const MarkovChain& chain() const { return cfg_.chain; }
  int dim() const { return cfg_.h_sys.dim(); }
  int omega_count() const { return cfg_.chain.size(); }
  int env_dim(int w) const { return cfg_.probes[w].h_env.dim(); }
  double beta(int w) const { return cfg_.probes[w].beta; }
  RVec betas() const {
    RVec b(omega_count());
    for (int w = 0; w < omega_count(); ++w) b(w) = beta(w);
    return b;
  }

  const DensityMatrix& rho_env(int w) const { return per_[w].thermal.rho; }
  std::optional<double> free_energy(int w) const { return per_[w].thermal.free_energy; }
  const UnitaryPropagator& propagator_of(int w) const { return per_[w].u; }
  const QuantumChannel& channel(int w) const { return per_[w].channel; }
  const ExtendedGenerator& generator() const { return generator_; }
  bool has_unravelings() const {
    return std::all_of(per_.begin(), per_.end(), [](const PerProbe& d) { return d.unraveling.has_value(); });
  }
  const Unraveling& unraveling(int w) const {
    if (!per_[w].unraveling) throw DomainError("unraveling: probe state is singular");
    return *per_[w].unraveling;
  }
  const std::vector<Unraveling>& unravelings() const {
    if (!has_unravelings()) throw DomainError("unraveling: a probe state is singular");
    return unravelings_;
  }
  const Mat& flux(int w) const { return per_[w].flux; }
  const Mat& entropy_flux(int w) const {
    if (!per_[w].entropy_flux) throw DomainError("entropy_flux_observable: probe state is singular");
    return *per_[w].entropy_flux;
  }
  ExtendedState initial_state() const { return initial_extended_state(cfg_.chain, cfg_.rho_init); }

 private:
  struct PerProbe {
    ThermalState thermal;
    UnitaryPropagator u;
    QuantumChannel channel;
    std::optional<Unraveling> unraveling;
    Mat flux;
    std::optional<Mat> entropy_flux;
  };

  // J = tr_E(U^dagger [U, H_E] (1 (x) rho_E)) = tr_E((H_E - U^dagger H_E U)(1 (x) rho_E)).
  static Mat compute_flux(const PerProbe& d, const ProbeSpec& pr, int dS, int dE) {
    const Mat he = tensor(identity(dS), pr.h_env.matrix());
    const Mat& u = d.u.matrix();
    const Mat m = u.adjoint() * (u * he - he * u);
    return hermitian_part(partial_trace_env(Mat(m * tensor(identity(dS), d.thermal.rho.matrix())), dS, dE));
  }
  // J_S = tr_E(U^dagger [S_E, U] (1 (x) rho_E)).
  static Mat compute_entropy_flux(const PerProbe& d, int dS, int dE) {
    const Mat se = tensor(identity(dS), d.unraveling->entropy.matrix());
    const Mat& u = d.u.matrix();
    const Mat m = u.adjoint() * (se * u - u * se);
    return hermitian_part(partial_trace_env(Mat(m * tensor(identity(dS), d.thermal.rho.matrix())), dS, dE));
  }

  ModelConfig cfg_;
  std::vector<PerProbe> per_;
  std::vector<Unraveling> unravelings_;
  ExtendedGenerator generator_;
};

inline MrisModel build_model(ModelConfig cfg) { return MrisModel(std::move(cfg)); }

inline Observable flux_observable(const MrisModel& m, int omega) { return Observable(m.flux(omega)); }

// J_nu(w) = delta_{nu w} J(nu).
inline ExtendedObservable flux_extended(const MrisModel& m, int nu) {
  ExtendedObservable x{{m.dim(), std::vector<Mat>(m.omega_count(), Mat::Zero(m.dim(), m.dim()))}};
  x.blocks[nu] = m.flux(nu);
  return x;
}

inline ExtendedObservable entropy_flux_observable(const MrisModel& m) {
  ExtendedObservable x{{m.dim(), {}}};
  for (int w = 0; w < m.omega_count(); ++w) x.blocks.push_back(m.entropy_flux(w));
  return x;
}

inline const Unraveling& unraveling(const MrisModel& m, int omega) { return m.unraveling(omega); }

inline DeformedGenerator deformed_generator(const MrisModel& m, const RVec& alpha) {
  return DeformedGenerator(m.chain(), m.unravelings(), alpha);
}

struct TriReport {
  bool holds = false;
  double involution_residual = 0.0;
  double env_commutation_residual = 0.0;
  double propagator_residual = 0.0;
  double max_residual() const {
    return std::max({involution_residual, env_commutation_residual, propagator_residual});
  }
};

// W conj(W) = 1, W_E conj(H_E) = H_E W_E, (W_S (x) W_E) conj(U) = U^dagger (W_S (x) W_E).
inline TriReport check_tri(const MrisModel& m, double tol = 1e-10) {
  if (!m.config().tri) throw DomainError("check_tri: model has no time-reversal data");
  const auto& t = *m.config().tri;
  TriReport r;
  const int dS = m.dim();
  r.involution_residual = (t.w_sys * t.w_sys.conjugate() - identity(dS)).cwiseAbs().maxCoeff();
  for (int w = 0; w < m.omega_count(); ++w) {
    const Mat& we = t.w_env[w];
    const Mat& he = m.config().probes[w].h_env.matrix();
    const int dE = static_cast<int>(he.rows());
    r.involution_residual = std::max(r.involution_residual, (we * we.conjugate() - identity(dE)).cwiseAbs().maxCoeff());
    r.env_commutation_residual =
        std::max(r.env_commutation_residual, (we * he.conjugate() - he * we).cwiseAbs().maxCoeff());
    const Mat big = tensor(t.w_sys, we);
    const Mat& u = m.propagator_of(w).matrix();
    r.propagator_residual =
        std::max(r.propagator_residual, (big * u.conjugate() - u.adjoint() * big).cwiseAbs().maxCoeff());
  }
  r.holds = r.max_residual() <= tol;
  return r;
}

struct EquilibriumReport {
  bool is_equilibrium = false;
  double max_residual = 0.0;
  double ep_value = 0.0;  // <R_+, J_S>
};

// U_w (rho_+v (x) rho_Ew) U_w^dagger = rho_+w (x) rho_Ew whenever P_vw > edge.
inline EquilibriumReport check_equilibrium(const MrisModel& m, const ExtendedState& r_plus,
                                           const EssDecomposition& dec) {
  EquilibriumReport rep;
  const int n = m.omega_count();
  for (int w = 0; w < n; ++w) {
    const Mat& u = m.propagator_of(w).matrix();
    const Mat& re = m.rho_env(w).matrix();
    const Mat target = tensor(dec.rho_plus[w], re);
    for (int v = 0; v < n; ++v) {
      if (!(m.chain().P()(v, w) > m.tol().edge)) continue;
      const Mat img = u * tensor(dec.rho_plus[v], re) * u.adjoint();
      rep.max_residual = std::max(rep.max_residual, (img - target).cwiseAbs().maxCoeff());
    }
  }
  rep.ep_value = expectation(r_plus, entropy_flux_observable(m));
  rep.is_equilibrium = rep.max_residual <= m.tol().equilibrium;
  return rep;
}

// Probe inverse temperatures beta_w - zeta_w; propagators are unchanged.
inline MrisModel temperature_deform(const MrisModel& m, const RVec& zeta) {
  if (zeta.size() != m.omega_count()) throw DimensionError("temperature_deform: zeta size mismatch");
  ModelConfig cfg = m.config();
  for (int w = 0; w < m.omega_count(); ++w) {
    const double b = cfg.probes[w].beta - zeta(w);
    if (!(b > 0.0)) throw DomainError("temperature_deform: deformed inverse temperature is not positive");
    cfg.probes[w].beta = b;
  }
  return MrisModel(std::move(cfg));
}

struct BalanceTerms {
  double delta_s = 0.0;        // S(rho) - S(L rho)
  double ep = 0.0;             // Ent(U(rho (x) rho_E)U^dagger | L rho (x) rho_E)
  double heat = 0.0;           // Delta Q = -<rho, J>
  double entropy_flux = 0.0;   // <rho, J_S>
  bool ep_infinite = false;
  // Delta S + ep - beta Delta Q (KMS form) and Delta S + ep - <rho, J_S>.
  double kms_residual = 0.0;
  double general_residual = 0.0;
};

inline BalanceTerms entropy_balance(const MrisModel& m, int w, const Mat& rho) {
  const Mat& re = m.rho_env(w).matrix();
  const Mat& u = m.propagator_of(w).matrix();
  const Mat mu = u * tensor(rho, re) * u.adjoint();
  const Mat lr = m.channel(w).apply(rho);
  BalanceTerms t;
  t.delta_s = von_neumann_entropy(rho) - von_neumann_entropy(lr);
  const auto rel = relative_entropy(mu, tensor(lr, re));
  t.ep = rel.value;
  t.ep_infinite = rel.infinite;
  t.heat = -(rho * m.flux(w)).trace().real();
  t.entropy_flux = (rho * m.entropy_flux(w)).trace().real();
  t.kms_residual = t.delta_s + t.ep - m.beta(w) * t.heat;
  t.general_residual = t.delta_s + t.ep - t.entropy_flux;
  return t;
}

}  // namespace mris
