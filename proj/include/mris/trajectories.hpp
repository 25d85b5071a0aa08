#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mris/extended.hpp"
#include "mris/parallel.hpp"
#include "mris/probes.hpp"
#include "mris/rng.hpp"

namespace mris {

struct TrajectoryConfig {
  int n_steps = 1;
  int n_traj = 1;
  std::uint64_t base_seed = 0;
  bool record_states = false;  // keep the (omega, xi) words and increments
  unsigned threads = 0;
};

struct EntropyRecord {
  std::uint64_t seed = 0;
  int n_steps = 0;
  std::vector<int> omega_word;  // omega_1 .. omega_N (indices)
  std::vector<int> xi_word;     // outcome index into the unraveling of omega_k
  std::vector<double> increments;
  RVec s_n_j;
  double sigma = 0.0;
  Mat final_state;
  int renormalizations = 0;  // steps where outcomes below the floor were dropped
};

struct ErgodicEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int n_samples = 0;
};

struct VectorEstimate {
  RVec mean;
  RVec std_error;
  int n_samples = 0;
};

namespace detail {

inline void check_config(const TrajectoryConfig& cfg) {
  if (cfg.n_steps < 1 || cfg.n_traj < 1) throw DomainError("TrajectoryConfig: n_steps and n_traj must be >= 1");
}

inline ErgodicEstimate summarize(const std::vector<double>& xs) {
  const auto n = static_cast<int>(xs.size());
  CompensatedSum s;
  for (double x : xs) s.add(x);
  const double mean = s.value() / n;
  CompensatedSum v;
  for (double x : xs) v.add((x - mean) * (x - mean));
  const double var = n > 1 ? v.value() / (n - 1) : 0.0;
  return {mean, std::sqrt(var / n), n};
}

inline std::vector<std::vector<double>> transition_rows(const MarkovChain& c) {
  std::vector<std::vector<double>> rows(c.size());
  for (int i = 0; i < c.size(); ++i)
    for (int j = 0; j < c.size(); ++j) rows[i].push_back(c.P()(i, j));
  return rows;
}

inline void require_irreducible(const MrisModel& m) {
  if (!classify_generator(m.generator(), m.tol()).irreducible())
    throw DomainError("model generator is reducible; ergodic averages need an irreducible generator");
}

}  // namespace detail

// rho_k = L_{w_k} rho_{k-1} for k = 1..n along path w_0..w_n.
inline std::vector<Mat> simulate_states(const MrisModel& m, const std::vector<int>& path, const Mat& rho0) {
  std::vector<Mat> out{rho0};
  for (std::size_t k = 1; k < path.size(); ++k) {
    const int w = path[k];
    if (w < 0 || w >= m.omega_count()) throw DomainError("simulate_states: path label out of range");
    out.push_back(m.channel(w).apply(out.back()));
  }
  return out;
}

// Per trajectory (1/N) sum_{n<N} <rho_n, X(w_{n+1})>; mean and standard error
// across trajectories.
inline ErgodicEstimate ergodic_average(const MrisModel& m, const ExtendedObservable& x, const TrajectoryConfig& cfg) {
  detail::check_config(cfg);
  detail::require_irreducible(m);
  const int d = m.dim(), n_omega = m.omega_count();
  std::vector<Vec> xvec;
  for (const auto& b : x.blocks) xvec.push_back(vec(b));
  const auto rows = detail::transition_rows(m.chain());
  std::vector<double> avg(cfg.n_traj);
  parallel_for(cfg.n_traj, cfg.threads, [&](std::size_t t) {
    CounterRng rng(cfg.base_seed + t);
    int w = sample_index(m.chain().pi(), n_omega, rng.uniform());
    Vec v = vec(m.config().rho_init[w].matrix());
    Vec tmp(d * d);
    CompensatedSum s;
    for (int k = 0; k < cfg.n_steps; ++k) {
      const int next = sample_index(rows[w], n_omega, rng.uniform());
      s.add(xvec[next].dot(v).real());  // <rho_k, X(w_{k+1})> = tr(rho X) for Hermitian blocks
      tmp.noalias() = m.channel(next).superop() * v;
      v.swap(tmp);
      w = next;
    }
    avg[t] = s.value() / cfg.n_steps;
  });
  return detail::summarize(avg);
}

// Two-time-measurement entropy process; trajectory t uses seed base_seed + t.
inline std::vector<EntropyRecord> sample_entropy_process(const MrisModel& m, const TrajectoryConfig& cfg) {
  detail::check_config(cfg);
  const int d = m.dim(), n_omega = m.omega_count();
  const auto& unr = m.unravelings();
  const double floor = m.tol().prob_floor, sum_tol = m.tol().prob_sum;
  const auto rows = detail::transition_rows(m.chain());
  std::vector<EntropyRecord> records(cfg.n_traj);
  parallel_for(cfg.n_traj, cfg.threads, [&](std::size_t t) {
    EntropyRecord& rec = records[t];
    rec.seed = cfg.base_seed + t;
    rec.n_steps = cfg.n_steps;
    rec.s_n_j = RVec::Zero(n_omega);
    if (cfg.record_states) {
      rec.omega_word.reserve(cfg.n_steps);
      rec.xi_word.reserve(cfg.n_steps);
      rec.increments.reserve(cfg.n_steps);
    }
    CounterRng rng(rec.seed);
    std::vector<CompensatedSum> acc(n_omega);
    int w = sample_index(m.chain().pi(), n_omega, rng.uniform());
    Vec v = vec(m.config().rho_init[w].matrix());
    Vec tmp(d * d);
    std::vector<double> p;
    for (int k = 0; k < cfg.n_steps; ++k) {
      w = sample_index(rows[w], n_omega, rng.uniform());
      const auto& terms = unr[w].terms;
      const int nx = static_cast<int>(terms.size());
      p.assign(nx, 0.0);
      double total = 0.0, kept = 0.0;
      for (int j = 0; j < nx; ++j) {
        const double pj = (terms[j].trace_functional * v).value().real();
        total += pj;
        if (pj >= floor) {
          p[j] = pj;
          kept += pj;
        }
      }
      if (std::abs(total - 1.0) > sum_tol)
        throw NumericalError("sample_entropy_process: outcome probabilities sum to " + std::to_string(total));
      if (kept != total) ++rec.renormalizations;
      const int j = sample_index(p, nx, rng.uniform());
      tmp.noalias() = terms[j].superop * v;
      tmp /= p[j];
      v.swap(tmp);
      acc[w].add(terms[j].delta);
      if (cfg.record_states) {
        rec.omega_word.push_back(w);
        rec.xi_word.push_back(j);
        rec.increments.push_back(terms[j].delta);
      }
    }
    CompensatedSum sig;
    for (int a = 0; a < n_omega; ++a) {
      rec.s_n_j(a) = acc[a].value();
      sig.add(rec.s_n_j(a));
    }
    rec.sigma = sig.value();
    rec.final_state = hermitian_part(unvec(v, d));
  });
  return records;
}

// Component-wise mean and standard error of S_N J / N.
inline VectorEstimate empirical_rate(const std::vector<EntropyRecord>& records) {
  if (records.empty()) throw DomainError("empirical_rate: no records");
  const int n_omega = static_cast<int>(records.front().s_n_j.size());
  VectorEstimate out{RVec(n_omega), RVec(n_omega), static_cast<int>(records.size())};
  for (int a = 0; a < n_omega; ++a) {
    std::vector<double> xs;
    for (const auto& r : records) xs.push_back(r.s_n_j(a) / r.n_steps);
    const auto e = detail::summarize(xs);
    out.mean(a) = e.mean;
    out.std_error(a) = e.std_error;
  }
  return out;
}

// Sample covariance of S_N J / sqrt(N).
inline RMat empirical_covariance(const std::vector<EntropyRecord>& records) {
  if (records.size() < 2) throw DomainError("empirical_covariance: need at least two records");
  const int n_omega = static_cast<int>(records.front().s_n_j.size());
  const auto n = static_cast<double>(records.size());
  RMat xs(records.size(), n_omega);
  for (std::size_t t = 0; t < records.size(); ++t)
    xs.row(static_cast<Eigen::Index>(t)) = records[t].s_n_j.transpose() / std::sqrt(records[t].n_steps);
  const RVec mean = xs.colwise().mean();
  const RMat c = xs.rowwise() - mean.transpose();
  return (c.transpose() * c) / (n - 1.0);
}

// (1/N) log mean_t exp(-alpha . S_N J), via log-sum-exp.
inline double empirical_cumulant(const std::vector<EntropyRecord>& records, const RVec& alpha) {
  if (records.empty()) throw DomainError("empirical_cumulant: no records");
  std::vector<double> a;
  for (const auto& r : records) a.push_back(-alpha.dot(r.s_n_j));
  const double mx = *std::max_element(a.begin(), a.end());
  CompensatedSum s;
  for (double x : a) s.add(std::exp(x - mx));
  return (mx + std::log(s.value() / static_cast<double>(a.size()))) / records.front().n_steps;
}

// ---------------------------------------------------------------------------
// Exact enumeration of the full statistics

struct ExactEntry {
  std::vector<int> omega_word;
  std::vector<int> xi_word;
  double probability;
};

struct ExactDistribution {
  int n = 0;
  std::vector<ExactEntry> entries;

  double total() const {
    CompensatedSum s;
    for (const auto& e : entries) s.add(e.probability);
    return s.value();
  }
};

inline RVec entropy_vector(const MrisModel& m, const ExactEntry& e) {
  RVec s = RVec::Zero(m.omega_count());
  for (std::size_t k = 0; k < e.omega_word.size(); ++k)
    s(e.omega_word[k]) += m.unraveling(e.omega_word[k]).terms[e.xi_word[k]].delta;
  return s;
}

// Q_{R0}([x_1..x_n]) = P_{w1 w2} .. P_{w(n-1) wn} tr(L_{wn,xn} .. L_{w1,x1} R0(w1)).
inline ExactDistribution enumerate_full_statistics(const MrisModel& m, int n, const ExtendedState& r0) {
  if (n < 1) throw DomainError("enumerate_full_statistics: n must be >= 1");
  const int n_omega = m.omega_count(), d = m.dim();
  const auto& unr = m.unravelings();
  int max_xi = 0;
  for (const auto& u : unr) max_xi = std::max(max_xi, u.outcome_count());
  double size = n_omega;
  for (int k = 0; k < n; ++k) size *= static_cast<double>(n_omega) * max_xi;
  if (size > 1e7) throw SizeGuardError("enumerate_full_statistics: word count exceeds 1e7");

  ExactDistribution dist;
  dist.n = n;
  const Vec ones = vec(identity(d));
  std::vector<int> ws, xs;
  auto recurse = [&](auto&& self, const Vec& v, double weight, int depth) -> void {
    const int w = ws.back();
    for (int j = 0; j < unr[w].outcome_count(); ++j) {
      const Vec next = unr[w].terms[j].superop * v;
      xs.push_back(j);
      if (depth == n) {
        dist.entries.push_back({ws, xs, weight * ones.dot(next).real()});
      } else {
        for (int w2 = 0; w2 < n_omega; ++w2) {
          ws.push_back(w2);
          self(self, next, weight * m.chain().P()(w, w2), depth + 1);
          ws.pop_back();
        }
      }
      xs.pop_back();
    }
  };
  for (int w1 = 0; w1 < n_omega; ++w1) {
    ws.assign(1, w1);
    recurse(recurse, vec(r0.blocks[w1]), 1.0, 1);
  }
  return dist;
}

inline ExactDistribution enumerate_full_statistics(const MrisModel& m, int n) {
  return enumerate_full_statistics(m, n, m.initial_state());
}

// ---------------------------------------------------------------------------
// Flux correlations

struct Correlation {
  std::vector<double> value;
  std::vector<double> std_error;  // empty for the analytic variant
};

namespace detail {

// D_mu = -d/d alpha_mu L^[alpha] at 0 (power = 1) and its second derivative
// (power = 2): block (w, mu) is P_{mu w} sum_xi delta_xi^power L_{mu,xi}.
inline Mat tilt_derivative(const MrisModel& m, int mu, int power) {
  const int n = m.omega_count(), d2 = m.dim() * m.dim();
  Mat s = Mat::Zero(d2, d2);
  for (const auto& t : m.unraveling(mu).terms) s += std::pow(t.delta, power) * t.superop;
  Mat big = Mat::Zero(static_cast<Eigen::Index>(n) * d2, static_cast<Eigen::Index>(n) * d2);
  for (int w = 0; w < n; ++w) big.block(w * d2, mu * d2, d2, d2) = m.chain().P()(mu, w) * s;
  return big;
}

inline Vec stacked_identity(int d, int n) { return ExtendedObservable::identity_obs(d, n).stacked(); }

}  // namespace detail

// Stationary correlations corr(n) = E[J_w(x_{n+1}) J_nu(x_1)] - E[J_w] E[J_nu]
// under Q_{R_+}, for lags 0..max_lag.
inline Correlation flux_autocorrelation(const MrisModel& m, int omega, int nu, int max_lag) {
  const ExtendedState r_plus = find_ess(m.generator(), m.tol());
  const int n = m.omega_count(), d = m.dim();
  const Vec one = detail::stacked_identity(d, n);
  const Vec r = r_plus.stacked();
  const Mat d_omega = detail::tilt_derivative(m, omega, 1);
  const Mat d_nu = detail::tilt_derivative(m, nu, 1);
  const double m_omega = one.dot(d_omega * r).real();
  const double m_nu = one.dot(d_nu * r).real();
  Correlation out;
  out.value.push_back((omega == nu ? one.dot(detail::tilt_derivative(m, omega, 2) * r).real() : 0.0) -
                      m_omega * m_nu);
  Vec v = d_nu * r;
  for (int lag = 1; lag <= max_lag; ++lag) {
    out.value.push_back(one.dot(d_omega * v).real() - m_omega * m_nu);
    v = m.generator().matrix() * v;
  }
  return out;
}

// Empirical counterpart from recorded trajectories (record_states = true),
// started in the stationary state. Increments are centred on means pooled
// over all records: per-record means would bias every lag by about
// -sum_n corr(n) / length.
inline Correlation flux_autocorrelation(const std::vector<EntropyRecord>& records, int omega, int nu, int max_lag) {
  auto component = [](const EntropyRecord& rec, int label) {
    std::vector<double> a(rec.increments.size(), 0.0);
    for (std::size_t k = 0; k < a.size(); ++k)
      if (rec.omega_word[k] == label) a[k] = rec.increments[k];
    return a;
  };
  CompensatedSum sa, sb;
  std::size_t count = 0;
  for (const auto& rec : records) {
    if (static_cast<int>(rec.increments.size()) <= max_lag)
      throw DomainError("flux_autocorrelation: record shorter than the lag");
    for (double x : component(rec, omega)) sa.add(x);
    for (double x : component(rec, nu)) sb.add(x);
    count += rec.increments.size();
  }
  const double mean_a = sa.value() / static_cast<double>(count), mean_b = sb.value() / static_cast<double>(count);
  Correlation out;
  for (int lag = 0; lag <= max_lag; ++lag) {
    std::vector<double> per;
    for (const auto& rec : records) {
      const auto a = component(rec, omega), b = component(rec, nu);
      const int len = static_cast<int>(a.size());
      CompensatedSum sab;
      for (int k = 0; k + lag < len; ++k) sab.add((a[k + lag] - mean_a) * (b[k] - mean_b));
      per.push_back(sab.value() / (len - lag));
    }
    const auto e = detail::summarize(per);
    out.value.push_back(e.mean);
    out.std_error.push_back(e.std_error);
  }
  return out;
}

// The stationary MRIS: pi -> pi_+, rho_w -> rho_+w, so that R_0 = R_+.
inline MrisModel stationary_model(const MrisModel& m) {
  const ExtendedState r_plus = find_ess(m.generator(), m.tol());
  const auto dec = ess_decompose(m.generator(), r_plus, m.tol());
  ModelConfig cfg = m.config();
  RVec pi = dec.pi_plus.cwiseMax(0.0);
  pi /= pi.sum();
  cfg.chain = cfg.chain.with_pi(pi);
  cfg.rho_init.clear();
  for (const auto& rho : dec.rho_plus) cfg.rho_init.emplace_back(rho, cfg.tol);
  return MrisModel(std::move(cfg));
}

}  // namespace mris
