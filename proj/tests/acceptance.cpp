// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Tolerances, sample sizes, seeds and runtime budgets are fixed here.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mris/mris.hpp"
#include "oracles.hpp"

using namespace mris;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }
double max_abs(const RMat& m) { return m.cwiseAbs().maxCoeff(); }

RVec vec2(double a, double b) { return (RVec(2) << a, b).finished(); }

QuantumChannel random_stinespring(CounterRng& rng) {
  return reduced_map(UnitaryPropagator(random_unitary(4, rng)), DensityMatrix(random_density(2, rng)), 2);
}

// Strictly positive Choi matrix: a sufficient condition for positivity improving.
bool choi_positive(const QuantumChannel& k) { return choi_verify(k).min_choi_eig > 1e-9; }

// Primitivity of a single channel from its superoperator spectrum.
bool channel_primitive(const Mat& superop) {
  const Eigen::VectorXcd ev = superop.eigenvalues();
  int ones = 0;
  double inner = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i) - 1.0) < 1e-8)
      ++ones;
    else
      inner = std::max(inner, std::abs(ev(i)));
  }
  return ones == 1 && inner < 1.0 - 1e-8;
}

ExtendedObservable random_observable(CounterRng& rng) {
  return ExtendedObservable{{2, {random_hermitian(2, rng), random_hermitian(2, rng)}}};
}

// ---------------------------------------------------------------------------

Outcome cptp_random_models() {
  CounterRng rng(1001);
  double worst_eig = 1.0, worst_tp = 0.0;
  for (int k = 0; k < 20; ++k) {
    const std::vector<double> betas{0.2 + 2.0 * rng.uniform(), 0.2 + 2.0 * rng.uniform()};
    const MrisModel m(fixtures::qubit_config(betas, {random_real_symmetric(4, rng), random_real_symmetric(4, rng)},
                                             random_stochastic(2, rng, 0.05)));
    for (int w = 0; w < 2; ++w) {
      const auto rep = choi_verify(m.channel(w));
      worst_eig = std::min(worst_eig, rep.min_choi_eig);
      worst_tp = std::max(worst_tp, rep.tp_residual);
    }
  }
  return {worst_eig >= -1e-10 && worst_tp <= 1e-12, "min Choi eig " + fmt(worst_eig) + ", tp residual " + fmt(worst_tp)};
}

Outcome feynman_kac() {
  const MrisModel m = fixtures::two_temperature();
  CounterRng rng(1002);
  std::vector<std::function<Mat(const Mat&)>> maps;
  std::vector<Mat> rho0;
  for (int w = 0; w < 2; ++w) {
    const Mat u = m.propagator_of(w).matrix(), re = m.rho_env(w).matrix();
    maps.push_back([u, re](const Mat& rho) { return oracle::channel_direct(u, re, rho); });
    rho0.push_back(m.config().rho_init[w].matrix());
  }
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    const auto x = random_observable(rng);
    for (int n = 0; n <= 4; ++n) {
      const cplx want = oracle::feynman_kac_path_sum(m.chain().pi(), m.chain().P(), maps, rho0, x.blocks, n);
      worst = std::max(worst, std::abs(pairing(evolve(m.generator(), m.initial_state(), n), x) - want));
    }
  }
  return {worst <= 1e-10, "max deviation " + fmt(worst)};
}

Outcome deformed_identity() {
  const MrisModel m = fixtures::two_temperature();
  const Vec one = detail::stacked_identity(2, 2);
  const std::vector<RVec> alphas{vec2(0, 0), vec2(0.3, 0.3), vec2(0.5, -0.2), vec2(-0.4, 0.8), vec2(1.2, 0.1)};
  std::vector<ExactDistribution> dists;
  for (int n = 1; n <= 4; ++n) dists.push_back(enumerate_full_statistics(m, n));
  double worst = 0.0;
  for (const auto& a : alphas) {
    const Mat l = deformed_generator(m, a).matrix();
    Vec r = m.initial_state().stacked();
    for (int n = 1; n <= 4; ++n) {
      r = l * r;
      CompensatedSum s;
      for (const auto& e : dists[n - 1].entries) s.add(std::exp(-a.dot(entropy_vector(m, e))) * e.probability);
      worst = std::max(worst, std::abs(s.value() - one.dot(r).real()));
    }
  }
  return {worst <= 1e-9, "max deviation " + fmt(worst)};
}

// Trajectories start in the steady state, where the Cesaro mean equals its
// limit at every N; from the fixture's maximally mixed start the O(1/N)
// transient is about three standard errors at these sample sizes.
Outcome ergodic() {
  const MrisModel m = stationary_model(fixtures::two_temperature());
  const auto r = find_ess(m.generator(), m.tol());
  double worst_z = 0.0;
  for (int nu = 0; nu < 2; ++nu) {
    const auto x = flux_extended(m, nu);
    const auto e = ergodic_average(m, x, {10000, 100, 4000 + static_cast<std::uint64_t>(nu) * 1000, false, 0});
    worst_z = std::max(worst_z, std::abs(e.mean - expectation(r, x)) / e.std_error);
  }
  return {worst_z <= 3.0, "max |z| " + fmt(worst_z)};
}

Outcome lln() {
  const MrisModel m = fixtures::two_temperature();
  const auto r = find_ess(m.generator(), m.tol());
  const auto rate = empirical_rate(sample_entropy_process(m, {2000, 500, 5000, false, 0}));
  double worst_z = 0.0;
  for (int nu = 0; nu < 2; ++nu) {
    const double want = -m.beta(nu) * expectation(r, flux_extended(m, nu));
    worst_z = std::max(worst_z, std::abs(rate.mean(nu) - want) / rate.std_error(nu));
  }
  return {worst_z <= 3.0, "max |z| " + fmt(worst_z)};
}

Outcome clt() {
  const MrisModel m = fixtures::two_temperature();
  const RMat c = clt_covariance(m).C;
  const RMat emp = empirical_covariance(sample_entropy_process(m, {5000, 2000, 6000, false, 0}));
  const double rel = (emp - c).norm() / c.norm();
  return {rel <= 0.10, "relative Frobenius distance " + fmt(rel)};
}

Outcome gallavotti_cohen() {
  std::vector<RVec> grid;
  for (double a : {-0.5, 0.0, 0.5, 1.0, 1.5})
    for (double b : {-0.3, 0.4, 1.2}) grid.push_back(vec2(a, b));
  const auto sym = gc_symmetry_report(fixtures::two_temperature(), grid);
  const auto control = gc_symmetry_report(fixtures::tri_broken(), grid);
  return {sym.points == 15 && sym.max_residual <= 1e-8 && control.max_residual > 1e-4,
          "residual " + fmt(sym.max_residual) + ", TRI-broken control " + fmt(control.max_residual)};
}

Outcome fluctuation_relation() {
  const MrisModel m = fixtures::two_temperature();
  // Finite values of I lie on s_1/beta_1 + s_2/beta_2 = 0.
  std::vector<RVec> grid;
  for (double t : {0.005, 0.01, 0.02, 0.03}) {
    grid.push_back(t * vec2(1, -2));
    grid.push_back(-t * vec2(1, -2));
  }
  const auto rf = rate_function(m, grid);
  double worst = 0.0;
  bool finite = true;
  for (std::size_t i = 0; i < grid.size(); i += 2) {
    finite = finite && !std::isinf(rf.values[i]) && !std::isinf(rf.values[i + 1]);
    worst = std::max(worst, std::abs(rf.values[i + 1] - rf.values[i] - grid[i].sum()));
  }
  const std::vector<double> sg{0.005, 0.02, 0.04, -0.005, -0.02, -0.04};
  const auto rb = entropy_rate_function(m, sg);
  double worst_bar = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    finite = finite && !std::isinf(rb.values[i]) && !std::isinf(rb.values[i + 3]);
    worst_bar = std::max(worst_bar, std::abs(rb.values[i + 3] - rb.values[i] - sg[i]));
  }
  return {finite && worst <= 1e-6 && worst_bar <= 1e-6,
          "I residual " + fmt(worst) + ", I_bar residual " + fmt(worst_bar)};
}

Outcome equilibrium_characterization() {
  const MrisModel eq = fixtures::equilibrium();
  const auto r = find_ess(eq.generator(), eq.tol());
  const auto rep = check_equilibrium(eq, r, ess_decompose(eq.generator(), r, eq.tol()));
  double flux = 0.0;
  for (int w = 0; w < 2; ++w) flux = std::max(flux, std::abs(expectation(r, flux_extended(eq, w))));
  const MrisModel tt = fixtures::two_temperature();
  const auto r2 = find_ess(tt.generator(), tt.tol());
  const double ep2 = expectation(r2, entropy_flux_observable(tt));
  return {std::abs(rep.ep_value) <= 1e-10 && flux <= 1e-10 && rep.max_residual <= 1e-10 && ep2 > 1e-4,
          "ep " + fmt(rep.ep_value) + ", max flux " + fmt(flux) + ", conjugation residual " + fmt(rep.max_residual) +
              ", two-temperature ep " + fmt(ep2)};
}

Outcome entropy_balance_sampled() {
  double worst = 0.0, min_ep = 1.0;
  int steps = 0;
  std::uint64_t seed = 10000;
  for (const MrisModel& m : {fixtures::two_temperature(), fixtures::tri_broken()}) {
    const auto path = sample_path(m.chain(), 500, seed++);
    CounterRng rng(seed++);
    const auto states = simulate_states(m, path, random_density(2, rng));
    for (std::size_t k = 0; k + 1 < states.size(); ++k) {
      const auto t = entropy_balance(m, path[k + 1], states[k]);
      worst = std::max({worst, std::abs(t.general_residual), std::abs(t.kms_residual)});
      min_ep = std::min(min_ep, t.ep);
      ++steps;
    }
  }
  return {steps == 1000 && worst <= 1e-10 && min_ep >= -1e-12,
          std::to_string(steps) + " steps, max residual " + fmt(worst) + ", min ep " + fmt(min_ep)};
}

Outcome linear_response() {
  const MrisModel m = fixtures::equilibrium();
  const auto k = kinetic_coefficients(m);
  const RMat c = clt_covariance(m).C;
  const double onsager = max_abs(RMat(k.L - k.L.transpose()));
  const double fdr = max_abs(RMat(k.L - c / (2 * k.beta_bar * k.beta_bar)));
  return {onsager <= 1e-6 && fdr <= 1e-6 && k.discrepancy <= 1e-5,
          "Onsager " + fmt(onsager) + ", FDR " + fmt(fdr) + ", route discrepancy " + fmt(k.discrepancy)};
}

Outcome green_kubo_check() {
  const MrisModel m = fixtures::equilibrium();
  const auto k = kinetic_coefficients(m);
  const auto gk = green_kubo(m, {1.0 / 64, 1.0 / 128, 1.0 / 256}, 2000);
  const double rel = max_abs(RMat(gk.extrapolated - k.L)) / max_abs(k.L);

  const MrisModel st = stationary_model(m);
  const auto recs = sample_entropy_process(st, {4000, 100, 12000, true, 0});
  double worst_z = 0.0;
  for (int w = 0; w < 2; ++w)
    for (int v = 0; v < 2; ++v) {
      const auto an = flux_autocorrelation(st, w, v, 5);
      const auto em = flux_autocorrelation(recs, w, v, 5);
      for (int lag = 0; lag <= 5; ++lag)
        worst_z = std::max(worst_z, std::abs(an.value[lag] - em.value[lag]) / em.std_error[lag]);
    }
  return {rel <= 0.01 && worst_z <= 3.0, "relative error " + fmt(rel) + ", lags 0-5 max |z| " + fmt(worst_z)};
}

Outcome translation() {
  const MrisModel mz = temperature_deform(fixtures::equilibrium(), vec2(0.1, -0.2));
  std::vector<RVec> alphas{vec2(0, 0), vec2(0.3, -0.2), vec2(0.7, 0.5), vec2(-0.4, 0.9)};
  const auto rep = translation_symmetry_report(mz, alphas, {-0.5, -0.1, 0.2, 0.6});
  return {rep.points == 16 && rep.max_residual <= 1e-8, "residual " + fmt(rep.max_residual)};
}

Outcome adiabatic() {
  const MrisModel m = fixtures::two_temperature();
  RMat p_end(2, 2);
  p_end << 0.2, 0.8, 0.6, 0.4;
  std::vector<double> plateau;
  for (int n : {64, 128, 256}) {
    const AdiabaticSchedule sch{m.chain().P(), p_end, ScheduleForm::linear, n};
    plateau.push_back(adiabatic_evolve(m, sch, find_ess(schedule_generator(m, sch, 0.0), m.tol())).plateau_error);
  }
  const double r1 = plateau[0] / plateau[1], r2 = plateau[1] / plateau[2];
  return {r1 >= 1.5 && r1 <= 2.5 && r2 >= 1.5 && r2 <= 2.5, "ratios " + fmt(r1) + ", " + fmt(r2)};
}

// Twelve generators; each must satisfy every implication that applies to it
// and match its constructed verdict.
Outcome classification_suite() {
  CounterRng rng(1015);
  struct Case {
    RMat p;
    std::vector<QuantumChannel> channels;
    GeneratorKind expected;
    int period = 0;
  };
  auto positive_p = [&] { return random_stochastic(2, rng, 0.1); };
  auto cyc2 = [] { return (RMat(2, 2) << 0, 1, 1, 0).finished(); };
  RMat cyc3 = RMat::Zero(3, 3);
  cyc3(0, 1) = cyc3(1, 2) = cyc3(2, 0) = 1.0;
  const auto id = QuantumChannel::identity_channel(2);
  const Mat rot = random_unitary(2, rng);
  Mat pure = Mat::Zero(2, 2);
  pure(0, 0) = 1.0;
  // Replacement channel rho -> tr(rho) |0><0|.
  const QuantumChannel reset(2, {pure, Mat((Mat(2, 2) << 0, 1, 0, 0).finished())});

  std::vector<Case> cases;
  for (int i = 0; i < 3; ++i)
    cases.push_back({positive_p(), {random_stinespring(rng), random_stinespring(rng)}, GeneratorKind::primitive});
  cases.push_back({positive_p(), {id, id}, GeneratorKind::reducible});
  cases.push_back({fixtures::canonical_P(), {id, id}, GeneratorKind::reducible});
  cases.push_back({cyc2(), {random_stinespring(rng), random_stinespring(rng)}, GeneratorKind::irreducible_periodic, 2});
  cases.push_back({cyc2(), {random_stinespring(rng), random_stinespring(rng)}, GeneratorKind::irreducible_periodic, 2});
  cases.push_back({cyc3,
                   {random_stinespring(rng), random_stinespring(rng), random_stinespring(rng)},
                   GeneratorKind::irreducible_periodic,
                   3});
  cases.push_back({RMat::Identity(2, 2), {random_stinespring(rng), random_stinespring(rng)}, GeneratorKind::reducible});
  cases.push_back({positive_p(), {id, random_stinespring(rng)}, GeneratorKind::primitive});
  cases.push_back({positive_p(), {QuantumChannel::unitary_channel(rot), QuantumChannel::unitary_channel(rot)},
                   GeneratorKind::reducible});
  cases.push_back({positive_p(), {reset, reset}, GeneratorKind::primitive});

  int agree = 0;
  std::string failed;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const int n = static_cast<int>(c.p.rows());
    RVec pi = oracle::power_stationary(c.p);
    pi /= pi.sum();
    const ExtendedGenerator g(MarkovChain(pi, c.p), c.channels);
    const auto cls = classify_generator(g);
    bool ok = cls.kind == c.expected && (c.period == 0 || cls.period == c.period);
    const bool p_improving = c.p.minCoeff() > 0.0;
    // Positivity improving P and channels force primitivity.
    bool all_improving = p_improving;
    for (const auto& k : c.channels) all_improving = all_improving && choi_positive(k);
    if (all_improving) ok = ok && cls.primitive();
    // Irreducible generator implies irreducible chain.
    if (cls.irreducible()) ok = ok && classify_chain(g.chain()).irreducible;
    // With P positivity improving, primitivity matches that of the averaged channel.
    if (p_improving) {
      Mat avg = Mat::Zero(4, 4);
      for (int w = 0; w < n; ++w) avg += pi(w) * c.channels[w].superop();
      ok = ok && channel_primitive(avg) == cls.primitive();
    }
    if (ok)
      ++agree;
    else
      failed += " #" + std::to_string(i + 1);
  }
  return {agree == 12, std::to_string(agree) + "/12 consistent" + (failed.empty() ? "" : ", failed:" + failed)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "CPTP validation, 20 random models", 5, cptp_random_models},
      {2, "Feynman-Kac enumeration, N <= 4", 10, feynman_kac},
      {3, "deformed generator vs full statistics", 30, deformed_identity},
      {4, "ergodic average of the fluxes", 60, ergodic},
      {5, "law of large numbers for entropy", 60, lln},
      {6, "central limit covariance", 300, clt},
      {7, "Gallavotti-Cohen symmetry", 10, gallavotti_cohen},
      {8, "fluctuation relation for I and I_bar", 60, fluctuation_relation},
      {9, "equilibrium characterization", 5, equilibrium_characterization},
      {10, "entropy balance on sampled steps", 10, entropy_balance_sampled},
      {11, "linear response", 60, linear_response},
      {12, "Green-Kubo and empirical correlations", 120, green_kubo_check},
      {13, "translation symmetry", 10, translation},
      {14, "adiabatic scaling", 120, adiabatic},
      {15, "classification consistency", 30, classification_suite},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= c.budget_s;
    const bool pass = o.pass && in_budget;
    failures += !pass;
    std::printf("%s criterion %d: %s: %s [%.1f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), secs, c.budget_s, in_budget ? "" : ", exceeded");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
