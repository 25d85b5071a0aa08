// mris: command-line front end for repeated-interaction models.
//
// Every subcommand reads a model file, writes CSV tables, a report.json and
// (where a curve is produced) a gnuplot script into --out, prints a verdict
// table, and exits 0 iff all required verdicts pass.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mris/mris.hpp"
#include "mris/model_file.hpp"
#include "mris/output.hpp"

namespace fs = std::filesystem;
using namespace mris;

namespace {

struct Common {
  std::string model;
  std::string out = "mris_out";
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::vector<std::string> tol;
};

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Loaded {
  ModelFile file;
  std::string digest;
};

Loaded load(const Common& c) {
  Loaded l{load_model_file(c.model), fnv1a_hex(read_bytes(c.model))};
  for (const auto& kv : c.tol) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--tol expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    if (!l.file.config.tol.set(key, std::stod(kv.substr(eq + 1)))) throw Error("--tol: unknown key '" + key + "'");
  }
  return l;
}

std::vector<std::string> label_header(const std::string& first, const MrisModel& m, const std::string& prefix) {
  std::vector<std::string> h{first};
  for (const auto& l : m.chain().labels()) h.push_back(prefix + l);
  return h;
}

// Writes the CSV into the output directory and records it in the report.
void emit(RunReport& rep, const fs::path& dir, const std::string& name, const CsvWriter& csv) {
  csv.save(dir / name);
  rep.add_output(dir / name);
}

void emit_plot(RunReport& rep, const fs::path& dir, const std::string& name, const std::string& script) {
  write_text(dir / name, script);
  rep.add_output(dir / name);
}

int finish(RunReport& rep, const fs::path& dir) {
  write_text(dir / "report.json", rep.to_json().dump(2) + "\n");
  std::cout << rep.table();
  return rep.all_pass() ? 0 : 1;
}

Verdict at_most(std::string name, double value, double threshold, bool required = true) {
  return {std::move(name), value <= threshold, value, threshold, required};
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  return v;
}

// ---------------------------------------------------------------------------

int cmd_validate(const Common& c) {
  const Loaded l = load(c);
  const MrisModel m(l.file.config);
  const fs::path dir = c.out;
  RunReport rep("validate", l.digest, c.seed);
  const int n = m.omega_count();
  const Tolerances& tol = m.tol();

  CsvWriter probes({"label", "choi_min_eig", "tp_residual", "consistency_residual", "kms_residual",
                    "unraveling_residual"});
  double worst_choi = 0.0, worst_tp = 0.0, worst_cons = 0.0, worst_kms = 0.0, worst_unr = 0.0;
  for (int w = 0; w < n; ++w) {
    const auto choi = choi_verify(m.channel(w));
    const double cons = m.channel(w).consistency_residual();
    double kms = 0.0, unr = 0.0;
    if (m.has_unravelings()) {
      // S_E = beta (H_E - F) and J_S = -beta J.
      const auto& u = m.unraveling(w);
      const Mat& he = m.config().probes[w].h_env.matrix();
      if (m.free_energy(w)) {
        const Mat expect = m.beta(w) * (he - *m.free_energy(w) * identity(m.env_dim(w)));
        kms = (u.entropy.matrix() - expect).cwiseAbs().maxCoeff();
      }
      kms = std::max(kms, (m.entropy_flux(w) + m.beta(w) * m.flux(w)).cwiseAbs().maxCoeff());
      Mat sum = Mat::Zero(m.channel(w).superop().rows(), m.channel(w).superop().cols());
      for (const auto& t : u.terms) sum += t.superop;
      unr = (sum - m.channel(w).superop()).cwiseAbs().maxCoeff();
    }
    worst_choi = std::min(worst_choi, choi.min_choi_eig);
    worst_tp = std::max(worst_tp, choi.tp_residual);
    worst_cons = std::max(worst_cons, cons);
    worst_kms = std::max(worst_kms, kms);
    worst_unr = std::max(worst_unr, unr);
    probes.row(std::vector<std::string>{m.chain().labels()[w], format_double(choi.min_choi_eig),
                                        format_double(choi.tp_residual), format_double(cons), format_double(kms),
                                        format_double(unr)});
  }
  emit(rep, dir, "probes.csv", probes);

  rep.add({"cptp.choi_min_eig", worst_choi >= -tol.psd, worst_choi, -tol.psd, true});
  rep.add(at_most("cptp.tp_residual", worst_tp, tol.tp));
  rep.add(at_most("channel.consistency", worst_cons, tol.consistency));
  rep.add({"unraveling.available", m.has_unravelings(), m.has_unravelings() ? 1.0 : 0.0, 1.0, true});
  if (m.has_unravelings()) {
    rep.add(at_most("kms.identity", worst_kms, 1e-10));
    rep.add(at_most("unraveling.sums_to_channel", worst_unr, 1e-12));
  }

  const auto chain_cls = classify_chain(m.chain(), tol.edge);
  rep.add({"chain.irreducible", chain_cls.irreducible, chain_cls.irreducible ? 1.0 : 0.0, 1.0, false});
  rep.add({"chain.detailed_balance", chain_cls.detailed_balance, chain_cls.db_residual, 1e-10, false});
  if (m.config().tri) {
    const auto tri = check_tri(m);
    rep.add({"tri.holds", tri.holds, tri.max_residual(), 1e-10, false});
  }
  const auto cls = classify_generator(m.generator(), tol);
  rep.set("generator_kind", to_string(cls.kind));
  if (cls.ess) {
    const auto dec = ess_decompose(m.generator(), *cls.ess, tol);
    const auto eq = check_equilibrium(m, *cls.ess, dec);
    rep.add({"equilibrium", eq.is_equilibrium, eq.max_residual, tol.equilibrium, false});
    if (m.has_unravelings()) rep.set("entropy_production_rate", eq.ep_value);
  }
  return finish(rep, dir);
}

int cmd_classify(const Common& c) {
  const Loaded l = load(c);
  const MrisModel m(l.file.config);
  const fs::path dir = c.out;
  RunReport rep("classify", l.digest, c.seed);
  const auto cls = classify_generator(m.generator(), m.tol());
  CsvWriter spec({"index", "re", "im", "modulus"});
  for (std::size_t i = 0; i < cls.spectrum.size(); ++i)
    spec.row(std::vector<double>{static_cast<double>(i), cls.spectrum[i].real(), cls.spectrum[i].imag(),
                                 std::abs(cls.spectrum[i])});
  emit(rep, dir, "spectrum.csv", spec);
  emit_plot(rep, dir, "spectrum.gp", plot_script("generator spectrum", {"spectrum.csv"}, 2, 3, "Re", "Im"));
  rep.set("kind", to_string(cls.kind));
  rep.set("period", cls.period);
  rep.set("gap", format_double(cls.gap));
  rep.set("one_multiplicity", cls.one_multiplicity);
  rep.add({"generator.irreducible", cls.irreducible(), static_cast<double>(cls.one_multiplicity), 1.0, true});
  std::cout << "kind=" << to_string(cls.kind) << " period=" << cls.period << " gap=" << format_double(cls.gap)
            << '\n';
  return finish(rep, dir);
}

int cmd_ess(const Common& c) {
  const Loaded l = load(c);
  const MrisModel m(l.file.config);
  const fs::path dir = c.out;
  RunReport rep("ess", l.digest, c.seed);
  const ExtendedState r = find_ess(m.generator(), m.tol());
  const auto dec = ess_decompose(m.generator(), r, m.tol());
  CsvWriter pi({"label", "pi_plus"});
  CsvWriter rho({"label", "row", "col", "re", "im"});
  for (int w = 0; w < m.omega_count(); ++w) {
    const std::string& lab = m.chain().labels()[w];
    pi.row(std::vector<std::string>{lab, format_double(dec.pi_plus(w))});
    for (int i = 0; i < m.dim(); ++i)
      for (int k = 0; k < m.dim(); ++k)
        rho.row(std::vector<std::string>{lab, std::to_string(i), std::to_string(k),
                                         format_double(dec.rho_plus[w](i, k).real()),
                                         format_double(dec.rho_plus[w](i, k).imag())});
  }
  emit(rep, dir, "pi_plus.csv", pi);
  emit(rep, dir, "rho_plus.csv", rho);
  rep.set("ess", extended_state_json(m.chain(), r));
  rep.add(at_most("ess.fixed_point_residual", fixed_point_residual(m.generator(), r), 1e-10));
  rep.add({"ess.faithful", ess_faithful(r, m.tol()), 0.0, 0.0, false});
  if (m.has_unravelings()) rep.set("entropy_production_rate", expectation(r, entropy_flux_observable(m)));
  return finish(rep, dir);
}

int cmd_simulate(const Common& c, int n_steps, int n_traj) {
  const Loaded l = load(c);
  const MrisModel m(l.file.config);
  const fs::path dir = c.out;
  RunReport rep("simulate", l.digest, c.seed);
  TrajectoryConfig cfg{n_steps, n_traj, c.seed, false, c.threads};
  const auto records = sample_entropy_process(m, cfg);

  auto header = label_header("seed", m, "S_");
  header.push_back("sigma");
  header.push_back("renormalizations");
  CsvWriter csv(header);
  for (const auto& r : records) {
    std::vector<std::string> row{std::to_string(r.seed)};
    for (Eigen::Index w = 0; w < r.s_n_j.size(); ++w) row.push_back(format_double(r.s_n_j(w)));
    row.push_back(format_double(r.sigma));
    row.push_back(std::to_string(r.renormalizations));
    csv.row(row);
  }
  emit(rep, dir, "records.csv", csv);

  // LLN: S_N J / N against -beta_w <R_+, J_w>.
  const ExtendedState rp = find_ess(m.generator(), m.tol());
  const auto rate = empirical_rate(records);
  const RMat cov = empirical_covariance(records);
  CsvWriter summary({"label", "empirical_rate", "std_error", "predicted_rate", "z"});
  double worst_z = 0.0;
  for (int w = 0; w < m.omega_count(); ++w) {
    const double pred = -m.beta(w) * expectation(rp, flux_extended(m, w));
    const double z = rate.std_error(w) > 0 ? std::abs(rate.mean(w) - pred) / rate.std_error(w) : 0.0;
    worst_z = std::max(worst_z, z);
    summary.row(std::vector<std::string>{m.chain().labels()[w], format_double(rate.mean(w)),
                                         format_double(rate.std_error(w)), format_double(pred), format_double(z)});
  }
  emit(rep, dir, "summary.csv", summary);
  CsvWriter covcsv(label_header("label", m, ""));
  for (int w = 0; w < m.omega_count(); ++w) {
    std::vector<std::string> row{m.chain().labels()[w]};
    for (int v = 0; v < m.omega_count(); ++v) row.push_back(format_double(cov(w, v)));
    covcsv.row(row);
  }
  emit(rep, dir, "covariance.csv", covcsv);
  rep.add(at_most("lln.max_z", worst_z, 4.0));
  return finish(rep, dir);
}

int cmd_cumulant(const Common& c, double a_min, double a_max, int points) {
  const Loaded l = load(c);
  const MrisModel m(l.file.config);
  const fs::path dir = c.out;
  RunReport rep("cumulant", l.digest, c.seed);
  const CumulantFunction e(m);
  const RVec one = RVec::Ones(m.omega_count());
  CsvWriter csv({"a", "e_bar", "e_bar_reflected"});
  std::vector<RVec> grid;
  for (double a : linspace(a_min, a_max, points)) {
    const RVec av = a * one;
    grid.push_back(av);
    csv.row(std::vector<double>{a, e(av), e(RVec(one - av))});
  }
  emit(rep, dir, "cumulant.csv", csv);
  emit_plot(rep, dir, "cumulant.gp",
            plot_script("scalar cumulant e(a 1)", {"cumulant.csv"}, 1, 2, "a", "e(a 1)"));
  // The symmetry is a theorem only under time-reversal invariance.
  const bool tri = m.config().tri && check_tri(m).holds;
  const auto sym = gc_symmetry_report(m, grid);
  rep.add({"gc_symmetry", sym.pass, sym.max_residual, 1e-8, tri});
  return finish(rep, dir);
}

int cmd_ratefn(const Common& c, double s_max, int points) {
  const Loaded l = load(c);
  const MrisModel m(l.file.config);
  const fs::path dir = c.out;
  RunReport rep("ratefn", l.digest, c.seed);
  const auto grid = linspace(-s_max, s_max, points);
  const auto rf = entropy_rate_function(m, grid);
  CsvWriter csv({"s", "I_bar", "maximizer"});
  for (std::size_t i = 0; i < grid.size(); ++i)
    csv.row(std::vector<double>{grid[i], rf.values[i], rf.maximizers[i](0)});
  emit(rep, dir, "rate_function.csv", csv);
  emit_plot(rep, dir, "rate_function.gp",
            plot_script("entropy rate function", {"rate_function.csv"}, 1, 2, "s", "I(s)"));
  rep.set("mean_entropy_rate", format_double(rf.minimizer(0)));
  // |I(-s) - I(s) - s| on finite symmetric pairs; the grid is symmetric by construction.
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::size_t j = grid.size() - 1 - i;
    if (std::isinf(rf.values[i]) || std::isinf(rf.values[j])) continue;
    worst = std::max(worst, std::abs(rf.values[j] - rf.values[i] - grid[i]));
  }
  const bool tri = m.config().tri && check_tri(m).holds;
  rep.add({"fluctuation_relation", worst <= 1e-6, worst, 1e-6, tri});
  return finish(rep, dir);
}

int cmd_linresp(const Common& c, int lag_cap) {
  const Loaded l = load(c);
  const MrisModel m(l.file.config);
  const fs::path dir = c.out;
  RunReport rep("linresp", l.digest, c.seed);
  const auto k = kinetic_coefficients(m);
  const auto clt = clt_covariance(m);
  const auto gk = green_kubo(m, {1.0 / 64, 1.0 / 128, 1.0 / 256}, lag_cap);
  const int n = m.omega_count();
  auto write = [&](const std::string& name, const RMat& a) {
    CsvWriter csv(label_header("label", m, ""));
    for (int w = 0; w < n; ++w) {
      std::vector<std::string> row{m.chain().labels()[w]};
      for (int v = 0; v < n; ++v) row.push_back(format_double(a(w, v)));
      csv.row(row);
    }
    emit(rep, dir, name, csv);
  };
  write("kinetic_L.csv", k.L);
  write("kinetic_L_gclr.csv", k.L_gclr);
  write("green_kubo.csv", gk.extrapolated);
  const RMat fdr = clt.C / (2.0 * k.beta_bar * k.beta_bar);
  const double scale = k.L.cwiseAbs().maxCoeff();
  rep.add(at_most("onsager", (k.L - k.L.transpose()).cwiseAbs().maxCoeff(), 1e-6));
  rep.add(at_most("fdr", (k.L - fdr).cwiseAbs().maxCoeff(), 1e-6));
  rep.add(at_most("route_discrepancy", k.discrepancy, 1e-5));
  rep.add(at_most("green_kubo.relative", (gk.extrapolated - k.L).cwiseAbs().maxCoeff() / scale, 0.01));
  return finish(rep, dir);
}

int cmd_adiabatic(const Common& c, const std::vector<int>& steps) {
  const Loaded l = load(c);
  if (!l.file.adiabatic) throw Error("adiabatic: the model file has no \"adiabatic\" block");
  const MrisModel m(l.file.config);
  const fs::path dir = c.out;
  RunReport rep("adiabatic", l.digest, c.seed);
  const auto form = l.file.adiabatic->form == "smoothstep" ? ScheduleForm::smoothstep : ScheduleForm::linear;
  std::vector<double> plateaus;
  std::vector<std::string> files;
  CsvWriter summary({"N", "epsilon", "plateau_error"});
  for (int steps_n : steps) {
    const AdiabaticSchedule sch{m.chain().P(), l.file.adiabatic->p_end, form, steps_n};
    const ExtendedState r0 = find_ess(schedule_generator(m, sch, 0.0), m.tol());
    const auto res = adiabatic_evolve(m, sch, r0);
    CsvWriter csv({"n", "s", "error"});
    for (std::size_t i = 0; i < res.errors.size(); ++i)
      csv.row(std::vector<double>{static_cast<double>(i + 1), static_cast<double>(i + 1) / steps_n, res.errors[i]});
    const std::string name = "errors_N" + std::to_string(steps_n) + ".csv";
    emit(rep, dir, name, csv);
    files.push_back(name);
    summary.row(std::vector<double>{static_cast<double>(steps_n), res.epsilon, res.plateau_error});
    plateaus.push_back(res.plateau_error);
  }
  emit(rep, dir, "plateaus.csv", summary);
  emit_plot(rep, dir, "errors.gp", plot_script("adiabatic error", files, 2, 3, "s", "trace-norm error"));
  for (std::size_t i = 1; i < plateaus.size(); ++i) {
    const double ratio = plateaus[i - 1] / plateaus[i];
    rep.add({"plateau_ratio_N" + std::to_string(steps[i - 1]) + "_N" + std::to_string(steps[i]),
             ratio >= 1.5 && ratio <= 2.5, ratio, 2.0, true});
  }
  return finish(rep, dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repeated-interaction quantum systems: validation, ESS, trajectories, fluctuations"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--model", common.model, "model file (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "output directory");
    sub->add_option("--seed", common.seed, "base random seed");
    sub->add_option("--threads", common.threads, "worker threads (0 = hardware concurrency)");
    sub->add_option("--tol", common.tol, "tolerance override key=value (repeatable)");
  };

  auto* validate = app.add_subcommand("validate", "structural checks: CPTP, KMS, unraveling, TRI, DB, equilibrium");
  auto* classify = app.add_subcommand("classify", "spectrum, kind, period and gap of the generator");
  auto* ess = app.add_subcommand("ess", "extended steady state pi_+, rho_+");
  auto* simulate = app.add_subcommand("simulate", "sample the entropy process");
  auto* cumulant = app.add_subcommand("cumulant", "scalar cumulant generating function");
  auto* ratefn = app.add_subcommand("ratefn", "entropy rate function");
  auto* linresp = app.add_subcommand("linresp", "kinetic coefficients and Green-Kubo");
  auto* adiabatic = app.add_subcommand("adiabatic", "slowly driven chain");
  for (auto* s : {validate, classify, ess, simulate, cumulant, ratefn, linresp, adiabatic}) add_common(s);

  int n_steps = 2000, n_traj = 200;
  simulate->add_option("--steps", n_steps, "steps per trajectory")->check(CLI::PositiveNumber);
  simulate->add_option("--traj", n_traj, "number of trajectories")->check(CLI::PositiveNumber);
  double a_min = -1.0, a_max = 2.0;
  int points = 31;
  cumulant->add_option("--alpha-min", a_min);
  cumulant->add_option("--alpha-max", a_max);
  cumulant->add_option("--points", points)->check(CLI::PositiveNumber);
  double s_max = 0.05;
  int s_points = 21;
  ratefn->add_option("--s-max", s_max, "grid is symmetric on [-s_max, s_max]")->check(CLI::PositiveNumber);
  ratefn->add_option("--points", s_points)->check(CLI::PositiveNumber);
  int lag_cap = 2000;
  linresp->add_option("--lag-cap", lag_cap, "largest correlation lag")->check(CLI::PositiveNumber);
  std::vector<int> steps{64, 128, 256};
  adiabatic->add_option("--steps", steps, "N values, epsilon = 1/N")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(common.out);
    if (*validate) return cmd_validate(common);
    if (*classify) return cmd_classify(common);
    if (*ess) return cmd_ess(common);
    if (*simulate) return cmd_simulate(common, n_steps, n_traj);
    if (*cumulant) return cmd_cumulant(common, a_min, a_max, points);
    if (*ratefn) return cmd_ratefn(common, s_max, s_points);
    if (*linresp) return cmd_linresp(common, lag_cap);
    if (*adiabatic) return cmd_adiabatic(common, steps);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
