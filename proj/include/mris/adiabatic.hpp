#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "mris/extended.hpp"
#include "mris/probes.hpp"

namespace mris {

enum class ScheduleForm { linear, smoothstep };

// P(s) = (1 - w(s)) P0 + w(s) P1 with w(s) = s or 3s^2 - 2s^3; epsilon = 1/N.
struct AdiabaticSchedule {
  RMat p0;
  RMat p1;
  ScheduleForm form = ScheduleForm::linear;
  int n_steps = 64;

  double epsilon() const { return 1.0 / n_steps; }
  double weight(double s) const { return form == ScheduleForm::linear ? s : s * s * (3.0 - 2.0 * s); }
  RMat P(double s) const {
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("schedule: s outside [0, 1]");
    const double w = weight(s);
    return (1.0 - w) * p0 + w * p1;
  }
  static AdiabaticSchedule constant(const RMat& p, int n_steps) {
    return {p, p, ScheduleForm::linear, n_steps};
  }
};

inline ExtendedGenerator schedule_generator(const MrisModel& m, const AdiabaticSchedule& sch, double s) {
  std::vector<QuantumChannel> channels;
  for (int w = 0; w < m.omega_count(); ++w) channels.push_back(m.channel(w));
  return ExtendedGenerator(m.chain().with_P(sch.P(s)), channels);
}

struct AdiabaticResult {
  std::vector<double> errors;  // ||L_eps^(n) R - R_+(n eps)||_1 for n = 1..N
  double plateau_error = 0.0;  // max over n >= N/4
  double epsilon = 0.0;
  ExtendedState final_state;
  ExtendedState final_ess;
};

// Throws DomainError unless L(s) is primitive on the 20 interior grid points
// s = k/21 and both endpoints.
inline void check_schedule_primitive(const MrisModel& m, const AdiabaticSchedule& sch) {
  for (int k = 0; k <= 21; ++k) {
    const double s = k / 21.0;
    if (!classify_generator(schedule_generator(m, sch, s), m.tol()).primitive())
      throw DomainError("adiabatic: generator not primitive at s = " + std::to_string(s));
  }
}

inline AdiabaticResult adiabatic_evolve(const MrisModel& m, const AdiabaticSchedule& sch, ExtendedState r) {
  check_schedule_primitive(m, sch);
  const int n_steps = sch.n_steps;
  AdiabaticResult out;
  out.epsilon = sch.epsilon();
  for (int n = 1; n <= n_steps; ++n) {
    const double s = static_cast<double>(n) / n_steps;
    const ExtendedGenerator g = schedule_generator(m, sch, s);
    const auto cls = classify_generator(g, m.tol());
    if (!cls.primitive()) throw DomainError("adiabatic: primitivity violated mid-sweep at s = " + std::to_string(s));
    r = g.apply(r);
    const ExtendedState& ess = *cls.ess;
    double err = 0.0;
    for (int w = 0; w < m.omega_count(); ++w) err += trace_norm(Mat(r.blocks[w] - ess.blocks[w]));
    out.errors.push_back(err);
    if (n >= n_steps / 4) out.plateau_error = std::max(out.plateau_error, err);
    if (n == n_steps) out.final_ess = ess;
  }
  out.final_state = r;
  return out;
}

// Least-squares slope of log(error) against n over the first `count` entries
// with error above `floor`.
inline std::optional<double> log_error_slope(const std::vector<double>& errors, int count, double floor = 1e-12) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int k = 0;
  for (int n = 0; n < count && n < static_cast<int>(errors.size()); ++n) {
    if (!(errors[n] > floor)) break;
    const double x = n + 1, y = std::log(errors[n]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++k;
  }
  if (k < 3) return std::nullopt;
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

}  // namespace mris
