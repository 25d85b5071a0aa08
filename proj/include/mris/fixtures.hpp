#pragma once

#include <vector>

#include "mris/probes.hpp"

// Reference qubit models used by the tests, the acceptance suite and the
// shipped model files under models/.
namespace mris::fixtures {

inline Mat sigma_plus() {
  Mat m = Mat::Zero(2, 2);
  m(1, 0) = 1.0;
  return m;
}
inline Mat sigma_minus() { return sigma_plus().adjoint(); }
inline Mat pauli_x() { return sigma_plus() + sigma_minus(); }
inline Mat pauli_y() { return cplx(0.0, 1.0) * (sigma_plus() - sigma_minus()); }
inline Mat pauli_z() {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return m;
}
inline Mat diag01() {
  Mat m = Mat::Zero(2, 2);
  m(1, 1) = 1.0;
  return m;
}

// lambda (sigma_+ (x) sigma_- + sigma_- (x) sigma_+): excitation-conserving exchange.
inline Mat exchange_coupling(double lambda) {
  return lambda * (tensor(sigma_plus(), sigma_minus()) + tensor(sigma_minus(), sigma_plus()));
}

inline RMat canonical_P() {
  RMat p(2, 2);
  p << 0.7, 0.3, 0.4, 0.6;
  return p;
}

// Qubit system H_S = diag(0,1), qubit probes H_E = diag(0,1), tau = 1,
// maximally mixed initial states, W = 1 time-reversal data. pi defaults to
// the stationary law of P.
inline ModelConfig qubit_config(const std::vector<double>& betas, const std::vector<Mat>& couplings, const RMat& p,
                                RVec pi = RVec()) {
  const int n = static_cast<int>(betas.size());
  if (pi.size() == 0) {
    RMat a(n + 1, n);
    a.topRows(n) = p.transpose() - RMat::Identity(n, n);
    a.row(n).setOnes();
    RVec b = RVec::Zero(n + 1);
    b(n) = 1.0;
    pi = a.colPivHouseholderQr().solve(b);
  }
  std::vector<std::string> labels;
  for (int w = 0; w < n; ++w) labels.push_back("r" + std::to_string(w + 1));
  ModelConfig cfg;
  cfg.h_sys = Observable(diag01());
  cfg.chain = MarkovChain(labels, pi, p);
  for (int w = 0; w < n; ++w) cfg.probes.push_back({Observable(diag01()), betas[w], 1.0, Observable(couplings[w])});
  cfg.rho_init.assign(n, DensityMatrix::maximally_mixed(2));
  cfg.tri = TimeReversalData{identity(2), std::vector<Mat>(n, identity(2))};
  return cfg;
}

inline ModelConfig two_temperature_config() {
  return qubit_config({1.0, 2.0}, {exchange_coupling(0.5), exchange_coupling(0.5)}, canonical_P());
}

inline ModelConfig equilibrium_config() {
  return qubit_config({1.0, 1.0}, {exchange_coupling(0.5), exchange_coupling(0.5)}, canonical_P());
}

// Complex coupling with no antiunitary symmetry of the required form. Used as
// the negative control for the Gallavotti-Cohen symmetry.
inline Mat tri_broken_coupling() {
  return 0.5 * tensor(pauli_x(), pauli_x()) + 0.4 * tensor(pauli_y(), pauli_z()) +
         0.3 * tensor(pauli_z(), pauli_y()) + 0.3 * tensor(pauli_x(), pauli_y());
}

inline ModelConfig tri_broken_config() {
  return qubit_config({1.0, 2.0}, {tri_broken_coupling(), exchange_coupling(0.5)}, canonical_P());
}

inline MrisModel two_temperature() { return MrisModel(two_temperature_config()); }
inline MrisModel equilibrium() { return MrisModel(equilibrium_config()); }
inline MrisModel tri_broken() { return MrisModel(tri_broken_config()); }

}  // namespace mris::fixtures
