#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace mris {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input violates a documented precondition (negative beta, non-Hermitian
// operator, invalid state, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Eigenvalue 1 of a generator is not algebraically simple.
class NotSimpleError : public Error {
 public:
  NotSimpleError(const std::string& what, int multiplicity)
      : Error(what), multiplicity_(multiplicity) {}
  int multiplicity() const { return multiplicity_; }

 private:
  int multiplicity_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class SizeGuardError : public Error {
 public:
  using Error::Error;
};

struct Tolerances {
  double herm = 1e-10;
  double trace = 1e-10;
  double psd = 1e-10;
  double tp = 1e-12;
  double unit = 1e-10;
  double degeneracy = 1e-9;
  double consistency = 1e-12;
  // Markov chain support threshold: P_vw counts as an edge iff P_vw > edge.
  double edge = 1e-14;
  double eig_one = 1e-8;
  double peripheral = 1e-8;
  double gap = 1e-8;
  double pi_floor = 1e-12;
  double ess_clip = 1e-10;
  double prob_floor = 1e-14;
  double prob_sum = 1e-8;
  double equilibrium = 1e-8;

  // Returns false for an unknown key.
  bool set(std::string_view key, double value) {
    struct Entry {
      std::string_view name;
      double Tolerances::*field;
    };
    static constexpr Entry entries[] = {
        {"tol_herm", &Tolerances::herm},
        {"tol_trace", &Tolerances::trace},
        {"tol_psd", &Tolerances::psd},
        {"tol_tp", &Tolerances::tp},
        {"tol_unit", &Tolerances::unit},
        {"degeneracy_tol", &Tolerances::degeneracy},
        {"tol_consistency", &Tolerances::consistency},
        {"edge_tol", &Tolerances::edge},
        {"eig_one_tol", &Tolerances::eig_one},
        {"peripheral_tol", &Tolerances::peripheral},
        {"gap_tol", &Tolerances::gap},
        {"pi_floor", &Tolerances::pi_floor},
        {"ess_clip", &Tolerances::ess_clip},
        {"prob_floor", &Tolerances::prob_floor},
        {"prob_sum_tol", &Tolerances::prob_sum},
        {"equilibrium_tol", &Tolerances::equilibrium},
    };
    for (const auto& e : entries) {
      if (e.name == key) {
        this->*(e.field) = value;
        return true;
      }
    }
    return false;
  }
};

}  // namespace mris
