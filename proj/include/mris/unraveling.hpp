#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mris/qm_core.hpp"

namespace mris {

// One outcome xi = (s, s') of the two-time measurement of S_E.
struct UnravelingTerm {
  int s_index;   // cluster of the first measurement
  int sp_index;  // cluster of the second measurement
  double delta;  // s' - s
  std::vector<Mat> kraus;
  Mat superop;
  // Row functional t with tr(L_xi rho) = t . vec(rho).
  Eigen::RowVectorXcd trace_functional;
};

struct Unraveling {
  Observable entropy;                  // S_E = -log rho_E
  std::vector<double> levels;          // clustered spectrum of S_E, ascending
  std::vector<Mat> projections;        // Pi_s
  std::vector<UnravelingTerm> terms;   // lexicographic in (s, s')

  int outcome_count() const { return static_cast<int>(terms.size()); }

  // sum_xi e^{-alpha delta_xi} L_xi as a superoperator.
  Mat deformed_superop(double alpha) const {
    Mat s = Mat::Zero(terms.front().superop.rows(), terms.front().superop.cols());
    for (const auto& t : terms) s += std::exp(-alpha * t.delta) * t.superop;
    return s;
  }
};

// L_{(s,s')} rho = tr_E((1 (x) Pi_s') U (rho (x) rho_E Pi_s) U^dagger). Inside a
// cluster the exact weights p_a of rho_E are used, so that the terms sum to
// the reduced map exactly even when the cluster is only near-degenerate.
// Subnormal eigenvalues are eigensolver residue of exact zeros.
inline bool faithful(const Mat& rho) { return eigh(rho).values.minCoeff() >= std::numeric_limits<double>::min(); }

inline Unraveling build_unraveling(const UnitaryPropagator& u, const DensityMatrix& rho_env, int dS,
                                   double degeneracy_tol) {
  const int dE = rho_env.dim();
  if (u.dim() != dS * dE) throw DimensionError("build_unraveling: propagator dimension is not dS*dE");
  if (!faithful(rho_env.matrix())) throw DomainError("build_unraveling: probe state is not faithful");
  const auto e = eigh(rho_env.matrix());

  std::vector<int> order(dE);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> sigma(dE);
  for (int a = 0; a < dE; ++a) sigma[a] = -std::log(e.values(a));
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return sigma[x] < sigma[y]; });

  Unraveling out;
  {
    RVec sv(dE);
    for (int a = 0; a < dE; ++a) sv(a) = sigma[a];
    out.entropy = Observable(e.vectors * sv.cast<cplx>().asDiagonal() * e.vectors.adjoint());
  }

  std::vector<std::vector<int>> clusters;
  for (int k = 0; k < dE; ++k) {
    if (k == 0 || sigma[order[k]] - sigma[order[k - 1]] > degeneracy_tol) clusters.emplace_back();
    clusters.back().push_back(order[k]);
  }
  for (const auto& c : clusters) {
    double mean = 0.0;
    Mat proj = Mat::Zero(dE, dE);
    for (int a : c) {
      mean += sigma[a];
      proj += e.vectors.col(a) * e.vectors.col(a).adjoint();
    }
    out.levels.push_back(mean / static_cast<double>(c.size()));
    out.projections.push_back(proj);
  }

  const Mat w = tensor(identity(dS), e.vectors).adjoint() * u.matrix() * tensor(identity(dS), e.vectors);
  const Vec vec_identity = vec(identity(dS));
  const int nc = static_cast<int>(clusters.size());
  for (int c = 0; c < nc; ++c)
    for (int cp = 0; cp < nc; ++cp) {
      UnravelingTerm t;
      t.s_index = c;
      t.sp_index = cp;
      t.delta = out.levels[cp] - out.levels[c];
      for (int a : clusters[c]) {
        const double amp = std::sqrt(e.values(a));
        for (int b : clusters[cp]) {
          Mat k(dS, dS);
          for (int i = 0; i < dS; ++i)
            for (int j = 0; j < dS; ++j) k(i, j) = amp * w(i * dE + b, j * dE + a);
          t.kraus.push_back(std::move(k));
        }
      }
      t.superop = superop_from_kraus(t.kraus, dS);
      t.trace_functional = vec_identity.adjoint() * t.superop;
      out.terms.push_back(std::move(t));
    }
  return out;
}

}  // namespace mris
