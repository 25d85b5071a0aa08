#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include "mris/common.hpp"
#include "mris/rng.hpp"

namespace mris {

class MarkovChain {
 public:
  MarkovChain() = default;
  MarkovChain(std::vector<std::string> labels, RVec pi, RMat p, double tol = 1e-12)
      : labels_(std::move(labels)), pi_(std::move(pi)), p_(std::move(p)) {
    const auto n = static_cast<Eigen::Index>(labels_.size());
    if (n == 0) throw DimensionError("MarkovChain: empty state space");
    if (pi_.size() != n || p_.rows() != n || p_.cols() != n)
      throw DimensionError("MarkovChain: pi/P dimensions do not match the label count");
    if (pi_.minCoeff() < 0.0) throw DomainError("MarkovChain: pi has a negative entry");
    if (std::abs(pi_.sum() - 1.0) > tol) throw DomainError("MarkovChain: pi does not sum to 1");
    if (p_.minCoeff() < 0.0) throw DomainError("MarkovChain: P has a negative entry");
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::abs(p_.row(i).sum() - 1.0) > tol)
        throw DomainError("MarkovChain: row " + std::to_string(i) + " of P does not sum to 1");
  }
  // Unlabelled convenience constructor; states are named "0", "1", ...
  MarkovChain(const RVec& pi, const RMat& p) : MarkovChain(default_labels(pi.size()), pi, p) {}

  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }
  const RVec& pi() const { return pi_; }
  const RMat& P() const { return p_; }

  int index_of(const std::string& label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw DomainError("MarkovChain: unknown label '" + label + "'");
    return static_cast<int>(it - labels_.begin());
  }

  MarkovChain with_pi(RVec pi) const { return MarkovChain(labels_, std::move(pi), p_); }
  MarkovChain with_P(RMat p) const { return MarkovChain(labels_, pi_, std::move(p)); }

  static std::vector<std::string> default_labels(Eigen::Index n) {
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < n; ++i) out.push_back(std::to_string(i));
    return out;
  }

 private:
  std::vector<std::string> labels_;
  RVec pi_;
  RMat p_;
};

struct ChainClassification {
  bool irreducible = false;
  int period = 0;  // gcd of cycle lengths; 0 when the support graph is acyclic
  bool primitive = false;
  RVec stationary;
  bool stationary_unique = false;
  bool detailed_balance = false;
  double db_residual = 0.0;
};

namespace detail {

inline std::vector<std::vector<bool>> reachability(const RMat& p, double edge) {
  const auto n = static_cast<int>(p.rows());
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r[i][j] = p(i, j) > edge;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      if (r[i][k])
        for (int j = 0; j < n; ++j)
          if (r[k][j]) r[i][j] = true;
  return r;
}

// gcd over all strongly connected components of the cycle-length gcd,
// computed from BFS levels: every edge u->v inside a component contributes
// |level(u) + 1 - level(v)|.
inline int support_period(const RMat& p, double edge) {
  const auto n = static_cast<int>(p.rows());
  const auto reach = reachability(p, edge);
  std::vector<int> comp(n, -1);
  int g = 0;
  for (int root = 0; root < n; ++root) {
    if (comp[root] != -1) continue;
    std::vector<int> members;
    for (int j = 0; j < n; ++j)
      if (j == root || (reach[root][j] && reach[j][root])) {
        comp[j] = root;
        members.push_back(j);
      }
    if (!reach[root][root]) continue;
    std::vector<int> level(n, -1);
    std::queue<int> q;
    level[root] = 0;
    q.push(root);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : members)
        if (p(u, v) > edge && level[v] < 0) {
          level[v] = level[u] + 1;
          q.push(v);
        }
    }
    for (int u : members)
      for (int v : members)
        if (p(u, v) > edge) g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
  }
  return g;
}

}  // namespace detail

inline ChainClassification classify_chain(const MarkovChain& c, double edge = 1e-14) {
  const RMat& p = c.P();
  const int n = c.size();
  ChainClassification out;
  const auto reach = detail::reachability(p, edge);
  out.irreducible = true;
  for (int i = 0; i < n && out.irreducible; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && !reach[i][j]) {
        out.irreducible = false;
        break;
      }
  if (n == 1) out.irreducible = true;
  out.period = detail::support_period(p, edge);
  out.primitive = out.irreducible && out.period == 1;

  if (out.irreducible) {
    // pi (P - I) = 0 with sum(pi) = 1, solved in the least-squares sense.
    RMat a(n + 1, n);
    a.topRows(n) = p.transpose() - RMat::Identity(n, n);
    a.row(n).setOnes();
    RVec b = RVec::Zero(n + 1);
    b(n) = 1.0;
    out.stationary = a.colPivHouseholderQr().solve(b);
    out.stationary_unique = true;
  } else {
    Eigen::EigenSolver<RMat> es(p.transpose());
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < es.eigenvalues().size(); ++k)
      if (std::abs(es.eigenvalues()(k) - 1.0) < std::abs(es.eigenvalues()(best) - 1.0)) best = k;
    RVec v = es.eigenvectors().col(best).real();
    if (v.sum() < 0.0) v = -v;
    out.stationary = v / v.sum();
    out.stationary_unique = false;
  }
  for (int i = 0; i < n; ++i)
    if (out.stationary(i) < 0.0 && out.stationary(i) > -1e-14) out.stationary(i) = 0.0;

  double r = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      r = std::max(r, std::abs(out.stationary(i) * p(i, j) - out.stationary(j) * p(j, i)));
  out.db_residual = r;
  out.detailed_balance = r <= 1e-10;
  return out;
}

// Indices w_0 ... w_n; w_0 ~ pi, w_{k+1} ~ P(w_k, .), inverse CDF in label order.
inline std::vector<int> sample_path(const MarkovChain& c, int n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<int> path;
  path.reserve(n + 1);
  const RVec& pi = c.pi();
  path.push_back(sample_index(pi, c.size(), rng.uniform()));
  for (int k = 0; k < n; ++k) {
    const RVec row = c.P().row(path.back());
    path.push_back(sample_index(row, c.size(), rng.uniform()));
  }
  return path;
}

}  // namespace mris
