#include <gtest/gtest.h>

#include "mris/mris.hpp"
#include "oracles.hpp"

using namespace mris;

namespace {

RMat two_cycle() {
  RMat p(2, 2);
  p << 0, 1, 1, 0;
  return p;
}

RVec uniform(int n) { return RVec::Constant(n, 1.0 / n); }

}  // namespace

TEST(Chain, RejectsInvalidInput) {
  RMat bad(2, 2);
  bad << 0.6, 0.3, 0.4, 0.6;
  EXPECT_THROW(MarkovChain(uniform(2), bad), DomainError);
  RVec pi(2);
  pi << 0.7, 0.7;
  EXPECT_THROW(MarkovChain(pi, fixtures::canonical_P()), DomainError);
  EXPECT_THROW(MarkovChain(uniform(3), fixtures::canonical_P()), DimensionError);
}

TEST(Chain, TwoCycle) {
  const auto c = classify_chain(MarkovChain(uniform(2), two_cycle()));
  EXPECT_TRUE(c.irreducible);
  EXPECT_EQ(c.period, 2);
  EXPECT_FALSE(c.primitive);
  EXPECT_TRUE(c.stationary_unique);
  EXPECT_LE((c.stationary - uniform(2)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_TRUE(c.detailed_balance);
}

TEST(Chain, CanonicalClosedForm) {
  const auto c = classify_chain(MarkovChain(uniform(2), fixtures::canonical_P()));
  EXPECT_TRUE(c.primitive);
  EXPECT_NEAR(c.stationary(0), 4.0 / 7.0, 1e-14);
  EXPECT_NEAR(c.stationary(1), 3.0 / 7.0, 1e-14);
  EXPECT_TRUE(c.detailed_balance);
}

TEST(Chain, RandomPositiveMatchesPowerIteration) {
  CounterRng rng(31);
  for (int k = 0; k < 5; ++k) {
    const RMat p = random_stochastic(3, rng, 0.05);
    const auto c = classify_chain(MarkovChain(uniform(3), p));
    EXPECT_TRUE(c.primitive);
    EXPECT_EQ(c.primitive, oracle::primitive_by_powers(p));
    EXPECT_LE((c.stationary - oracle::power_stationary(p)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Chain, ThreeCycleAndReducible) {
  RMat cyc(3, 3);
  cyc << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  const auto c = classify_chain(MarkovChain(uniform(3), cyc));
  EXPECT_EQ(c.period, 3);
  EXPECT_FALSE(c.primitive);
  EXPECT_FALSE(c.detailed_balance);  // a directed cycle carries a probability current

  const auto r = classify_chain(MarkovChain(uniform(3), RMat::Identity(3, 3)));
  EXPECT_FALSE(r.irreducible);
  EXPECT_FALSE(r.stationary_unique);
}

TEST(Chain, PrimitivityAgreesWithMatrixPowers) {
  CounterRng rng(32);
  for (int k = 0; k < 30; ++k) {
    RMat p = random_stochastic(4, rng);
    // Sparsify: drop small entries, then renormalize rows.
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j)
        if (p(i, j) < 0.3) p(i, j) = 0.0;
      if (p.row(i).sum() == 0.0) p(i, (i + 1) % 4) = 1.0;
      p.row(i) /= p.row(i).sum();
    }
    const auto c = classify_chain(MarkovChain(uniform(4), p));
    EXPECT_EQ(c.primitive, oracle::primitive_by_powers(p)) << p;
  }
}

TEST(SamplePath, IdentityChainIsConstant) {
  const auto path = sample_path(MarkovChain(uniform(3), RMat::Identity(3, 3)), 50, 7);
  ASSERT_EQ(path.size(), 51u);
  for (int w : path) EXPECT_EQ(w, path.front());
}

TEST(SamplePath, TwoCycleAlternates) {
  RVec delta(2);
  delta << 1, 0;
  const auto path = sample_path(MarkovChain(delta, two_cycle()), 20, 3);
  for (std::size_t k = 0; k < path.size(); ++k) EXPECT_EQ(path[k], static_cast<int>(k % 2));
}

TEST(SamplePath, OccupationMatchesStationary) {
  const int n = 100000;
  const auto path = sample_path(MarkovChain(uniform(2), fixtures::canonical_P()), n, 99);
  double occ = 0;
  for (std::size_t k = 1; k < path.size(); ++k) occ += path[k] == 0;
  occ /= n;
  const double p0 = 4.0 / 7.0;
  EXPECT_LE(std::abs(occ - p0), 3.0 * std::sqrt(p0 * (1 - p0) / n) * 5.0);
}

TEST(SamplePath, SeedDeterminism) {
  const MarkovChain c(uniform(2), fixtures::canonical_P());
  EXPECT_EQ(sample_path(c, 1000, 5), sample_path(c, 1000, 5));
  EXPECT_NE(sample_path(c, 1000, 5), sample_path(c, 1000, 6));
}

TEST(Rng, CounterStreamIsReproducible) {
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
  CounterRng u(1);
  double mean = 0;
  for (int i = 0; i < 20000; ++i) {
    const double x = u.uniform();
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, 1.0);
    mean += x;
  }
  EXPECT_NEAR(mean / 20000, 0.5, 0.01);
}
