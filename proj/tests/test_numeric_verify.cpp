#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "coherent/numeric_verify.hpp"

using namespace coherent;

namespace {

MixturePriorGroup equal_group(const DistSpec& c, int k, bool ordered = false) {
  return MixturePriorGroup("x", std::vector<DistSpec>(static_cast<std::size_t>(k), c), ordered);
}

// Random components whose forward map exists. Gamma shapes >= 1 keep the
// product shape >= 1, so the density stays bounded at 0.
DistSpec random_component(Family f, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (f) {
    case Family::NormalVar: return NormalVar{4.0 * u(rng) - 2.0, 0.2 + 3.0 * u(rng)};
    case Family::NormalPrec: return NormalPrec{4.0 * u(rng) - 2.0, 0.2 + 3.0 * u(rng)};
    case Family::Gamma: return Gamma{1.0 + 4.0 * u(rng), 0.3 + 3.0 * u(rng)};
    default: return InvGamma{0.5 + 4.0 * u(rng), 0.3 + 3.0 * u(rng)};
  }
}

}  // namespace

TEST(Contrasts, RoundTrip) {
  const std::vector<double> lam{1.5, 2.0, -0.5};
  const auto c = to_contrasts(lam);
  EXPECT_EQ(c.tau, (std::vector<double>{0.5, -2.0}));
  EXPECT_EQ(from_contrasts(1.5, c), lam);
  EXPECT_EQ(max_abs_contrast(lam), 2.0);
}

TEST(Ks, SmallCases) {
  const std::vector<double> one{0.5};
  EXPECT_DOUBLE_EQ(ks_statistic(one, [](double x) { return x; }), 0.5);
  const std::vector<double> tied{0.3, 0.3, 0.3, 0.9};
  // Jump of 3/4 at 0.3 against F(0.3) = 0.3.
  EXPECT_DOUBLE_EQ(ks_statistic(tied, [](double x) { return x; }), 0.45);
  EXPECT_THROW(ks_statistic(std::vector<double>{}, [](double x) { return x; }), DomainError);
}

TEST(Ks, CriticalValue) {
  // oracle: sqrt(-0.5 ln(0.0005)) = 1.9494746035204052334
  EXPECT_NEAR(ks_critical_value(1, 1e-3), 1.9494746035204052334, 1e-15);
  EXPECT_NEAR(ks_critical_value(400, 1e-3), 1.9494746035204052334 / 20.0, 1e-15);
}

TEST(Grid, WidenedKeepsStepAndCentre) {
  const Grid g{1.0, 3.0, 101, GridSpacing::Linear};
  const Grid w = g.widened(10.0);
  EXPECT_NEAR(w.step(), g.step(), 1e-15);
  EXPECT_NEAR(0.5 * (w.lo + w.hi), 2.0, 1e-14);
  const Grid lg{0.1, 10.0, 101, GridSpacing::Log};
  EXPECT_NEAR(lg.widened(3.0).step(), lg.step(), 1e-15);
}

TEST(Grid, QuantilesBracketTheMass) {
  for (const DistSpec d : {DistSpec(NormalVar{2.0, 9.0}), DistSpec(Gamma{0.7, 3.0}),
                           DistSpec(InvGamma{1.3, 0.2})}) {
    for (double p : {1e-9, 0.25, 0.5, 1.0 - 1e-9}) {
      EXPECT_NEAR(cdf(d, quantile_by_bisection(d, p)), p, 1e-12);
    }
  }
}

TEST(GridCheck, ProductDensityMatchesQuadratureReference) {
  // Normalized product densities by mpmath quadrature (tools/oracles.py).
  const std::vector<DistSpec> ig{InvGamma{2.0, 1.0}, InvGamma{3.0, 0.5}, InvGamma{1.5, 4.0}};
  const DistSpec pig = coherent_product(ig);
  EXPECT_NEAR(std::exp(log_pdf(pig, 0.1)), 0.000038836835041340182955, 1e-17);
  EXPECT_NEAR(std::exp(log_pdf(pig, 0.3)), 2.9262113138936314311, 1e-13);
  const std::vector<DistSpec> g{Gamma{2.0, 1.0}, Gamma{3.0, 0.5}, Gamma{1.5, 4.0}};
  const DistSpec pg = coherent_product(g);
  EXPECT_NEAR(std::exp(log_pdf(pg, 0.2)), 0.21971965311047678992, 1e-14);
  EXPECT_NEAR(std::exp(log_pdf(pg, 0.5)), 1.0424927417022543192, 1e-14);
  EXPECT_NEAR(std::exp(log_pdf(pg, 1.5)), 0.1992405724942692788, 1e-14);
}

TEST(GridCheck, RandomInstancesPass) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> kd(2, 6);
  for (Family f : {Family::NormalVar, Family::NormalPrec, Family::Gamma, Family::InvGamma}) {
    for (int t = 0; t < 8; ++t) {
      std::vector<DistSpec> comps;
      const int k = kd(rng);
      for (int i = 0; i < k; ++i) comps.push_back(random_component(f, rng));
      const MixturePriorGroup group("x", comps);
      const auto r = verify_product_coherence(group, coherent_product(group));
      EXPECT_TRUE(r.pass) << to_string(f) << " K=" << k << " sup=" << r.sup_norm_error;
      EXPECT_GE(r.coverage, 0.999);
    }
  }
}

TEST(GridCheck, DetectsWrongClaim) {
  const MixturePriorGroup g("x", {InvGamma{2.0, 1.0}, InvGamma{3.0, 0.5}});
  // Omitting the K-1 shape correction is a classic error.
  const auto r = verify_product_coherence(g, InvGamma{5.0, 1.0 / 3.0});
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.sup_norm_error, 1e-2);
  const auto ok = verify_product_coherence(g, InvGamma{6.0, 1.0 / 3.0});
  EXPECT_TRUE(ok.pass);
  EXPECT_TRUE(decide(ok));
}

TEST(GridCheck, NarrowGridRaisesCoverageError) {
  const std::vector<DistSpec> comps{NormalVar{0.0, 1.0}, NormalVar{0.0, 1.0}};
  const Grid narrow{-0.2, 0.2, 2001, GridSpacing::Linear};
  EXPECT_THROW(verify_product_coherence(comps, NormalVar{0.0, 0.5}, narrow), CoverageError);
  EXPECT_THROW(verify_product_coherence(comps, NormalVar{0.0, 0.5}, Grid{-5, 5, 11}), DomainError);
}

TEST(McCheck, PassesForAllFamilies) {
  const DistSpec cases[] = {NormalVar{0.0, 1.0}, NormalPrec{1.0, 1.0}, Gamma{3.0, 2.0},
                            InvGamma{3.0, 0.5}};
  for (const auto& c : cases) {
    for (bool ordered : {false, true}) {
      std::mt19937_64 rng(31);
      const auto g = equal_group(c, 2, ordered);
      const auto r = mc_conditional_check(g, coherent_product(g), 0.02, 200000, rng);
      EXPECT_TRUE(r.pass) << to_string(c.family()) << " ordered=" << ordered
                          << " ks=" << r.ks_statistic << " crit=" << r.critical_value;
      EXPECT_GE(r.n_retained, kMinRetained);
    }
  }
}

TEST(McCheck, RejectsWrongClaim) {
  std::mt19937_64 rng(32);
  const auto g = equal_group(InvGamma{3.0, 0.5}, 2);
  // Shape off by one: the textbook mistake of multiplying without the K-1 term.
  const auto r = mc_conditional_check(g, InvGamma{6.0, 0.25}, 0.02, 400000, rng);
  EXPECT_FALSE(r.pass) << r.ks_statistic;
}

TEST(McCheck, TooFewRetainedRaises) {
  std::mt19937_64 rng(33);
  const auto g = equal_group(NormalVar{0.0, 100.0}, 3);
  EXPECT_THROW(mc_conditional_check(g, coherent_product(g), 1e-4, 100000, rng), RetentionError);
  EXPECT_THROW(mc_conditional_check(g, coherent_product(g), 0.1, 1000, rng), DomainError);
}

TEST(McCheck, DeterministicForSeed) {
  const auto g = equal_group(Gamma{3.0, 2.0}, 3);
  std::mt19937_64 a(5), b(5);
  const auto ra = mc_conditional_check(g, coherent_product(g), 0.05, 400000, a);
  const auto rb = mc_conditional_check(g, coherent_product(g), 0.05, 400000, b);
  EXPECT_EQ(ra, rb);
}

// With the ordering constraint the band is one-sided, so the bias of the
// retained sample is first order in epsilon and shrinks visibly.
TEST(McCheck, KsShrinksWithEpsilon) {
  const auto g = equal_group(Gamma{3.0, 2.0}, 2, true);
  const DistSpec claimed = coherent_product(g);
  auto mean_ks = [&](double eps) {
    double s = 0.0;
    for (int seed = 0; seed < 6; ++seed) {
      std::mt19937_64 rng(100 + seed);
      const auto n = static_cast<std::size_t>(40000.0 / eps);
      s += mc_conditional_check(g, claimed, eps, n, rng).ks_statistic;
    }
    return s / 6.0;
  };
  const double wide = mean_ks(0.1), mid = mean_ks(0.05), narrow = mean_ks(0.02);
  EXPECT_GT(wide, mid);
  EXPECT_GT(mid, narrow);
}

// Density of (lambda_1, tau) for K = 2 is f1(l) f2(l + t) (unit Jacobian).
TEST(Contrasts, JacobianOnHistogram) {
  const DistSpec f1 = NormalVar{0.0, 1.0}, f2 = NormalVar{0.5, 2.0};
  std::mt19937_64 rng(44);
  const int n = 400000;
  const double h = 0.5;
  const int nl = 8, nt = 12;  // lambda in [-2, 2), tau in [-3, 3)
  std::vector<int> counts(nl * nt, 0);
  for (int i = 0; i < n; ++i) {
    const double l = sample(f1, rng), l2 = sample(f2, rng);
    const auto c = to_contrasts(std::vector<double>{l, l2});
    const int a = static_cast<int>(std::floor((l + 2.0) / h));
    const int b = static_cast<int>(std::floor((c.tau[0] + 3.0) / h));
    if (a >= 0 && a < nl && b >= 0 && b < nt) ++counts[a * nt + b];
  }
  double worst = 0.0;
  for (int a = 0; a < nl; ++a) {
    for (int b = 0; b < nt; ++b) {
      double p = 0.0;
      const int m = 40;
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
          const double l = -2.0 + a * h + (i + 0.5) * h / m;
          const double t = -3.0 + b * h + (j + 0.5) * h / m;
          p += std::exp(log_pdf(f1, l) + log_pdf(f2, l + t));
        }
      }
      p *= (h / m) * (h / m);
      const double expected = p * n;
      if (expected < 20) continue;
      worst = std::max(worst, std::fabs(counts[a * nt + b] - expected) / std::sqrt(expected));
    }
  }
  EXPECT_LT(worst, 4.5);
}

TEST(Reports, DecideMatchesFlags) {
  CoherenceReport r;
  r.method = VerifyMethod::McBand;
  r.n_retained = 150;
  r.ks_statistic = 0.0;
  r.critical_value = 1.0;
  EXPECT_FALSE(decide(r));
  r.n_retained = 300;
  EXPECT_TRUE(decide(r));
}
