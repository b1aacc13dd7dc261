#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "coherent/dist_kernels.hpp"
#include "coherent/numeric_verify.hpp"

using namespace coherent;

namespace {

// Values from tools/oracles.py (mpmath, 40 digits).
struct IncGammaCase {
  double a, x, p;
};

const IncGammaCase kIncGamma[] = {
    {0.5, 0.1, 0.34527915398142297956},
    {2.5, 1.0, 0.15085496391539036377},
    {5.0, 5.0, 0.55950671493478758856},
    {10.0, 12.0, 0.75760783832948765132},
    {100.0, 90.0, 0.1582209891864301681},
    {1e-3, 1e-2, 0.99596940303351315577},
    {30.0, 1e-3, 3.7663410203018767782e-123},
    {3.7, 40.0, 0.99999999999997692549},
};

double simpson(auto&& f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST(IncompleteGamma, MatchesHighPrecisionReference) {
  for (const auto& c : kIncGamma) {
    const double p = reg_lower_incomplete_gamma(c.a, c.x);
    EXPECT_NEAR(p, c.p, 1e-13 * std::max(1e-300, c.p) + 1e-15) << "a=" << c.a << " x=" << c.x;
    EXPECT_NEAR(reg_upper_incomplete_gamma(c.a, c.x), 1.0 - c.p, 1e-13);
  }
}

TEST(IncompleteGamma, ClosedFormForIntegerShape) {
  // P(n, x) = 1 - exp(-x) sum_{k<n} x^k / k!
  for (int n = 1; n <= 12; ++n) {
    for (double x : {0.3, 1.0, 4.5, 9.0, 20.0}) {
      double term = 1.0, sum = 0.0;
      for (int k = 0; k < n; ++k) {
        sum += term;
        term *= x / (k + 1);
      }
      EXPECT_NEAR(reg_lower_incomplete_gamma(n, x), 1.0 - std::exp(-x) * sum, 2e-14);
    }
  }
}

TEST(IncompleteGamma, LargeArgumentSaturates) {
  EXPECT_EQ(reg_lower_incomplete_gamma(50.0, 200.0), 1.0);
  EXPECT_EQ(reg_lower_incomplete_gamma(2.0, 0.0), 0.0);
  EXPECT_THROW(reg_lower_incomplete_gamma(0.0, 1.0), DomainError);
  EXPECT_THROW(reg_lower_incomplete_gamma(1.0, -1.0), DomainError);
}

TEST(DistSpec, RejectsInvalidHyperparameters) {
  EXPECT_THROW(DistSpec(NormalVar{0.0, 0.0}), DomainError);
  EXPECT_THROW(DistSpec(NormalVar{NAN, 1.0}), DomainError);
  EXPECT_THROW(DistSpec(NormalPrec{0.0, -1.0}), DomainError);
  EXPECT_THROW(DistSpec(Gamma{-1.0, 1.0}), DomainError);
  EXPECT_THROW(DistSpec(InvGamma{1.0, INFINITY}), DomainError);
  EXPECT_THROW(DistSpec(Dirichlet{{1.0}}), DomainError);
  EXPECT_THROW(DistSpec(Dirichlet{{1.0, 0.0}}), DomainError);
}

TEST(DistSpec, FamilyTagAndAccess) {
  const DistSpec g = Gamma{2.0, 3.0};
  EXPECT_EQ(g.family(), Family::Gamma);
  EXPECT_TRUE(g.holds<Gamma>());
  EXPECT_EQ(g.as<Gamma>().b_rate, 3.0);
  EXPECT_THROW(g.as<InvGamma>(), UnsupportedError);
  EXPECT_FALSE(DistSpec(Dirichlet{{1.0, 2.0}}).is_scalar());
}

TEST(LogPdf, MatchesReference) {
  EXPECT_NEAR(log_pdf(NormalVar{1.0, 4.0}, 2.5), -1.8933357137646180512, 1e-14);
  EXPECT_NEAR(log_pdf(NormalPrec{-1.0, 0.25}, 0.5), -1.8933357137646180512, 1e-14);
  EXPECT_NEAR(log_pdf(Gamma{3.0, 2.0}, 0.7), -0.72705552675757413899, 1e-14);
  EXPECT_NEAR(log_pdf(InvGamma{3.0, 0.5}, 0.4), 0.051457288616510879569, 1e-14);
  const std::vector<double> x{0.2, 0.3, 0.5};
  EXPECT_NEAR(log_pdf(Dirichlet{{2.0, 3.0, 4.0}}, x), 2.0228711901914416301, 1e-13);
}

TEST(LogPdf, SupportEdges) {
  EXPECT_EQ(log_pdf(InvGamma{2.0, 1.0}, 0.0), -INFINITY);
  EXPECT_EQ(log_pdf(Gamma{2.0, 1.0}, 0.0), -INFINITY);
  EXPECT_EQ(log_pdf(Gamma{0.5, 1.0}, 0.0), INFINITY);
  EXPECT_NEAR(log_pdf(Gamma{1.0, 2.0}, 0.0), std::log(2.0), 1e-15);
  EXPECT_THROW(log_pdf(Gamma{2.0, 1.0}, -0.1), DomainError);
  EXPECT_THROW(log_pdf(InvGamma{2.0, 1.0}, -0.1), DomainError);
  const std::vector<double> off{0.5, 0.6};
  EXPECT_THROW(log_pdf(Dirichlet{{1.0, 1.0}}, off), DomainError);
  EXPECT_THROW(log_pdf(Dirichlet{{1.0, 1.0}}, 0.5), UnsupportedError);
}

TEST(Cdf, MatchesReference) {
  EXPECT_NEAR(cdf(InvGamma{3.0, 0.5}, 0.4), 0.12465201948308114129, 1e-14);
  EXPECT_NEAR(cdf(Gamma{3.0, 2.0}, 0.7), 0.16650226187737008648, 1e-14);
  EXPECT_NEAR(cdf(NormalVar{1.0, 4.0}, 2.5), 0.77337264762313180067, 1e-14);
  EXPECT_EQ(cdf(Gamma{3.0, 2.0}, -1.0), 0.0);
}

// Densities integrate to one; the log grid handles the inverse gamma tail.
TEST(LogPdf, NormalizesUnderQuadrature) {
  const DistSpec cases[] = {NormalVar{0.3, 2.0},  NormalPrec{-1.0, 5.0}, Gamma{2.5, 1.5},
                            Gamma{7.0, 0.2},      InvGamma{3.0, 0.5},    InvGamma{1.5, 4.0}};
  for (const auto& d : cases) {
    const Grid g = default_grid(d, 20001);
    double mass = 0.0;
    for (std::size_t i = 0; i + 1 < g.n; ++i) {
      const double f0 = std::exp(log_pdf(d, g.node(i))) * g.jacobian(i);
      const double f1 = std::exp(log_pdf(d, g.node(i + 1))) * g.jacobian(i + 1);
      mass += 0.5 * (f0 + f1) * g.step();
    }
    EXPECT_NEAR(mass, 1.0, 1e-7) << to_string(d.family());
  }
}

// The cdf is the integral of the density.
TEST(Cdf, DerivativeIsDensity) {
  const DistSpec cases[] = {NormalVar{0.3, 2.0}, Gamma{2.5, 1.5}, InvGamma{3.0, 0.5},
                            InvGamma{0.7, 2.0}};
  for (const auto& d : cases) {
    for (double x : {0.2, 0.8, 1.7}) {
      const double h = 1e-5 * x;
      const double fd = (cdf(d, x + h) - cdf(d, x - h)) / (2.0 * h);
      EXPECT_NEAR(fd, std::exp(log_pdf(d, x)), 1e-6 * (1.0 + std::exp(log_pdf(d, x))))
          << to_string(d.family()) << " x=" << x;
    }
    const double a = 0.5, b = 1.5;
    const double integral = simpson([&](double t) { return std::exp(log_pdf(d, t)); }, a, b, 2000);
    EXPECT_NEAR(cdf(d, b) - cdf(d, a), integral, 1e-10);
  }
}

TEST(Sample, DrawsFollowTheirCdf) {
  std::mt19937_64 rng(42);
  const DistSpec cases[] = {NormalVar{1.0, 4.0}, NormalPrec{-2.0, 9.0}, Gamma{0.6, 3.0},
                            Gamma{4.0, 0.5},     InvGamma{3.0, 0.5},    InvGamma{1.2, 7.0}};
  const std::size_t n = 20000;
  for (const auto& d : cases) {
    std::vector<double> xs(n);
    for (auto& x : xs) x = sample(d, rng);
    const double ks = ks_statistic(xs, [&](double x) { return cdf(d, x); });
    EXPECT_LT(ks, ks_critical_value(n, 1e-3)) << to_string(d.family());
  }
}

TEST(Sample, DirichletMeanAndSimplex) {
  std::mt19937_64 rng(7);
  const DistSpec d = Dirichlet{{2.0, 3.0, 5.0}};
  std::vector<double> acc(3, 0.0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const auto x = sample_simplex(d, rng);
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      s += x[j];
      acc[j] += x[j];
    }
    ASSERT_NEAR(s, 1.0, 1e-12);
  }
  const auto m = dirichlet_mean(d);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(acc[j] / n, m[j], 5e-3);
}

TEST(Mean, ClosedForms) {
  EXPECT_DOUBLE_EQ(mean(Gamma{3.0, 2.0}), 1.5);
  EXPECT_DOUBLE_EQ(mean(InvGamma{3.0, 0.5}), 1.0);
  EXPECT_EQ(mean(InvGamma{1.0, 0.5}), INFINITY);
}
