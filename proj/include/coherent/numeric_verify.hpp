#pragma once

// Numerical certificates for the closed-form coherence maps:
//   * grid check: the normalized pointwise product of the component
//     densities is compared with the claimed nested density;
//   * Monte Carlo band check: draws whose contrasts lambda_i - lambda_1 all
//     fall within (-eps, eps) approximate conditioning on equal components,
//     and their first coordinate is KS-tested against the claimed prior.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coherent/coherence_maps.hpp"
#include "coherent/constraints.hpp"
#include "coherent/dist_kernels.hpp"
#include "coherent/errors.hpp"

namespace coherent {

// ---------------------------------------------------------------------------
// Contrasts

/// tau_i = lambda_{i+1} - lambda_1, i = 1..K-1.
struct ContrastVector {
  std::vector<double> tau;
  bool operator==(const ContrastVector&) const = default;
};

inline ContrastVector to_contrasts(std::span<const double> lambda) {
  ContrastVector c;
  if (lambda.empty()) return c;
  c.tau.reserve(lambda.size() - 1);
  for (std::size_t i = 1; i < lambda.size(); ++i) c.tau.push_back(lambda[i] - lambda[0]);
  return c;
}

inline std::vector<double> from_contrasts(double lambda1, const ContrastVector& c) {
  std::vector<double> out{lambda1};
  for (double t : c.tau) out.push_back(t + lambda1);
  return out;
}

inline double max_abs_contrast(std::span<const double> lambda) {
  double m = 0.0;
  for (std::size_t i = 1; i < lambda.size(); ++i) m = std::max(m, std::fabs(lambda[i] - lambda[0]));
  return m;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

/// sup_x |F_n(x) - F(x)| for the empirical CDF of `samples`.
template <class Cdf>
double ks_statistic(std::span<const double> samples, Cdf&& cdf) {
  if (samples.empty()) throw DomainError("ks_statistic: no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    // Ties: the empirical CDF jumps once over the whole run.
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double f = cdf(sorted[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(j + 1) / n - f});
    i = j + 1;
  }
  return d;
}

/// Asymptotic Kolmogorov critical value sqrt(-ln(alpha/2)/2) / sqrt(n).
inline double ks_critical_value(std::size_t n, double alpha) {
  if (n == 0) throw DomainError("ks_critical_value: n must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("ks_critical_value: alpha in (0,1)");
  return std::sqrt(-0.5 * std::log(0.5 * alpha)) / std::sqrt(static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Reports

enum class VerifyMethod { Grid, McBand };

inline std::string_view to_string(VerifyMethod m) {
  return m == VerifyMethod::Grid ? "grid" : "mc_band";
}

struct VerifyTolerances {
  double sup_norm = 1e-6;
  double ks_alpha = 1e-3;
  double min_coverage = 0.999;
  bool operator==(const VerifyTolerances&) const = default;
};

struct CoherenceReport {
  VerifyMethod method = VerifyMethod::Grid;
  double sup_norm_error = 0.0;   // grid only
  double coverage = 1.0;         // grid only
  double ks_statistic = 0.0;     // mc only
  double critical_value = 0.0;   // mc only
  std::size_t n_retained = 0;    // mc only
  std::size_t n_draws = 0;       // mc only
  double epsilon = 0.0;          // mc only
  VerifyTolerances tolerances;
  bool pass = false;

  bool operator==(const CoherenceReport&) const = default;
};

/// The pass flag as a function of the recorded statistics alone.
inline bool decide(const CoherenceReport& r) {
  if (r.method == VerifyMethod::Grid) {
    return r.sup_norm_error <= r.tolerances.sup_norm && r.coverage >= r.tolerances.min_coverage;
  }
  return r.n_retained >= 200 && r.ks_statistic < r.critical_value;
}

// ---------------------------------------------------------------------------
// Grid check

enum class GridSpacing { Linear, Log };

/// Quadrature nodes. Log spacing places nodes uniformly in log(x) and is used
/// for the positive families, where it resolves both a spike near 0 and a
/// heavy right tail with a modest n.
struct Grid {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 4001;
  GridSpacing spacing = GridSpacing::Linear;

  double node(std::size_t i) const {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    if (spacing == GridSpacing::Linear) return lo + t * (hi - lo);
    return std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  }
  // dx/du at node i, u being the uniformly spaced coordinate.
  double jacobian(std::size_t i) const { return spacing == GridSpacing::Linear ? 1.0 : node(i); }
  double step() const {
    const double a = spacing == GridSpacing::Linear ? lo : std::log(lo);
    const double b = spacing == GridSpacing::Linear ? hi : std::log(hi);
    return (b - a) / static_cast<double>(n - 1);
  }

  /// Same centre and step, `factor` times the width (in the spacing's
  /// coordinate).
  Grid widened(double factor) const {
    Grid g = *this;
    const double a = spacing == GridSpacing::Linear ? lo : std::log(lo);
    const double b = spacing == GridSpacing::Linear ? hi : std::log(hi);
    const double c = 0.5 * (a + b);
    const double half = 0.5 * factor * (b - a);
    g.n = static_cast<std::size_t>(std::llround(factor * static_cast<double>(n - 1))) + 1;
    if (spacing == GridSpacing::Linear) {
      g.lo = c - half;
      g.hi = c + half;
    } else {
      g.lo = std::exp(c - half);
      g.hi = std::exp(c + half);
    }
    return g;
  }
};

/// Quantile by bisection on the CDF (linear for normals, in log(x) otherwise).
inline double quantile_by_bisection(const DistSpec& dist, double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile: p must be in (0,1)");
  const bool positive = dist.family() == Family::Gamma || dist.family() == Family::InvGamma;
  if (!positive && !(dist.family() == Family::NormalVar || dist.family() == Family::NormalPrec)) {
    throw UnsupportedError("quantile: scalar families only");
  }
  auto to_x = [positive](double u) { return positive ? std::exp(u) : u; };
  const double centre = positive ? 0.0 : mean(dist);
  double width = 1.0;
  if (dist.family() == Family::NormalVar) width = std::sqrt(dist.as<NormalVar>().v);
  if (dist.family() == Family::NormalPrec) width = 1.0 / std::sqrt(dist.as<NormalPrec>().vprec);
  double lo = centre - width;
  double hi = centre + width;
  for (double step = width; cdf(dist, to_x(lo)) > p; step *= 2.0) lo -= step;
  for (double step = width; cdf(dist, to_x(hi)) < p; step *= 2.0) hi += step;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(dist, to_x(mid)) < p) lo = mid; else hi = mid;
  }
  return to_x(0.5 * (lo + hi));
}

/// [q(1e-9), q(1 - 1e-9)] of the claimed distribution, doubled in width
/// about its centre.
inline Grid default_grid(const DistSpec& claimed, std::size_t n = 4001) {
  Grid g;
  g.n = n;
  g.spacing = (claimed.family() == Family::Gamma || claimed.family() == Family::InvGamma)
                  ? GridSpacing::Log
                  : GridSpacing::Linear;
  g.lo = quantile_by_bisection(claimed, 1e-9);
  g.hi = quantile_by_bisection(claimed, 1.0 - 1e-9);
  return g.widened(2.0);
}

namespace detail {

inline std::vector<double> log_product_on(const Grid& g, const std::vector<LogDensity>& parts) {
  std::vector<double> out(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    const double x = g.node(i);
    double s = 0.0;
    for (const auto& f : parts) s += f(x);
    out[i] = s;
  }
  return out;
}

inline double trapezoid_mass(const Grid& g, const std::vector<double>& logp, double shift) {
  double total = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) {
    const double w = (i == 0 || i + 1 == g.n) ? 0.5 : 1.0;
    total += w * std::exp(logp[i] - shift) * g.jacobian(i);
  }
  return total * g.step();
}

}  // namespace detail

/// Compare the normalized pointwise product of `components` with `claimed`
/// on `grid`. Throws CoverageError if the grid holds less than
/// `tol.min_coverage` of the product's mass found on a 10x wider grid.
inline CoherenceReport verify_product_coherence(std::span<const DistSpec> components,
                                                const DistSpec& claimed, const Grid& grid,
                                                const VerifyTolerances& tol = {}) {
  if (components.empty()) throw DomainError("verify_product_coherence: no components");
  if (grid.n < 1001) throw DomainError("verify_product_coherence: grid needs n >= 1001");
  if (!(grid.hi > grid.lo)) throw DomainError("verify_product_coherence: empty grid");
  if (grid.spacing == GridSpacing::Log && !(grid.lo > 0.0)) {
    throw DomainError("verify_product_coherence: log grid needs lo > 0");
  }
  std::vector<LogDensity> parts;
  for (const auto& c : components) parts.emplace_back(c);
  const LogDensity target(claimed);

  const Grid wide = grid.widened(10.0);
  const auto logp = detail::log_product_on(grid, parts);
  const auto logp_wide = detail::log_product_on(wide, parts);
  double shift = -std::numeric_limits<double>::infinity();
  for (double v : logp) shift = std::max(shift, v);
  for (double v : logp_wide) shift = std::max(shift, v);
  if (!std::isfinite(shift)) {
    throw CoverageError("verify_product_coherence: product density vanishes on the grid", 0.0);
  }

  const double mass = detail::trapezoid_mass(grid, logp, shift);
  const double mass_wide = detail::trapezoid_mass(wide, logp_wide, shift);
  CoherenceReport r;
  r.method = VerifyMethod::Grid;
  r.tolerances = tol;
  r.coverage = mass_wide > 0.0 ? std::min(1.0, mass / mass_wide) : 0.0;
  if (r.coverage < tol.min_coverage) {
    throw CoverageError("verify_product_coherence: grid holds only " +
                            number_text(r.coverage) + " of the product mass",
                        r.coverage);
  }
  double sup = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double x = grid.node(i);
    const double p_hat = std::exp(logp[i] - shift) / mass;
    sup = std::max(sup, std::fabs(p_hat - std::exp(target(x))));
  }
  r.sup_norm_error = sup;
  r.pass = decide(r);
  return r;
}

inline CoherenceReport verify_product_coherence(const MixturePriorGroup& group,
                                                const DistSpec& claimed,
                                                const VerifyTolerances& tol = {}) {
  return verify_product_coherence(group.components(), claimed, default_grid(claimed), tol);
}

// ---------------------------------------------------------------------------
// Monte Carlo band check

inline constexpr std::size_t kMinRetained = 200;

/// First coordinates of the draws whose contrasts all lie inside (-eps, eps).
template <class Rng>
std::vector<double> band_retained_first(const MixturePriorGroup& group, double epsilon,
                                        std::size_t n_draws, Rng& rng) {
  std::vector<double> retained;
  std::vector<double> draw(group.components().size());
  for (std::size_t n = 0; n < n_draws; ++n) {
    if (group.ordered()) {
      draw = sample_ordered(group, rng);
    } else {
      for (std::size_t i = 0; i < draw.size(); ++i) draw[i] = sample(group.components()[i], rng);
    }
    if (max_abs_contrast(draw) < epsilon) retained.push_back(draw.front());
  }
  return retained;
}

template <class Rng>
CoherenceReport mc_conditional_check(const MixturePriorGroup& group, const DistSpec& claimed,
                                     double epsilon, std::size_t n_draws, Rng& rng,
                                     const VerifyTolerances& tol = {}) {
  if (!(epsilon > 0.0)) throw DomainError("mc_conditional_check: epsilon must be > 0");
  if (n_draws < 100000) throw DomainError("mc_conditional_check: n_draws must be >= 1e5");
  if (group.K() < 2) throw DomainError("mc_conditional_check: group needs K >= 2");
  const auto retained = band_retained_first(group, epsilon, n_draws, rng);
  if (retained.size() < kMinRetained) {
    throw RetentionError("mc_conditional_check: only " + std::to_string(retained.size()) +
                             " draws fell in the band; increase epsilon or n_draws",
                         retained.size());
  }
  CoherenceReport r;
  r.method = VerifyMethod::McBand;
  r.tolerances = tol;
  r.epsilon = epsilon;
  r.n_draws = n_draws;
  r.n_retained = retained.size();
  r.ks_statistic = ks_statistic(retained, [&](double x) { return cdf(claimed, x); });
  r.critical_value = ks_critical_value(retained.size(), tol.ks_alpha);
  r.pass = decide(r);
  return r;
}

}  // namespace coherent
