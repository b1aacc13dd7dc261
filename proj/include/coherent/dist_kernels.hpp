#pragma once

// Density, CDF and sampling kernels for the five prior families used by the
// coherence machinery. Parametrizations follow the conventions below, which
// differ from the usual textbook naming for the two gamma-type families:
//
//   NormalVar{m, v}          N(m, v), v is the variance
//   NormalPrec{m, vprec}     N(m, 1/vprec)
//   Gamma{a_shape, b_rate}   density  b^a / Gamma(a) x^(a-1) exp(-b x)
//   InvGamma{a_shape, b_scale}
//                            density  1 / (b^a Gamma(a)) x^-(a+1) exp(-1/(b x))
//                            i.e. the textbook inverse-gamma scale is 1/b
//   Dirichlet{d}             concentration vector, length >= 2

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "coherent/errors.hpp"

namespace coherent {

enum class Family { NormalVar, NormalPrec, Gamma, InvGamma, Dirichlet };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::NormalVar: return "normal_var";
    case Family::NormalPrec: return "normal_prec";
    case Family::Gamma: return "gamma";
    case Family::InvGamma: return "invgamma";
    case Family::Dirichlet: return "dirichlet";
  }
  return "unknown";
}

struct NormalVar {
  double m = 0.0;
  double v = 1.0;
  bool operator==(const NormalVar&) const = default;
};

struct NormalPrec {
  double m = 0.0;
  double vprec = 1.0;
  bool operator==(const NormalPrec&) const = default;
};

struct Gamma {
  double a_shape = 1.0;
  double b_rate = 1.0;
  bool operator==(const Gamma&) const = default;
};

/// `b_scale` is the reciprocal of the textbook inverse-gamma scale.
struct InvGamma {
  double a_shape = 1.0;
  double b_scale = 1.0;
  bool operator==(const InvGamma&) const = default;
};

struct Dirichlet {
  std::vector<double> d;
  bool operator==(const Dirichlet&) const = default;
};

namespace detail {

inline bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

inline void require_positive(double x, std::string_view family,
                             std::string_view field) {
  if (!positive_finite(x)) {
    throw DomainError(std::string(family) + ": " + std::string(field) +
                      " must be finite and > 0");
  }
}

inline void require_finite(double x, std::string_view family,
                           std::string_view field) {
  if (!std::isfinite(x)) {
    throw DomainError(std::string(family) + ": " + std::string(field) +
                      " must be finite");
  }
}

}  // namespace detail

/// Immutable, validated distribution descriptor. Construction rejects any
/// hyperparameter outside its domain.
class DistSpec {
 public:
  using Variant = std::variant<NormalVar, NormalPrec, Gamma, InvGamma, Dirichlet>;

  DistSpec(NormalVar p) : value_(validate(p)) {}
  DistSpec(NormalPrec p) : value_(validate(p)) {}
  DistSpec(Gamma p) : value_(validate(p)) {}
  DistSpec(InvGamma p) : value_(validate(p)) {}
  DistSpec(Dirichlet p) : value_(validate(std::move(p))) {}

  Family family() const { return static_cast<Family>(value_.index()); }
  bool is_scalar() const { return family() != Family::Dirichlet; }
  const Variant& value() const { return value_; }

  template <class T>
  const T& as() const {
    if (const T* p = std::get_if<T>(&value_)) return *p;
    throw UnsupportedError("distribution is " + std::string(to_string(family())));
  }

  template <class T>
  bool holds() const {
    return std::holds_alternative<T>(value_);
  }

  bool operator==(const DistSpec&) const = default;

 private:
  static NormalVar validate(NormalVar p) {
    detail::require_finite(p.m, "normal_var", "m");
    detail::require_positive(p.v, "normal_var", "v");
    return p;
  }
  static NormalPrec validate(NormalPrec p) {
    detail::require_finite(p.m, "normal_prec", "m");
    detail::require_positive(p.vprec, "normal_prec", "vprec");
    return p;
  }
  static Gamma validate(Gamma p) {
    detail::require_positive(p.a_shape, "gamma", "a_breve");
    detail::require_positive(p.b_rate, "gamma", "b_breve");
    return p;
  }
  static InvGamma validate(InvGamma p) {
    detail::require_positive(p.a_shape, "invgamma", "a");
    detail::require_positive(p.b_scale, "invgamma", "b");
    return p;
  }
  static Dirichlet validate(Dirichlet p) {
    if (p.d.size() < 2) throw DomainError("dirichlet: d needs at least 2 entries");
    for (double di : p.d) detail::require_positive(di, "dirichlet", "d");
    return p;
  }

  Variant value_;
};

// ---------------------------------------------------------------------------
// Regularized incomplete gamma

namespace detail {

inline constexpr int kIncGammaMaxIter = 100000;
inline constexpr double kIncGammaEps = 1e-16;

// log(x^a e^-x / Gamma(a))
inline double incgamma_log_prefactor(double a, double x) {
  return a * std::log(x) - x - std::lgamma(a);
}

// P(a, x) by the power series, valid (and fast) for x < a + 1.
inline double incgamma_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < kIncGammaMaxIter; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kIncGammaEps) {
      return sum * std::exp(incgamma_log_prefactor(a, x));
    }
  }
  throw ConvergenceError("incomplete gamma series did not converge", 0.0, 1.0);
}

// Q(a, x) by the Legendre continued fraction (modified Lentz), x >= a + 1.
inline double incgamma_continued_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kIncGammaEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kIncGammaMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kIncGammaEps) {
      return std::exp(incgamma_log_prefactor(a, x)) * h;
    }
  }
  throw ConvergenceError("incomplete gamma continued fraction did not converge",
                         0.0, 1.0);
}

inline void check_incgamma_args(double shape, double x) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw DomainError("incomplete gamma: shape must be finite and > 0");
  }
  if (!(x >= 0.0)) throw DomainError("incomplete gamma: x must be >= 0");
}

}  // namespace detail

/// P(shape, x) = gamma(shape, x) / Gamma(shape).
inline double reg_lower_incomplete_gamma(double shape, double x) {
  detail::check_incgamma_args(shape, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < shape + 1.0) return detail::incgamma_series(shape, x);
  return 1.0 - detail::incgamma_continued_fraction(shape, x);
}

/// Q(shape, x) = 1 - P(shape, x), computed without cancellation in the tail.
inline double reg_upper_incomplete_gamma(double shape, double x) {
  detail::check_incgamma_args(shape, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < shape + 1.0) return 1.0 - detail::incgamma_series(shape, x);
  return detail::incgamma_continued_fraction(shape, x);
}

// ---------------------------------------------------------------------------
// Densities

/// Log-density of a scalar family with its normalizing constant cached, for
/// loops that evaluate one distribution many times.
class LogDensity {
 public:
  explicit LogDensity(const DistSpec& dist) : family_(dist.family()) {
    constexpr double log_2pi = 1.8378770664093454836;
    switch (family_) {
      case Family::NormalVar: {
        const auto& p = dist.as<NormalVar>();
        loc_ = p.m;
        coef_ = 0.5 / p.v;
        lognorm_ = -0.5 * (log_2pi + std::log(p.v));
        break;
      }
      case Family::NormalPrec: {
        const auto& p = dist.as<NormalPrec>();
        loc_ = p.m;
        coef_ = 0.5 * p.vprec;
        lognorm_ = -0.5 * log_2pi + 0.5 * std::log(p.vprec);
        break;
      }
      case Family::Gamma: {
        const auto& p = dist.as<Gamma>();
        shape_ = p.a_shape;
        coef_ = p.b_rate;
        lognorm_ = p.a_shape * std::log(p.b_rate) - std::lgamma(p.a_shape);
        break;
      }
      case Family::InvGamma: {
        const auto& p = dist.as<InvGamma>();
        shape_ = p.a_shape;
        coef_ = 1.0 / p.b_scale;
        lognorm_ = -p.a_shape * std::log(p.b_scale) - std::lgamma(p.a_shape);
        break;
      }
      case Family::Dirichlet:
        throw UnsupportedError("dirichlet density takes a probability vector");
    }
  }

  double operator()(double x) const {
    if (std::isnan(x)) throw DomainError("log_pdf: x is NaN");
    switch (family_) {
      case Family::NormalVar:
      case Family::NormalPrec: {
        const double z = x - loc_;
        return lognorm_ - coef_ * z * z;
      }
      case Family::Gamma:
        if (x < 0.0) throw DomainError("gamma log_pdf: x must be >= 0");
        if (x == 0.0) {
          if (shape_ == 1.0) return lognorm_;
          return shape_ > 1.0 ? -std::numeric_limits<double>::infinity()
                              : std::numeric_limits<double>::infinity();
        }
        return lognorm_ + (shape_ - 1.0) * std::log(x) - coef_ * x;
      case Family::InvGamma:
        if (x < 0.0) throw DomainError("invgamma log_pdf: x must be >= 0");
        if (x == 0.0) return -std::numeric_limits<double>::infinity();
        return lognorm_ - (shape_ + 1.0) * std::log(x) - coef_ / x;
      case Family::Dirichlet:
        break;
    }
    throw UnsupportedError("dirichlet density takes a probability vector");
  }

 private:
  Family family_;
  double loc_ = 0.0;
  double shape_ = 0.0;
  double coef_ = 0.0;
  double lognorm_ = 0.0;
};

inline double log_pdf(const DistSpec& dist, double x) { return LogDensity(dist)(x); }

inline double log_pdf(const DistSpec& dist, std::span<const double> x) {
  const auto& p = dist.as<Dirichlet>();
  if (x.size() != p.d.size()) {
    throw DomainError("dirichlet log_pdf: dimension mismatch");
  }
  double total = 0.0;
  for (double xi : x) {
    if (!(xi >= 0.0) || xi > 1.0) throw DomainError("dirichlet log_pdf: x not in simplex");
    total += xi;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw DomainError("dirichlet log_pdf: x does not sum to 1");
  }
  const double dsum = std::accumulate(p.d.begin(), p.d.end(), 0.0);
  double out = std::lgamma(dsum);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out -= std::lgamma(p.d[i]);
    if (p.d[i] != 1.0) out += (p.d[i] - 1.0) * std::log(x[i]);
  }
  return out;
}

/// Mean of a scalar family; infinite for InvGamma with shape <= 1.
inline double mean(const DistSpec& dist) {
  switch (dist.family()) {
    case Family::NormalVar: return dist.as<NormalVar>().m;
    case Family::NormalPrec: return dist.as<NormalPrec>().m;
    case Family::Gamma: {
      const auto& p = dist.as<Gamma>();
      return p.a_shape / p.b_rate;
    }
    case Family::InvGamma: {
      const auto& p = dist.as<InvGamma>();
      if (p.a_shape <= 1.0) return std::numeric_limits<double>::infinity();
      return 1.0 / (p.b_scale * (p.a_shape - 1.0));
    }
    case Family::Dirichlet: break;
  }
  throw UnsupportedError("mean: dirichlet is vector valued");
}

inline std::vector<double> dirichlet_mean(const DistSpec& dist) {
  const auto& p = dist.as<Dirichlet>();
  const double s = std::accumulate(p.d.begin(), p.d.end(), 0.0);
  std::vector<double> out(p.d.size());
  std::transform(p.d.begin(), p.d.end(), out.begin(), [s](double v) { return v / s; });
  return out;
}

inline double cdf(const DistSpec& dist, double x) {
  if (std::isnan(x)) throw DomainError("cdf: x is NaN");
  switch (dist.family()) {
    case Family::NormalVar: {
      const auto& p = dist.as<NormalVar>();
      return 0.5 * std::erfc(-(x - p.m) / std::sqrt(2.0 * p.v));
    }
    case Family::NormalPrec: {
      const auto& p = dist.as<NormalPrec>();
      return 0.5 * std::erfc(-(x - p.m) * std::sqrt(0.5 * p.vprec));
    }
    case Family::Gamma: {
      const auto& p = dist.as<Gamma>();
      if (x <= 0.0) return 0.0;
      return reg_lower_incomplete_gamma(p.a_shape, p.b_rate * x);
    }
    case Family::InvGamma: {
      const auto& p = dist.as<InvGamma>();
      if (x <= 0.0) return 0.0;
      return reg_upper_incomplete_gamma(p.a_shape, 1.0 / (p.b_scale * x));
    }
    case Family::Dirichlet: break;
  }
  throw UnsupportedError("cdf is not defined for dirichlet");
}

// ---------------------------------------------------------------------------
// Sampling. The generator is always supplied by the caller.

template <class Rng>
double sample(const DistSpec& dist, Rng& rng) {
  switch (dist.family()) {
    case Family::NormalVar: {
      const auto& p = dist.as<NormalVar>();
      return std::normal_distribution<double>(p.m, std::sqrt(p.v))(rng);
    }
    case Family::NormalPrec: {
      const auto& p = dist.as<NormalPrec>();
      return std::normal_distribution<double>(p.m, 1.0 / std::sqrt(p.vprec))(rng);
    }
    case Family::Gamma: {
      const auto& p = dist.as<Gamma>();
      return std::gamma_distribution<double>(p.a_shape, 1.0 / p.b_rate)(rng);
    }
    case Family::InvGamma: {
      // 1/X ~ Gamma(shape a, textbook scale b) under this parametrization.
      const auto& p = dist.as<InvGamma>();
      return 1.0 / std::gamma_distribution<double>(p.a_shape, p.b_scale)(rng);
    }
    case Family::Dirichlet: break;
  }
  throw UnsupportedError("sample: dirichlet draws are vectors, use sample_simplex");
}

template <class Rng>
std::vector<double> sample_simplex(const DistSpec& dist, Rng& rng) {
  const auto& p = dist.as<Dirichlet>();
  std::vector<double> out(p.d.size());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::gamma_distribution<double>(p.d[i], 1.0)(rng);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace coherent
