#pragma once

// Closed-form maps between the K component priors of a mixture parameter
// group and the prior of the matching scalar parameter in the single-component
// model. The nested prior is proportional to the product of the component
// densities evaluated at a common point, so each conjugate family maps to
// itself:
//
//   normal (variance)   m1 = sum(m_i/v_i) / sum(1/v_i),  v1 = 1 / sum(1/v_i)
//   normal (precision)  m1 = sum(p_i m_i) / sum(p_i),    p1 = sum(p_i)
//   inverse gamma       a1 = sum(a_i) + K - 1,           b1 = 1 / sum(1/b_i)
//   gamma               a1 = sum(a_i) - K + 1,           b1 = sum(b_i)
//
// Reverse maps are only defined when all K components share hyperparameters.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "coherent/dist_kernels.hpp"
#include "coherent/errors.hpp"

namespace coherent {

namespace detail {

// Neumaier summation above 16 terms, plain accumulation otherwise.
template <class F>
double sum_terms(std::size_t n, F&& term) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += term(i);
    return s;
  }
  double s = 0.0;
  double c = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = term(i);
    const double u = s + t;
    if (std::fabs(s) >= std::fabs(t)) {
      c += (s - u) + t;
    } else {
      c += (t - u) + s;
    }
    s = u;
  }
  return s + c;
}

inline void require_components(std::size_t k, std::string_view op) {
  if (k < 2) {
    throw DomainError(std::string(op) + ": needs at least 2 components, got " +
                      std::to_string(k));
  }
}

inline void require_K(int k, std::string_view op) {
  if (k < 2) {
    throw DomainError(std::string(op) + ": K must be >= 2, got " + std::to_string(k));
  }
}

}  // namespace detail

/// The K priors of one switching parameter group.
///
/// K = 1 is accepted so that a single-component model can carry its scalar
/// parameters in the same container; coherence maps need K >= 2.
/// `ordered` requests the weak nondecreasing constraint across components.
/// It never reorders hyperparameters; the constraint acts when sampling.
class MixturePriorGroup {
 public:
  MixturePriorGroup(std::string label, std::vector<DistSpec> components,
                    bool ordered = false)
      : label_(std::move(label)), components_(std::move(components)), ordered_(ordered) {
    if (components_.empty()) {
      throw DomainError("group '" + label_ + "' has no components");
    }
    const Family fam = components_.front().family();
    for (const auto& c : components_) {
      if (c.family() != fam) {
        throw DomainError("group '" + label_ + "' mixes families " +
                          std::string(to_string(fam)) + " and " +
                          std::string(to_string(c.family())));
      }
      if (fam == Family::Dirichlet &&
          c.as<Dirichlet>().d.size() != components_.front().as<Dirichlet>().d.size()) {
        throw DomainError("group '" + label_ + "' has Dirichlet components of unequal dimension");
      }
    }
  }

  const std::string& label() const { return label_; }
  const std::vector<DistSpec>& components() const { return components_; }
  bool ordered() const { return ordered_; }
  int K() const { return static_cast<int>(components_.size()); }
  Family family() const { return components_.front().family(); }

  bool identical_components() const {
    for (const auto& c : components_) {
      if (!(c == components_.front())) return false;
    }
    return true;
  }

  bool operator==(const MixturePriorGroup&) const = default;

 private:
  std::string label_;
  std::vector<DistSpec> components_;
  bool ordered_;
};

// ---------------------------------------------------------------------------
// Forward maps

inline NormalVar coherent_normal_forward(std::span<const NormalVar> groups) {
  detail::require_components(groups.size(), "coherent_normal_forward");
  for (const auto& g : groups) (void)DistSpec(g);
  const std::size_t k = groups.size();
  const double prec = detail::sum_terms(k, [&](std::size_t i) { return 1.0 / groups[i].v; });
  const double weighted = detail::sum_terms(k, [&](std::size_t i) { return groups[i].m / groups[i].v; });
  return NormalVar{weighted / prec, 1.0 / prec};
}

inline NormalPrec coherent_normal_prec_forward(std::span<const NormalPrec> groups) {
  detail::require_components(groups.size(), "coherent_normal_prec_forward");
  for (const auto& g : groups) (void)DistSpec(g);
  const std::size_t k = groups.size();
  const double prec = detail::sum_terms(k, [&](std::size_t i) { return groups[i].vprec; });
  const double weighted =
      detail::sum_terms(k, [&](std::size_t i) { return groups[i].vprec * groups[i].m; });
  return NormalPrec{weighted / prec, prec};
}

/// Weights w_i = p_i / sum(p) with which the nested mean averages the
/// component means.
inline std::vector<double> normal_mean_weights(std::span<const NormalVar> groups) {
  detail::require_components(groups.size(), "normal_mean_weights");
  const std::size_t k = groups.size();
  const double prec = detail::sum_terms(k, [&](std::size_t i) { return 1.0 / groups[i].v; });
  std::vector<double> w(k);
  for (std::size_t i = 0; i < k; ++i) w[i] = (1.0 / groups[i].v) / prec;
  return w;
}

inline InvGamma coherent_invgamma_forward(std::span<const InvGamma> groups) {
  detail::require_components(groups.size(), "coherent_invgamma_forward");
  for (const auto& g : groups) (void)DistSpec(g);
  const std::size_t k = groups.size();
  const double shape =
      detail::sum_terms(k, [&](std::size_t i) { return groups[i].a_shape; }) +
      static_cast<double>(k) - 1.0;
  const double inv_scale =
      detail::sum_terms(k, [&](std::size_t i) { return 1.0 / groups[i].b_scale; });
  return InvGamma{shape, 1.0 / inv_scale};
}

/// Throws InfeasibleError when sum(a_i) <= K - 1: the product kernel is then
/// not normalizable as a gamma density.
inline Gamma coherent_gamma_forward(std::span<const Gamma> groups) {
  detail::require_components(groups.size(), "coherent_gamma_forward");
  for (const auto& g : groups) (void)DistSpec(g);
  const std::size_t k = groups.size();
  const double shape_sum = detail::sum_terms(k, [&](std::size_t i) { return groups[i].a_shape; });
  const double bound = static_cast<double>(k) - 1.0;
  if (!(shape_sum > bound)) {
    throw InfeasibleError("product kernel not normalizable as gamma: sum of shapes " +
                              number_text(shape_sum) + " <= K-1 = " +
                              number_text(bound),
                          shape_sum, bound);
  }
  const double rate = detail::sum_terms(k, [&](std::size_t i) { return groups[i].b_rate; });
  return Gamma{shape_sum - bound, rate};
}

// ---------------------------------------------------------------------------
// Reverse maps under component-wise equal hyperparameters

inline NormalVar reverse_equal_normal(const NormalVar& nested, int K) {
  detail::require_K(K, "reverse_equal_normal");
  (void)DistSpec(nested);
  return NormalVar{nested.m, static_cast<double>(K) * nested.v};
}

inline NormalPrec reverse_equal_normal(const NormalPrec& nested, int K) {
  detail::require_K(K, "reverse_equal_normal");
  (void)DistSpec(nested);
  return NormalPrec{nested.m, nested.vprec / static_cast<double>(K)};
}

/// Requires a1 > K - 1 strictly.
inline InvGamma reverse_equal_invgamma(const InvGamma& nested, int K) {
  detail::require_K(K, "reverse_equal_invgamma");
  (void)DistSpec(nested);
  const double bound = static_cast<double>(K) - 1.0;
  if (!(nested.a_shape > bound)) {
    throw InfeasibleError("inverse gamma reverse map needs a1 > K-1: a1 = " +
                              number_text(nested.a_shape) + ", K-1 = " +
                              std::to_string(K - 1),
                          nested.a_shape, bound);
  }
  const double kd = static_cast<double>(K);
  return InvGamma{(nested.a_shape - bound) / kd, kd * nested.b_scale};
}

/// Always feasible for a1 > 0.
inline Gamma reverse_equal_gamma(const Gamma& nested, int K) {
  detail::require_K(K, "reverse_equal_gamma");
  (void)DistSpec(nested);
  const double kd = static_cast<double>(K);
  return Gamma{(nested.a_shape + kd - 1.0) / kd, nested.b_rate / kd};
}

struct KRangeFeasibility {
  bool feasible = true;
  std::vector<int> infeasible_K;
  std::string diagnostic;
};

/// Whether an inverse-gamma shape a1 admits equal-hyperparameter mixture
/// priors for every K in [Kmin, Kmax].
inline KRangeFeasibility feasible_K_range(double a1, int Kmin, int Kmax) {
  detail::require_K(Kmin, "feasible_K_range");
  if (Kmax < Kmin) throw DomainError("feasible_K_range: Kmax < Kmin");
  KRangeFeasibility out;
  for (int k = Kmin; k <= Kmax; ++k) {
    if (!(a1 > static_cast<double>(k - 1))) out.infeasible_K.push_back(k);
  }
  out.feasible = out.infeasible_K.empty();
  if (out.feasible) {
    out.diagnostic = "a1 = " + number_text(a1) + " > Kmax-1 = " + std::to_string(Kmax - 1);
  } else {
    out.diagnostic = "a1 = " + number_text(a1) + " must exceed K-1; infeasible K:";
    for (int k : out.infeasible_K) out.diagnostic += " " + std::to_string(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Family dispatch

namespace detail {

template <class T>
std::vector<T> unpack(std::span<const DistSpec> components) {
  std::vector<T> out;
  out.reserve(components.size());
  for (const auto& c : components) out.push_back(c.as<T>());
  return out;
}

}  // namespace detail

/// Normalized product of same-family component densities.
inline DistSpec coherent_product(std::span<const DistSpec> components) {
  detail::require_components(components.size(), "coherent_product");
  const Family fam = components.front().family();
  for (const auto& c : components) {
    if (c.family() != fam) {
      throw DomainError("coherent_product: mixed families " + std::string(to_string(fam)) +
                        " and " + std::string(to_string(c.family())));
    }
  }
  switch (fam) {
    case Family::NormalVar:
      return coherent_normal_forward(detail::unpack<NormalVar>(components));
    case Family::NormalPrec:
      return coherent_normal_prec_forward(detail::unpack<NormalPrec>(components));
    case Family::Gamma:
      return coherent_gamma_forward(detail::unpack<Gamma>(components));
    case Family::InvGamma:
      return coherent_invgamma_forward(detail::unpack<InvGamma>(components));
    case Family::Dirichlet:
      break;
  }
  throw UnsupportedError("coherent_product: no coherence map is defined for dirichlet priors");
}

inline DistSpec coherent_product(const MixturePriorGroup& group) {
  return coherent_product(std::span<const DistSpec>(group.components()));
}

/// K identical components whose product is `nested`.
inline DistSpec reverse_equal(const DistSpec& nested, int K) {
  switch (nested.family()) {
    case Family::NormalVar: return reverse_equal_normal(nested.as<NormalVar>(), K);
    case Family::NormalPrec: return reverse_equal_normal(nested.as<NormalPrec>(), K);
    case Family::Gamma: return reverse_equal_gamma(nested.as<Gamma>(), K);
    case Family::InvGamma: return reverse_equal_invgamma(nested.as<InvGamma>(), K);
    case Family::Dirichlet: break;
  }
  throw UnsupportedError("reverse map is not defined for dirichlet priors");
}

/// Largest hyperparameter difference between two same-family scalar priors,
/// relative to max(1, |x|, |y|) per hyperparameter.
inline double hyperparameter_discrepancy(const DistSpec& x, const DistSpec& y) {
  if (x.family() != y.family()) {
    throw DomainError("hyperparameter_discrepancy: family mismatch");
  }
  auto diff = [](double a, double b) {
    return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
  };
  switch (x.family()) {
    case Family::NormalVar: {
      const auto &a = x.as<NormalVar>(), &b = y.as<NormalVar>();
      return std::max(diff(a.m, b.m), diff(a.v, b.v));
    }
    case Family::NormalPrec: {
      const auto &a = x.as<NormalPrec>(), &b = y.as<NormalPrec>();
      return std::max(diff(a.m, b.m), diff(a.vprec, b.vprec));
    }
    case Family::Gamma: {
      const auto &a = x.as<Gamma>(), &b = y.as<Gamma>();
      return std::max(diff(a.a_shape, b.a_shape), diff(a.b_rate, b.b_rate));
    }
    case Family::InvGamma: {
      const auto &a = x.as<InvGamma>(), &b = y.as<InvGamma>();
      return std::max(diff(a.a_shape, b.a_shape), diff(a.b_scale, b.b_scale));
    }
    case Family::Dirichlet: {
      const auto &a = x.as<Dirichlet>(), &b = y.as<Dirichlet>();
      if (a.d.size() != b.d.size()) return std::numeric_limits<double>::infinity();
      double m = 0.0;
      for (std::size_t i = 0; i < a.d.size(); ++i) m = std::max(m, diff(a.d[i], b.d[i]));
      return m;
    }
  }
  return std::numeric_limits<double>::infinity();
}

/// Nested prior together with the mixture group it is coherent with.
class CoherentPair {
 public:
  static constexpr double kTolerance = 1e-12;

  CoherentPair(DistSpec nested, MixturePriorGroup mixture)
      : nested_(std::move(nested)), mixture_(std::move(mixture)) {
    if (nested_.family() != mixture_.family()) {
      throw DomainError("coherent pair: nested prior is " +
                        std::string(to_string(nested_.family())) + ", group is " +
                        std::string(to_string(mixture_.family())));
    }
    const DistSpec implied = coherent_product(mixture_);
    const double gap = hyperparameter_discrepancy(nested_, implied);
    if (gap > kTolerance) {
      throw DomainError("coherent pair: nested prior differs from the product of group '" +
                        mixture_.label() + "' by " + number_text(gap));
    }
  }

  const DistSpec& nested() const { return nested_; }
  const MixturePriorGroup& mixture() const { return mixture_; }

 private:
  DistSpec nested_;
  MixturePriorGroup mixture_;
};

struct LabeledPrior {
  std::string label;
  DistSpec prior;
};

struct FamilyIssue {
  int K = 0;
  std::string label;
  double value = 0.0;
  double bound = 0.0;
  std::string message;
};

class FamilyInfeasibleError : public InfeasibleError {
 public:
  explicit FamilyInfeasibleError(std::vector<FamilyIssue> issues)
      : InfeasibleError(summarize(issues), issues.front().value, issues.front().bound),
        issues_(std::move(issues)) {}

  const std::vector<FamilyIssue>& issues() const { return issues_; }

 private:
  static std::string summarize(const std::vector<FamilyIssue>& issues) {
    std::string out = "coherent_family infeasible:";
    for (const auto& i : issues) {
      out += "\n  K=" + std::to_string(i.K) + " parameter '" + i.label + "': " + i.message;
    }
    return out;
  }

  std::vector<FamilyIssue> issues_;
};

/// Equal-hyperparameter mixture groups, for every K in `Ks`, coherent with
/// each nested prior. All infeasible (K, label) combinations are collected
/// before throwing.
inline std::map<int, std::vector<MixturePriorGroup>> coherent_family(
    std::span<const LabeledPrior> nested, const std::set<int>& Ks) {
  std::map<int, std::vector<MixturePriorGroup>> out;
  std::vector<FamilyIssue> issues;
  for (int k : Ks) {
    detail::require_K(k, "coherent_family");
    auto& groups = out[k];
    for (const auto& p : nested) {
      try {
        const DistSpec component = reverse_equal(p.prior, k);
        groups.emplace_back(p.label,
                            std::vector<DistSpec>(static_cast<std::size_t>(k), component));
      } catch (const InfeasibleError& e) {
        issues.push_back({k, p.label, e.value(), e.bound(), e.what()});
      }
    }
  }
  if (!issues.empty()) throw FamilyInfeasibleError(std::move(issues));
  return out;
}

}  // namespace coherent
