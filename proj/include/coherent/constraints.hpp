#pragma once

// Identifiability (ordering) and regularity (second-order stationarity)
// constraints on mixture / Markov-switching priors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coherent/coherence_maps.hpp"
#include "coherent/dist_kernels.hpp"
#include "coherent/errors.hpp"
#include "coherent/linalg.hpp"
#include "coherent/model.hpp"

namespace coherent {

// ---------------------------------------------------------------------------
// Ordering

/// Weak nondecreasing order across the components of one group.
struct OrderingConstraint {
  std::string group_label;
  bool operator==(const OrderingConstraint&) const = default;
};

inline std::optional<OrderingConstraint> ordering_constraint(const ModelSpec& model) {
  for (const auto& g : model.groups) {
    if (g.ordered()) return OrderingConstraint{g.label()};
  }
  return std::nullopt;
}

/// Ties pass: the nested model lies on the boundary of the ordered set.
inline bool indicator_ordered(std::span<const double> values) {
  return std::is_sorted(values.begin(), values.end());
}

inline constexpr std::size_t kOrderedRejectionCap = 1'000'000;

/// Draw from the group's prior restricted to the nondecreasing cone.
/// Exchangeable (identical) components: sort one iid draw, which is exact.
/// Otherwise rejection sampling.
template <class Rng>
std::vector<double> sample_ordered(const MixturePriorGroup& group, Rng& rng,
                                   std::size_t max_attempts = kOrderedRejectionCap) {
  if (!group.ordered()) {
    throw ConfigError("sample_ordered: group '" + group.label() + "' is not ordered");
  }
  const auto& comps = group.components();
  std::vector<double> draw(comps.size());
  auto fill = [&] {
    for (std::size_t i = 0; i < comps.size(); ++i) draw[i] = sample(comps[i], rng);
  };
  if (comps.size() == 1) {
    fill();
    return draw;
  }
  if (group.identical_components()) {
    fill();
    std::sort(draw.begin(), draw.end());
    return draw;
  }
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    fill();
    if (indicator_ordered(draw)) return draw;
  }
  throw RejectionCapError("sample_ordered: no ordered draw for group '" + group.label() +
                              "' in " + std::to_string(max_attempts) +
                              " attempts (empirical acceptance rate 0)",
                          max_attempts, 0);
}

// ---------------------------------------------------------------------------
// Stationarity of Markov-switching AR(2)

/// One regime's AR(2) dynamics as [[phi1, phi2], [1, 0]].
struct CompanionMatrix {
  double phi1 = 0.0;
  double phi2 = 0.0;

  Matrix matrix() const { return Matrix{{phi1, phi2}, {1.0, 0.0}}; }
  bool operator==(const CompanionMatrix&) const = default;
};

/// Row-stochastic transition matrix plus one companion matrix per regime.
class StationarityProblem {
 public:
  static constexpr double kRowSumTolerance = 1e-12;

  StationarityProblem(Matrix transition, std::vector<CompanionMatrix> regimes)
      : transition_(std::move(transition)), regimes_(std::move(regimes)) {
    const std::size_t k = transition_.rows();
    if (k < 1 || !transition_.square()) {
      throw DomainError("stationarity problem: transition matrix must be square with K >= 1");
    }
    if (regimes_.size() != k) {
      throw DomainError("stationarity problem: " + std::to_string(regimes_.size()) +
                        " regimes for a " + std::to_string(k) + "-state chain");
    }
    for (std::size_t i = 0; i < k; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double p = transition_(i, j);
        if (!(p >= 0.0) || !std::isfinite(p)) {
          throw DomainError("stationarity problem: transition entries must be finite and >= 0");
        }
        s += p;
      }
      if (std::fabs(s - 1.0) > kRowSumTolerance) {
        throw DomainError("stationarity problem: row " + std::to_string(i) +
                          " of the transition matrix sums to " + number_text(s));
      }
    }
    for (const auto& r : regimes_) {
      if (!std::isfinite(r.phi1) || !std::isfinite(r.phi2)) {
        throw DomainError("stationarity problem: AR coefficients must be finite");
      }
    }
  }

  std::size_t K() const { return regimes_.size(); }
  const Matrix& transition() const { return transition_; }
  const std::vector<CompanionMatrix>& regimes() const { return regimes_; }

 private:
  Matrix transition_;
  std::vector<CompanionMatrix> regimes_;
};

/// 4K x 4K matrix whose row block j, column block i is
/// eta_ij * (Phi_j kron Phi_j), with eta_ij = P(S_t = j | S_{t-1} = i).
inline Matrix build_P2(const StationarityProblem& problem) {
  const std::size_t k = problem.K();
  Matrix out(4 * k, 4 * k);
  for (std::size_t j = 0; j < k; ++j) {
    const Matrix phi = problem.regimes()[j].matrix();
    const Matrix block = kron(phi, phi);
    for (std::size_t i = 0; i < k; ++i) {
      const double eta = problem.transition()(i, j);
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) out(4 * j + r, 4 * i + c) = eta * block(r, c);
    }
  }
  return out;
}

struct StationarityVerdict {
  bool stationary = false;
  double rho = 0.0;
  // |rho - 1| <= tol: the computed radius cannot separate the two sides.
  bool boundary_indeterminate = false;
};

inline StationarityVerdict classify_radius(double rho, double tol) {
  StationarityVerdict v;
  v.rho = rho;
  v.boundary_indeterminate = std::fabs(rho - 1.0) <= tol;
  v.stationary = rho < 1.0 && !v.boundary_indeterminate;
  return v;
}

/// Sufficient condition rho(P2) < 1 for a causal, second-order stationary
/// MS-AR(2) process.
inline StationarityVerdict is_stationary_msar2(const StationarityProblem& problem,
                                               double tol = 1e-10) {
  return classify_radius(spectral_radius(build_P2(problem), tol), tol);
}

/// Triangle form of the AR(2) stationarity region.
inline bool in_ar2_triangle(double phi1, double phi2) {
  return phi2 > -1.0 && phi1 + phi2 < 1.0 && phi2 - phi1 < 1.0;
}

/// rho(Phi) < 1, cross-checked against the triangle inequalities. A
/// disagreement away from the boundary indicates a numerical bug.
inline bool is_stationary_ar2(double phi1, double phi2) {
  if (!std::isfinite(phi1) || !std::isfinite(phi2)) {
    throw DomainError("is_stationary_ar2: coefficients must be finite");
  }
  const double rho = spectral_radius(CompanionMatrix{phi1, phi2}.matrix(), 1e-12);
  const bool by_radius = rho < 1.0;
  const bool by_triangle = in_ar2_triangle(phi1, phi2);
  if (by_radius != by_triangle && std::fabs(rho - 1.0) > 1e-9) {
    throw std::logic_error("is_stationary_ar2: spectral radius " + number_text(rho) +
                           " disagrees with the stationarity triangle at (" +
                           number_text(phi1) + ", " + number_text(phi2) + ")");
  }
  return by_radius;
}

namespace detail {

// Coefficient values per regime; non-switching coefficients are broadcast.
inline std::vector<double> resolve_coefficient(const ModelSpec& model, const ParameterPoint& theta,
                                               const std::string& name, std::size_t k) {
  if (auto it = theta.delta.find(name); it != theta.delta.end()) {
    return std::vector<double>(k, it->second);
  }
  if (auto it = theta.groups.find(name); it != theta.groups.end()) {
    if (it->second.size() == 1) return std::vector<double>(k, it->second.front());
    if (it->second.size() != k) {
      throw ConfigError("parameter '" + name + "' has " + std::to_string(it->second.size()) +
                        " values, expected " + std::to_string(k));
    }
    return it->second;
  }
  throw ConfigError("model '" + model.name + "': parameter point lacks '" + name + "'");
}

}  // namespace detail

inline StationarityProblem stationarity_problem_at(const ModelSpec& model,
                                                   const ParameterPoint& theta) {
  if (model.kind != ModelKind::MarkovSwitching) {
    throw ConfigError("msar2 stationarity needs a markov_switching model, '" + model.name +
                      "' is " + std::string(to_string(model.kind)));
  }
  const auto k = static_cast<std::size_t>(model.K);
  if (theta.eta.size() != k) {
    throw ConfigError("parameter point has " + std::to_string(theta.eta.size()) +
                      " transition rows, expected " + std::to_string(k));
  }
  Matrix transition(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    if (theta.eta[i].size() != k) throw ConfigError("transition row has wrong length");
    for (std::size_t j = 0; j < k; ++j) transition(i, j) = theta.eta[i][j];
  }
  const auto phi1 = detail::resolve_coefficient(model, theta, model.regularity.phi1, k);
  const auto phi2 = detail::resolve_coefficient(model, theta, model.regularity.phi2, k);
  std::vector<CompanionMatrix> regimes;
  for (std::size_t i = 0; i < k; ++i) regimes.push_back({phi1[i], phi2[i]});
  return StationarityProblem(std::move(transition), std::move(regimes));
}

/// Membership of the regularity function in [0, 1) at `theta`.
inline bool regularity_indicator(const ModelSpec& model, const ParameterPoint& theta,
                                 double tol = 1e-10) {
  const auto& r = model.regularity;
  switch (r.kind) {
    case RegularityKind::None:
      return true;
    case RegularityKind::Ar2Stationarity: {
      const auto phi1 = detail::resolve_coefficient(model, theta, r.phi1, 1);
      const auto phi2 = detail::resolve_coefficient(model, theta, r.phi2, 1);
      const auto* g1 = model.find_group(r.phi1);
      const auto* g2 = model.find_group(r.phi2);
      if ((g1 != nullptr && g1->K() > 1) || (g2 != nullptr && g2->K() > 1)) {
        throw ConfigError("ar2_stationarity applies to non-switching coefficients only");
      }
      return is_stationary_ar2(phi1.front(), phi2.front());
    }
    case RegularityKind::Msar2Stationarity:
      return is_stationary_msar2(stationarity_problem_at(model, theta), tol).stationary;
  }
  return false;
}

/// One draw from the unconstrained prior (ordering honored).
template <class Rng>
ParameterPoint sample_prior(const ModelSpec& model, Rng& rng) {
  ParameterPoint theta;
  for (const auto& d : model.delta) theta.delta[d.name] = sample(d.prior, rng);
  for (const auto& g : model.groups) {
    if (g.ordered()) {
      theta.groups[g.label()] = sample_ordered(g, rng);
    } else {
      std::vector<double> values;
      values.reserve(g.components().size());
      for (const auto& c : g.components()) values.push_back(sample(c, rng));
      theta.groups[g.label()] = std::move(values);
    }
  }
  for (const auto& row : model.eta) theta.eta.push_back(sample_simplex(row, rng));
  return theta;
}

struct ConstrainedDraw {
  ParameterPoint point;
  std::size_t attempts = 0;
  double acceptance_rate() const {
    return attempts == 0 ? 0.0 : 1.0 / static_cast<double>(attempts);
  }
};

/// Rejection sampler for the prior truncated by the regularity constraint.
template <class Rng>
ConstrainedDraw sample_constrained_prior(const ModelSpec& model, Rng& rng,
                                         std::size_t max_attempts) {
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    ParameterPoint theta = sample_prior(model, rng);
    if (regularity_indicator(model, theta)) return {std::move(theta), attempt};
  }
  throw RejectionCapError("sample_constrained_prior: no admissible draw for '" + model.name +
                              "' in " + std::to_string(max_attempts) + " attempts",
                          max_attempts, 0);
}

struct ConstrainedRun {
  std::vector<ParameterPoint> accepted;
  std::size_t attempts = 0;
  double acceptance_rate() const {
    return attempts == 0 ? 0.0
                         : static_cast<double>(accepted.size()) / static_cast<double>(attempts);
  }
};

/// Fixed budget of proposals; keeps every admissible one.
template <class Rng>
ConstrainedRun run_constrained_sampler(const ModelSpec& model, Rng& rng, std::size_t attempts) {
  ConstrainedRun run;
  run.attempts = attempts;
  for (std::size_t i = 0; i < attempts; ++i) {
    ParameterPoint theta = sample_prior(model, rng);
    if (regularity_indicator(model, theta)) run.accepted.push_back(std::move(theta));
  }
  return run;
}

}  // namespace coherent
