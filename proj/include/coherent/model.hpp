#pragma once

// Prior structure of a single-component, mixture, or Markov-switching model.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coherent/coherence_maps.hpp"
#include "coherent/dist_kernels.hpp"
#include "coherent/errors.hpp"

namespace coherent {

enum class ModelKind { Single, Mixture, MarkovSwitching };

enum class RegularityKind { None, Ar2Stationarity, Msar2Stationarity };

enum class InitialStateKind { Uniform, Ergodic, Explicit };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Single: return "single";
    case ModelKind::Mixture: return "mixture";
    case ModelKind::MarkovSwitching: return "markov_switching";
  }
  return "unknown";
}

inline std::string_view to_string(RegularityKind k) {
  switch (k) {
    case RegularityKind::None: return "none";
    case RegularityKind::Ar2Stationarity: return "ar2_stationarity";
    case RegularityKind::Msar2Stationarity: return "msar2_stationarity";
  }
  return "unknown";
}

inline std::string_view to_string(InitialStateKind k) {
  switch (k) {
    case InitialStateKind::Uniform: return "uniform";
    case InitialStateKind::Ergodic: return "ergodic";
    case InitialStateKind::Explicit: return "explicit";
  }
  return "unknown";
}

struct InitialState {
  InitialStateKind kind = InitialStateKind::Uniform;
  std::vector<double> probs;  // only for Explicit
  bool operator==(const InitialState&) const = default;
};

/// Which parameters hold the two autoregressive coefficients, and the
/// admissible region of the regularity function (always [0, 1) here).
struct RegularityConstraint {
  RegularityKind kind = RegularityKind::None;
  std::string phi1;
  std::string phi2;
  bool operator==(const RegularityConstraint&) const = default;
};

struct NamedPrior {
  std::string name;
  DistSpec prior;
  bool operator==(const NamedPrior&) const = default;
};

/// Validated prior structure. Parameters that do not switch, including the
/// non-switching ones of an intermediate model, live in `delta`.
struct ModelSpec {
  std::string name;
  ModelKind kind = ModelKind::Single;
  int K = 1;
  std::vector<NamedPrior> delta;
  std::vector<MixturePriorGroup> groups;
  std::vector<DistSpec> eta;  // Dirichlet rows; empty when absent
  InitialState initial_state;
  RegularityConstraint regularity;

  const NamedPrior* find_delta(std::string_view n) const {
    for (const auto& d : delta)
      if (d.name == n) return &d;
    return nullptr;
  }
  const MixturePriorGroup* find_group(std::string_view n) const {
    for (const auto& g : groups)
      if (g.label() == n) return &g;
    return nullptr;
  }
  bool has_parameter(std::string_view n) const {
    return find_delta(n) != nullptr || find_group(n) != nullptr;
  }

  bool operator==(const ModelSpec&) const = default;
};

/// Every violated ModelSpec invariant, each tagged with a field path.
inline std::vector<Diagnostic> validate_model(const ModelSpec& m) {
  std::vector<Diagnostic> out;
  auto add = [&](std::string path, std::string msg) {
    out.push_back({0, std::move(path), std::move(msg)});
  };
  if (m.name.empty()) add("model.name", "missing model name");
  if (m.K < 1) add("model.K", "K must be >= 1");
  if (m.kind == ModelKind::Single) {
    if (m.K != 1) add("model.K", "single model must have K = 1");
    if (!m.eta.empty()) add("eta", "single model cannot carry transition/weight priors");
  } else if (m.K < 2) {
    add("model.K", "mixture and markov_switching models need K >= 2");
  }
  if (m.kind == ModelKind::MarkovSwitching && m.K >= 2) {
    if (m.eta.size() != static_cast<std::size_t>(m.K)) {
      add("eta", "markov_switching model needs exactly K = " + std::to_string(m.K) +
                     " Dirichlet rows, got " + std::to_string(m.eta.size()));
    }
  }
  if (m.kind == ModelKind::Mixture && m.K >= 2 && m.eta.size() != 1) {
    add("eta", "mixture model needs exactly one Dirichlet row of mixture weights, got " +
                   std::to_string(m.eta.size()));
  }
  for (std::size_t i = 0; i < m.eta.size(); ++i) {
    const auto path = "eta.row[" + std::to_string(i) + "]";
    if (m.eta[i].family() != Family::Dirichlet) {
      add(path, "must be a dirichlet prior");
    } else if (m.eta[i].as<Dirichlet>().d.size() != static_cast<std::size_t>(m.K)) {
      add(path, "dimension " + std::to_string(m.eta[i].as<Dirichlet>().d.size()) +
                    " does not match K = " + std::to_string(m.K));
    }
  }

  std::map<std::string, int> seen;
  for (const auto& d : m.delta) {
    if (++seen[d.name] > 1) add("delta." + d.name, "duplicate parameter name");
    if (d.prior.family() == Family::Dirichlet) {
      add("delta." + d.name, "dirichlet priors belong in the eta section");
    }
  }
  int ordered = 0;
  for (const auto& g : m.groups) {
    const auto path = "group." + g.label();
    if (++seen[g.label()] > 1) add(path, "duplicate parameter name");
    if (g.K() != m.K) {
      add(path, "has " + std::to_string(g.K()) + " components but the model has K = " +
                    std::to_string(m.K));
    }
    if (g.family() == Family::Dirichlet) add(path, "dirichlet priors belong in the eta section");
    if (g.ordered()) ++ordered;
  }
  if (ordered > 1) add("group", "at most one group may carry the ordering constraint");

  if (m.initial_state.kind == InitialStateKind::Explicit) {
    double total = 0.0;
    for (double p : m.initial_state.probs) {
      if (!(p >= 0.0)) add("model.initial_probs", "probabilities must be >= 0");
      total += p;
    }
    if (m.initial_state.probs.size() != static_cast<std::size_t>(m.K)) {
      add("model.initial_probs", "needs K = " + std::to_string(m.K) + " entries");
    } else if (std::fabs(total - 1.0) > 1e-12) {
      add("model.initial_probs", "must sum to 1");
    }
  }

  const auto& r = m.regularity;
  if (r.kind != RegularityKind::None) {
    for (const auto* field : {&r.phi1, &r.phi2}) {
      const std::string path = field == &r.phi1 ? "constraint.phi1" : "constraint.phi2";
      if (field->empty()) {
        add(path, "missing autoregressive parameter name");
      } else if (!m.has_parameter(*field)) {
        add(path, "unknown parameter '" + *field + "'");
      }
    }
    if (r.kind == RegularityKind::Msar2Stationarity && m.kind != ModelKind::MarkovSwitching) {
      add("constraint.regularity", "msar2_stationarity needs a markov_switching model");
    }
    if (r.kind == RegularityKind::Ar2Stationarity) {
      for (const auto* field : {&r.phi1, &r.phi2}) {
        const auto* g = m.find_group(*field);
        if (g != nullptr && g->K() > 1) {
          add("constraint.regularity",
              "ar2_stationarity needs non-switching coefficients, '" + *field + "' switches");
        }
      }
    }
  }
  return out;
}

/// A point in the parameter space of a ModelSpec.
struct ParameterPoint {
  std::map<std::string, double> delta;
  std::map<std::string, std::vector<double>> groups;
  std::vector<std::vector<double>> eta;  // transition rows or mixture weights

  bool operator==(const ParameterPoint&) const = default;
};

}  // namespace coherent
