#pragma once

// Command-line driver. `run` takes the arguments after the program name and
// writes to the given streams so it can be exercised in-process.
//
// Exit codes: 0 success or pass, 1 analytic infeasibility or a failed check,
// 2 malformed input or usage error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "coherent/coherence_maps.hpp"
#include "coherent/constraints.hpp"
#include "coherent/dist_kernels.hpp"
#include "coherent/errors.hpp"
#include "coherent/linalg.hpp"
#include "coherent/model.hpp"
#include "coherent/numeric_verify.hpp"
#include "coherent/spec_io.hpp"

namespace coherent::cli {

inline constexpr std::uint64_t kDefaultSeed = 0x9E3779B97F4A7C15ULL;

enum Exit : int { kOk = 0, kFail = 1, kInputError = 2 };

struct Options {
  std::string format = "human";
  std::uint64_t seed = kDefaultSeed;
  std::string out_path;
  double grid_tol = 1e-6;
  double spectral_tol = 1e-10;
  double ks_alpha = 1e-3;

  bool machine() const { return format == "machine"; }
  VerifyTolerances tolerances() const {
    VerifyTolerances t;
    t.sup_norm = grid_tol;
    t.ks_alpha = ks_alpha;
    return t;
  }
};

/// Input problems detected by the driver itself.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ModelSpec load_spec(const std::string& path) {
  try {
    return parse_spec(read_file(path));
  } catch (const ParseError& e) {
    std::string msg = path + ": " + std::to_string(e.diagnostics().size()) + " error(s)";
    for (const auto& d : e.diagnostics()) msg += "\n  " + format_diagnostic(d);
    throw InputError(msg);
  }
}

inline DistSpec dist_arg(const std::string& text, const std::string& flag) {
  try {
    return parse_dist(text);
  } catch (const ParseError& e) {
    throw InputError(flag + ": " + e.diagnostics().front().message);
  }
}

inline nlohmann::json envelope(std::string_view type) {
  return nlohmann::json{{"schema", kReportSchema}, {"type", type}};
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline nlohmann::json dist_json(const DistSpec& d) {
  nlohmann::json j{{"family", to_string(d.family())}, {"text", format_dist(d)}};
  return j;
}

inline std::pair<int, int> k_range(const std::string& text) {
  const auto colon = text.find(':');
  const auto lo = coherent::detail::parse_number(text.substr(0, colon));
  const auto hi = colon == std::string::npos ? lo : coherent::detail::parse_number(text.substr(colon + 1));
  if (!lo || !hi || *lo != std::floor(*lo) || *hi != std::floor(*hi) || *lo < 2 || *hi < *lo ||
      *hi > 1000) {
    throw InputError("--k-range: expected KMIN:KMAX with 2 <= KMIN <= KMAX");
  }
  return {static_cast<int>(*lo), static_cast<int>(*hi)};
}

inline std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto t = coherent::detail::trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

// Prior of a parameter that does not switch in `m`, or null.
inline const DistSpec* nested_prior(const ModelSpec& m, const std::string& name) {
  return coherent::detail::scalar_prior(m, name);
}

inline const MixturePriorGroup& find_group_or_throw(const ModelSpec& m, const std::string& name) {
  const auto* g = m.find_group(name);
  if (g == nullptr) throw InputError("model '" + m.name + "' has no group '" + name + "'");
  return *g;
}

// Prior mean of a scalar parameter, used to evaluate stationarity at a point.
inline ParameterPoint prior_mean_point(const ModelSpec& m) {
  ParameterPoint p;
  for (const auto& d : m.delta) p.delta[d.name] = mean(d.prior);
  for (const auto& g : m.groups) {
    std::vector<double> v;
    for (const auto& c : g.components()) v.push_back(mean(c));
    p.groups[g.label()] = std::move(v);
  }
  for (const auto& row : m.eta) p.eta.push_back(dirichlet_mean(row));
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

struct ForwardArgs {
  std::vector<std::string> components;
  std::string spec;
  std::string group;
};

inline int cmd_forward(const ForwardArgs& a, const Options& o, std::ostream& out) {
  std::vector<DistSpec> comps;
  std::string label = "components";
  if (!a.spec.empty()) {
    if (a.group.empty()) throw InputError("forward: --spec needs --group");
    const ModelSpec m = detail::load_spec(a.spec);
    const auto& g = detail::find_group_or_throw(m, a.group);
    comps = g.components();
    label = g.label();
  } else {
    for (const auto& c : a.components) comps.push_back(detail::dist_arg(c, "--component"));
  }
  if (comps.size() < 2) throw InputError("forward: need at least two components");
  const DistSpec product = coherent_product(comps);
  if (o.machine()) {
    auto j = detail::envelope("forward");
    j["group"] = label;
    j["K"] = comps.size();
    j["product"] = detail::dist_json(product);
    out << detail::dump(j);
  } else {
    out << "forward map over " << comps.size() << " " << to_string(product.family())
        << " components of '" << label << "'\n"
        << "  product prior  " << format_dist(product) << "\n";
  }
  return kOk;
}

struct ReverseArgs {
  std::string family;
  std::string nested;
  std::optional<double> m1, v1, vprec1, a1, b1;
  int k = 0;
};

inline DistSpec reverse_input(const ReverseArgs& a) {
  if (!a.nested.empty()) return detail::dist_arg(a.nested, "--nested");
  auto need = [&](const std::optional<double>& v, const char* flag) {
    if (!v) throw InputError("reverse --family " + a.family + " needs " + flag);
    return *v;
  };
  try {
    if (a.family == "normal_var") return NormalVar{need(a.m1, "--m1"), need(a.v1, "--v1")};
    if (a.family == "normal_prec") return NormalPrec{need(a.m1, "--m1"), need(a.vprec1, "--vprec1")};
    if (a.family == "gamma") return Gamma{need(a.a1, "--a1"), need(a.b1, "--b1")};
    if (a.family == "invgamma") return InvGamma{need(a.a1, "--a1"), need(a.b1, "--b1")};
  } catch (const DomainError& e) {
    throw InputError(e.what());
  }
  throw InputError("reverse: --family must be normal_var, normal_prec, gamma or invgamma");
}

inline int cmd_reverse(const ReverseArgs& a, const Options& o, std::ostream& out) {
  if (a.k < 2) throw InputError("reverse: --k must be >= 2");
  const DistSpec nested = reverse_input(a);
  const DistSpec component = reverse_equal(nested, a.k);
  if (o.machine()) {
    auto j = detail::envelope("reverse");
    j["K"] = a.k;
    j["nested"] = detail::dist_json(nested);
    j["component"] = detail::dist_json(component);
    out << detail::dump(j);
  } else {
    out << "reverse map, K = " << a.k << "\n"
        << "  nested     " << format_dist(nested) << "\n"
        << "  component  " << format_dist(component) << "  (x" << a.k << ")\n";
  }
  return kOk;
}

struct FamilyArgs {
  std::string nested;
  std::string k_range = "2:2";
  std::string kind = "markov_switching";
  std::string switching;
  double eta_diag = 1.0;
  double eta_off = 1.0;
  std::string ordered;
  std::string out_dir;
};

/// The K-state model obtained by making `switching` parameters of `nested`
/// regime dependent with equal, coherent component priors.
inline ModelSpec build_general(const ModelSpec& nested, int K, ModelKind kind,
                               const std::vector<std::string>& switching,
                               const std::vector<MixturePriorGroup>& groups, double eta_diag,
                               double eta_off, const std::string& ordered) {
  ModelSpec m;
  m.name = nested.name + "_k" + std::to_string(K);
  m.kind = kind;
  m.K = K;
  auto is_switching = [&](const std::string& n) {
    return std::find(switching.begin(), switching.end(), n) != switching.end();
  };
  for (const auto& d : nested.delta) {
    if (!is_switching(d.name)) m.delta.push_back(d);
  }
  for (const auto& g : nested.groups) {
    if (!is_switching(g.label())) m.delta.push_back({g.label(), g.components().front()});
  }
  for (const auto& name : switching) {
    for (const auto& g : groups) {
      if (g.label() == name) m.groups.emplace_back(g.label(), g.components(), g.label() == ordered);
    }
  }
  const auto k = static_cast<std::size_t>(K);
  if (kind == ModelKind::MarkovSwitching) {
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<double> d(k, eta_off);
      d[i] = eta_diag;
      m.eta.emplace_back(Dirichlet{d});
    }
    m.initial_state.kind = InitialStateKind::Ergodic;
  } else {
    m.eta.emplace_back(Dirichlet{std::vector<double>(k, eta_diag)});
  }
  m.regularity = nested.regularity;
  if (m.regularity.kind != RegularityKind::None &&
      (is_switching(m.regularity.phi1) || is_switching(m.regularity.phi2))) {
    if (kind != ModelKind::MarkovSwitching) {
      throw InputError("family: switching autoregressive coefficients need --kind markov_switching");
    }
    m.regularity.kind = RegularityKind::Msar2Stationarity;
  }
  return m;
}

inline int cmd_family(const FamilyArgs& a, const Options& o, std::ostream& out, std::ostream& err) {
  const ModelSpec nested = detail::load_spec(a.nested);
  if (nested.kind != ModelKind::Single) throw InputError("family: --nested must be a single model");
  ModelKind kind;
  if (a.kind == "markov_switching") kind = ModelKind::MarkovSwitching;
  else if (a.kind == "mixture") kind = ModelKind::Mixture;
  else throw InputError("family: --kind must be mixture or markov_switching");
  if (!(a.eta_diag > 0.0) || !(a.eta_off > 0.0)) throw InputError("family: eta hyperparameters must be > 0");

  std::vector<std::string> switching = detail::split_names(a.switching);
  if (switching.empty()) {
    for (const auto& g : nested.groups) switching.push_back(g.label());
  }
  std::vector<LabeledPrior> priors;
  for (const auto& name : switching) {
    const DistSpec* p = detail::nested_prior(nested, name);
    if (p == nullptr) throw InputError("family: '" + name + "' is not a parameter of '" + nested.name + "'");
    priors.push_back({name, *p});
  }
  if (!a.ordered.empty() &&
      std::find(switching.begin(), switching.end(), a.ordered) == switching.end()) {
    throw InputError("family: --ordered must name a switching parameter");
  }
  const auto [kmin, kmax] = detail::k_range(a.k_range);
  std::set<int> Ks;
  for (int k = kmin; k <= kmax; ++k) Ks.insert(k);

  std::map<int, std::vector<MixturePriorGroup>> family;
  try {
    family = coherent_family(priors, Ks);
  } catch (const FamilyInfeasibleError& e) {
    if (o.machine()) {
      auto j = detail::envelope("family");
      j["feasible"] = false;
      nlohmann::json issues = nlohmann::json::array();
      for (const auto& i : e.issues()) {
        issues.push_back({{"K", i.K}, {"parameter", i.label}, {"value", i.value},
                          {"bound", i.bound}, {"message", i.message}});
      }
      j["issues"] = issues;
      out << detail::dump(j);
    }
    err << e.what() << "\n";
    return kFail;
  }

  auto j = detail::envelope("family");
  j["feasible"] = true;
  j["models"] = nlohmann::json::array();
  std::ostringstream human;
  for (const auto& [k, groups] : family) {
    const ModelSpec general =
        build_general(nested, k, kind, switching, groups, a.eta_diag, a.eta_off, a.ordered);
    if (auto diags = validate_model(general); !diags.empty()) {
      throw InputError("family: generated model is invalid: " + format_diagnostic(diags.front()));
    }
    const std::string doc = emit_spec(general);
    nlohmann::json entry{{"K", k}, {"name", general.name}};
    if (!a.out_dir.empty()) {
      std::filesystem::create_directories(a.out_dir);
      const auto path = (std::filesystem::path(a.out_dir) / (general.name + ".spec")).string();
      std::ofstream f(path, std::ios::binary);
      if (!(f << doc)) throw InputError("cannot write '" + path + "'");
      entry["path"] = path;
      human << "K = " << k << "  wrote " << path << "\n";
    } else {
      entry["document"] = doc;
      human << "# K = " << k << "\n" << doc << "\n";
    }
    j["models"].push_back(entry);
  }
  out << (o.machine() ? detail::dump(j) : human.str());
  return kOk;
}

struct VerifyArgs {
  std::string method = "grid";
  std::string spec;
  std::string group;
  std::string claimed;
  std::string nested;
  std::vector<std::string> components;
  bool ordered = false;
  std::optional<double> epsilon;
  std::size_t draws = 1'000'000;
  std::size_t grid_n = 4001;
};

inline int cmd_verify(const VerifyArgs& a, const Options& o, std::ostream& out) {
  std::optional<MixturePriorGroup> group;
  if (!a.spec.empty()) {
    if (a.group.empty()) throw InputError("verify: --spec needs --group");
    const ModelSpec m = detail::load_spec(a.spec);
    group = detail::find_group_or_throw(m, a.group);
  } else {
    std::vector<DistSpec> comps;
    for (const auto& c : a.components) comps.push_back(detail::dist_arg(c, "--component"));
    if (comps.empty()) throw InputError("verify: give --spec/--group or --component");
    try {
      group.emplace(a.group.empty() ? "components" : a.group, std::move(comps), a.ordered);
    } catch (const DomainError& e) {
      throw InputError(e.what());
    }
  }
  if (group->K() < 2) throw InputError("verify: group needs K >= 2");

  DistSpec claimed = coherent_product(*group);
  if (!a.claimed.empty()) {
    claimed = detail::dist_arg(a.claimed, "--claimed");
  } else if (!a.nested.empty()) {
    const ModelSpec nested = detail::load_spec(a.nested);
    const DistSpec* p = detail::nested_prior(nested, group->label());
    if (p == nullptr) throw InputError("verify: '" + nested.name + "' has no scalar prior '" + group->label() + "'");
    claimed = *p;
  }
  if (claimed.family() != group->family() &&
      !(coherent::detail::is_normal(claimed.family()) && coherent::detail::is_normal(group->family()))) {
    throw InputError("verify: claimed prior is " + std::string(to_string(claimed.family())) +
                     ", group is " + std::string(to_string(group->family())));
  }
  claimed = coherent::detail::to_family(claimed, group->family());

  const bool grid = a.method == "grid" || a.method == "both";
  const bool mc = a.method == "mc" || a.method == "both";
  if (!grid && !mc) throw InputError("verify: --method must be grid, mc or both");
  if (a.grid_n < 1001) throw InputError("verify: --grid-n must be >= 1001");
  if (a.draws < 100000) throw InputError("verify: --draws must be >= 100000");

  std::vector<CoherenceReport> reports;
  if (grid) {
    try {
      reports.push_back(verify_product_coherence(group->components(), claimed,
                                                 default_grid(claimed, a.grid_n), o.tolerances()));
    } catch (const CoverageError& e) {
      CoherenceReport r;
      r.method = VerifyMethod::Grid;
      r.tolerances = o.tolerances();
      r.coverage = e.coverage();
      r.sup_norm_error = std::numeric_limits<double>::infinity();
      r.pass = false;
      reports.push_back(r);
    }
  }
  if (mc) {
    const double eps = a.epsilon.value_or(group->K() == 2 ? 0.02 : 0.05);
    std::mt19937_64 rng(o.seed);
    reports.push_back(mc_conditional_check(*group, claimed, eps, a.draws, rng, o.tolerances()));
  }
  bool pass = true;
  for (const auto& r : reports) pass = pass && r.pass;
  const auto fmt = o.machine() ? ReportFormat::Machine : ReportFormat::Human;
  if (reports.size() == 1) {
    out << emit_report(reports.front(), fmt);
  } else if (o.machine()) {
    auto j = detail::envelope("verify");
    j["reports"] = nlohmann::json::array();
    for (const auto& r : reports) j["reports"].push_back(to_json(r));
    j["pass"] = pass;
    out << detail::dump(j);
  } else {
    for (const auto& r : reports) out << emit_report(r, fmt);
  }
  return pass ? kOk : kFail;
}

struct CheckPlanArgs {
  std::string nested;
  std::string general;
  double tol = 1e-12;
};

inline int cmd_check_plan(const CheckPlanArgs& a, const Options& o, std::ostream& out) {
  const ModelSpec nested = detail::load_spec(a.nested);
  const ModelSpec general = detail::load_spec(a.general);
  PlanReport report;
  try {
    report = check_plan(make_plan(nested, general), a.tol);
  } catch (const ConfigError& e) {
    throw InputError(e.what());
  }
  out << emit_report(report, o.machine() ? ReportFormat::Machine : ReportFormat::Human);
  return report.pass ? kOk : kFail;
}

struct StationarityArgs {
  std::string spec;
  std::string transition;
  std::vector<std::string> phi;
};

inline int cmd_stationarity(const StationarityArgs& a, const Options& o, std::ostream& out) {
  std::optional<StationarityProblem> problem;
  std::string source;
  try {
    if (!a.spec.empty()) {
      const ModelSpec m = detail::load_spec(a.spec);
      if (m.regularity.kind == RegularityKind::None) {
        throw InputError("stationarity: '" + m.name + "' has no autoregressive constraint");
      }
      const ParameterPoint at = detail::prior_mean_point(m);
      if (m.kind == ModelKind::MarkovSwitching) {
        problem = stationarity_problem_at(m, at);
      } else {
        const double p1 = coherent::detail::resolve_coefficient(m, at, m.regularity.phi1, 1).front();
        const double p2 = coherent::detail::resolve_coefficient(m, at, m.regularity.phi2, 1).front();
        problem.emplace(Matrix::identity(1), std::vector<CompanionMatrix>{{p1, p2}});
      }
      source = m.name + " at prior means";
    } else {
      nlohmann::json rows;
      try {
        rows = nlohmann::json::parse(a.transition.empty() ? "[[1]]" : a.transition);
      } catch (const nlohmann::json::exception&) {
        throw InputError("--transition: expected a JSON matrix like [[0.9,0.1],[0.2,0.8]]");
      }
      if (!rows.is_array() || rows.empty()) throw InputError("--transition: empty matrix");
      const std::size_t k = rows.size();
      Matrix P(k, k);
      for (std::size_t i = 0; i < k; ++i) {
        if (!rows[i].is_array() || rows[i].size() != k) throw InputError("--transition: matrix must be square");
        for (std::size_t j = 0; j < k; ++j) {
          if (!rows[i][j].is_number()) throw InputError("--transition: entries must be numbers");
          P(i, j) = rows[i][j].get<double>();
        }
      }
      std::vector<CompanionMatrix> regimes;
      for (const auto& text : a.phi) {
        const auto v = coherent::detail::parse_vector("[" + text + "]");
        if (!v || v->size() != 2) throw InputError("--phi: expected PHI1,PHI2");
        regimes.push_back({(*v)[0], (*v)[1]});
      }
      if (regimes.size() == 1 && k > 1) regimes.resize(k, regimes.front());
      if (regimes.size() != k) throw InputError("--phi: give one pair per regime or a single shared pair");
      problem.emplace(std::move(P), std::move(regimes));
      source = "command line";
    }
  } catch (const DomainError& e) {
    throw InputError(e.what());
  } catch (const ConfigError& e) {
    throw InputError(e.what());
  }

  const Matrix P2 = build_P2(*problem);
  const SpectralRadius sr = spectral_radius_detailed(P2, o.spectral_tol);
  const StationarityVerdict v = classify_radius(sr.value, o.spectral_tol);
  std::optional<double> collapsed;
  const auto& regimes = problem->regimes();
  if (std::all_of(regimes.begin(), regimes.end(), [&](const CompanionMatrix& c) {
        return c.phi1 == regimes.front().phi1 && c.phi2 == regimes.front().phi2;
      })) {
    const double r = spectral_radius(regimes.front().matrix(), o.spectral_tol);
    collapsed = r * r;
  }
  const std::string verdict =
      v.boundary_indeterminate ? "indeterminate" : (v.stationary ? "stationary" : "nonstationary");
  if (o.machine()) {
    auto j = detail::envelope("stationarity");
    j["source"] = source;
    j["K"] = regimes.size();
    j["rho"] = coherent::detail::number_json(sr.value);
    j["bracket"] = {coherent::detail::number_json(sr.lower), coherent::detail::number_json(sr.upper)};
    j["method"] = sr.method == SpectralMethod::Gelfand ? "gelfand" : "qr";
    j["spectral_tol"] = o.spectral_tol;
    j["verdict"] = verdict;
    if (collapsed) j["rho_phi_squared"] = *collapsed;
    out << detail::dump(j);
  } else {
    out << verdict << "  rho(P2) = " << format_number(sr.value) << "  (" << source << ", K = "
        << regimes.size() << ")\n";
    if (collapsed) out << "  shared Phi: rho(Phi)^2 = " << format_number(*collapsed) << "\n";
  }
  return v.stationary ? kOk : kFail;
}

struct SampleArgs {
  std::string spec;
  std::size_t draws = 1000;
  std::size_t max_attempts = 1'000'000;
};

inline int cmd_sample(const SampleArgs& a, const Options& o, std::ostream& out) {
  const ModelSpec m = detail::load_spec(a.spec);
  if (a.draws == 0) throw InputError("sample: --draws must be >= 1");
  std::mt19937_64 rng(o.seed);
  std::size_t attempts = 0;
  std::map<std::string, std::vector<double>> sums;
  for (std::size_t n = 0; n < a.draws; ++n) {
    ConstrainedDraw d;
    try {
      d = sample_constrained_prior(m, rng, a.max_attempts);
    } catch (const RejectionCapError& e) {
      const std::string msg = "sample: no admissible draw within --max-attempts " +
                              std::to_string(a.max_attempts) + " after " + std::to_string(n) +
                              " accepted draws";
      throw RejectionCapError(msg, e.attempts(), n);
    }
    attempts += d.attempts;
    for (const auto& [k, v] : d.point.delta) {
      auto& s = sums[k];
      s.resize(1);
      s[0] += v;
    }
    for (const auto& [k, v] : d.point.groups) {
      auto& s = sums[k];
      s.resize(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) s[i] += v[i];
    }
  }
  for (auto& [k, s] : sums) {
    for (double& x : s) x /= static_cast<double>(a.draws);
  }
  const double rate = static_cast<double>(a.draws) / static_cast<double>(attempts);
  if (o.machine()) {
    auto j = detail::envelope("sample");
    j["model"] = m.name;
    j["draws"] = a.draws;
    j["attempts"] = attempts;
    j["acceptance_rate"] = rate;
    j["seed"] = o.seed;
    j["means"] = sums;
    out << detail::dump(j);
  } else {
    out << a.draws << " constrained draws from '" << m.name << "' in " << attempts
        << " proposals (acceptance " << format_number(rate) << ")\n";
    for (const auto& [k, s] : sums) out << "  mean " << k << "  " << format_vector(s) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coherent priors for nested mixture and Markov-switching models", "coherent"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "0.1.0");

  Options o;
  app.add_option("--format", o.format, "Output format")
      ->check(CLI::IsMember({"human", "machine"}))
      ->capture_default_str();
  app.add_option("--seed", o.seed, "Seed for stochastic subcommands (default 0x9E3779B97F4A7C15)");
  app.add_option("--out", o.out_path, "Write the report to this file instead of stdout");
  app.add_option("--grid-tol", o.grid_tol, "Sup-norm tolerance of the grid check")->capture_default_str();
  app.add_option("--spectral-tol", o.spectral_tol, "Spectral radius tolerance")->capture_default_str();
  app.add_option("--ks-alpha", o.ks_alpha, "KS significance level")->capture_default_str();

  ForwardArgs fwd;
  auto* forward = app.add_subcommand("forward", "Apply the forward map to a group of component priors");
  forward->add_option("--component", fwd.components, "Component prior, e.g. 'gamma(a_breve=2, b_breve=1)'");
  forward->add_option("--spec", fwd.spec, "Model document holding the group");
  forward->add_option("--group", fwd.group, "Group name inside --spec");

  ReverseArgs rev;
  auto* reverse = app.add_subcommand("reverse", "Equal component priors whose product is a nested prior");
  reverse->add_option("--family", rev.family, "normal_var, normal_prec, gamma or invgamma");
  reverse->add_option("--nested", rev.nested, "Nested prior literal instead of --family and values");
  reverse->add_option("--m1", rev.m1, "Nested normal mean");
  reverse->add_option("--v1", rev.v1, "Nested normal variance");
  reverse->add_option("--vprec1", rev.vprec1, "Nested normal precision");
  reverse->add_option("--a1", rev.a1, "Nested shape");
  reverse->add_option("--b1", rev.b1, "Nested gamma rate or inverse gamma scale");
  reverse->add_option("--k", rev.k, "Number of components")->required();

  FamilyArgs fam;
  auto* family = app.add_subcommand("family", "Build coherent K-state models from a nested model");
  family->add_option("--nested", fam.nested, "Nested single-component model document")->required();
  family->add_option("--k-range", fam.k_range, "KMIN:KMAX")->capture_default_str();
  family->add_option("--kind", fam.kind, "mixture or markov_switching")->capture_default_str();
  family->add_option("--switch", fam.switching, "Comma separated switching parameters (default: all groups)");
  family->add_option("--eta-diag", fam.eta_diag, "Dirichlet hyperparameter on the diagonal")->capture_default_str();
  family->add_option("--eta-off", fam.eta_off, "Dirichlet hyperparameter off the diagonal")->capture_default_str();
  family->add_option("--ordered", fam.ordered, "Switching parameter carrying the ordering constraint");
  family->add_option("--out-dir", fam.out_dir, "Write one document per K into this directory");

  VerifyArgs ver;
  auto* verify = app.add_subcommand("verify", "Numerically verify a coherence claim");
  verify->add_option("--method", ver.method, "grid, mc or both")->capture_default_str();
  verify->add_option("--spec", ver.spec, "Model document holding the group");
  verify->add_option("--group", ver.group, "Group name");
  verify->add_option("--component", ver.components, "Component prior literal (repeatable)");
  verify->add_flag("--ordered", ver.ordered, "Impose the ordering constraint on --component draws");
  verify->add_option("--claimed", ver.claimed, "Claimed nested prior literal (default: forward map)");
  verify->add_option("--nested", ver.nested, "Nested model document supplying the claimed prior");
  verify->add_option("--epsilon", ver.epsilon, "Band half-width (default 0.02 for K=2, 0.05 otherwise)");
  verify->add_option("--draws", ver.draws, "Monte Carlo draws")->capture_default_str();
  verify->add_option("--grid-n", ver.grid_n, "Grid nodes")->capture_default_str();

  CheckPlanArgs plan;
  auto* check = app.add_subcommand("check-plan", "Check coherence between a nested and a general model");
  check->add_option("--nested", plan.nested, "Nested model document")->required();
  check->add_option("--general", plan.general, "General model document")->required();
  check->add_option("--tol", plan.tol, "Forward-map tolerance")->capture_default_str();

  StationarityArgs st;
  auto* stat = app.add_subcommand("stationarity", "Spectral radius of P2 and the stationarity verdict");
  stat->add_option("--spec", st.spec, "Model document, evaluated at the prior means");
  stat->add_option("--transition", st.transition, "Transition matrix as JSON, e.g. [[0.9,0.1],[0.2,0.8]]");
  stat->add_option("--phi", st.phi, "PHI1,PHI2 per regime, or one shared pair");

  SampleArgs sm;
  auto* sample_cmd = app.add_subcommand("sample", "Draw from the constrained prior");
  sample_cmd->add_option("--spec", sm.spec, "Model document")->required();
  sample_cmd->add_option("--draws", sm.draws, "Accepted draws to collect")->capture_default_str();
  sample_cmd->add_option("--max-attempts", sm.max_attempts, "Proposal cap per accepted draw")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kInputError;
  }

  std::ostringstream buffer;
  int code = kOk;
  try {
    if (forward->parsed()) code = cmd_forward(fwd, o, buffer);
    else if (reverse->parsed()) code = cmd_reverse(rev, o, buffer);
    else if (family->parsed()) code = cmd_family(fam, o, buffer, err);
    else if (verify->parsed()) code = cmd_verify(ver, o, buffer);
    else if (check->parsed()) code = cmd_check_plan(plan, o, buffer);
    else if (stat->parsed()) code = cmd_stationarity(st, o, buffer);
    else if (sample_cmd->parsed()) code = cmd_sample(sm, o, buffer);
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kFail;
  } catch (const RejectionCapError& e) {
    err << "error: " << e.what() << "\n";
    return kFail;
  } catch (const RetentionError& e) {
    err << "error: " << e.what() << "\n";
    return kFail;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::logic_error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFail;
  }

  if (o.out_path.empty()) {
    out << buffer.str();
  } else {
    std::ofstream f(o.out_path, std::ios::binary);
    if (!(f << buffer.str())) {
      err << "error: cannot write '" << o.out_path << "'\n";
      return kInputError;
    }
  }
  return code;
}

}  // namespace coherent::cli
