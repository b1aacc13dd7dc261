#pragma once

// Text format for model prior specifications, coherence plans between two
// specifications, and report serialization. The document grammar is given in
// docs/spec_format.md.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"

#include "coherent/coherence_maps.hpp"
#include "coherent/dist_kernels.hpp"
#include "coherent/errors.hpp"
#include "coherent/model.hpp"
#include "coherent/numeric_verify.hpp"

namespace coherent {

// ---------------------------------------------------------------------------
// Numbers and distribution literals

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double x) { return number_text(x); }

inline std::string format_vector(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ", ";
    out += format_number(v[i]);
  }
  return out + "]";
}

inline std::string format_dist(const DistSpec& d) {
  switch (d.family()) {
    case Family::NormalVar: {
      const auto& p = d.as<NormalVar>();
      return "normal_var(m=" + format_number(p.m) + ", v=" + format_number(p.v) + ")";
    }
    case Family::NormalPrec: {
      const auto& p = d.as<NormalPrec>();
      return "normal_prec(m=" + format_number(p.m) + ", vprec=" + format_number(p.vprec) + ")";
    }
    case Family::Gamma: {
      const auto& p = d.as<Gamma>();
      return "gamma(a_breve=" + format_number(p.a_shape) +
             ", b_breve=" + format_number(p.b_rate) + ")";
    }
    case Family::InvGamma: {
      const auto& p = d.as<InvGamma>();
      return "invgamma(a=" + format_number(p.a_shape) + ", b=" + format_number(p.b_scale) + ")";
    }
    case Family::Dirichlet:
      return "dirichlet(d=" + format_vector(d.as<Dirichlet>().d) + ")";
  }
  return "?";
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool done() {
    skip_ws();
    return pos_ >= s_.size();
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  std::string ident() {
    skip_ws();
    const std::size_t b = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
      ++pos_;
    }
    return std::string(s_.substr(b, pos_ - b));
  }
  std::optional<double> number() {
    skip_ws();
    std::size_t p = pos_;
    if (p < s_.size() && s_[p] == '+') ++p;
    double v = 0.0;
    const auto res = std::from_chars(s_.data() + p, s_.data() + s_.size(), v);
    if (res.ec != std::errc()) return std::nullopt;
    pos_ = static_cast<std::size_t>(res.ptr - s_.data());
    return v;
  }
  std::string_view rest() const { return s_.substr(std::min(pos_, s_.size())); }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

inline std::optional<double> parse_number(std::string_view text) {
  Cursor c(trim(text));
  auto v = c.number();
  if (!v || !c.done()) return std::nullopt;
  return v;
}

inline std::optional<std::vector<double>> parse_vector(Cursor& c) {
  if (!c.eat('[')) return std::nullopt;
  std::vector<double> out;
  if (c.eat(']')) return out;
  do {
    auto v = c.number();
    if (!v) return std::nullopt;
    out.push_back(*v);
  } while (c.eat(','));
  if (!c.eat(']')) return std::nullopt;
  return out;
}

inline std::optional<std::vector<double>> parse_vector(std::string_view text) {
  Cursor c(trim(text));
  auto v = parse_vector(c);
  if (!v || !c.done()) return std::nullopt;
  return v;
}

[[noreturn]] inline void fail_dist(std::string message) {
  throw ParseError({Diagnostic{0, "", std::move(message)}});
}

}  // namespace detail

/// Parse a literal such as `gamma(a_breve=2, b_breve=0.5)`.
inline DistSpec parse_dist(std::string_view text) {
  detail::Cursor c(detail::trim(text));
  const std::string family = c.ident();
  if (family.empty()) detail::fail_dist("expected a distribution family");
  static const std::map<std::string, std::vector<std::string>> kParams = {
      {"normal_var", {"m", "v"}},
      {"normal_prec", {"m", "vprec"}},
      {"gamma", {"a_breve", "b_breve"}},
      {"invgamma", {"a", "b"}},
      {"dirichlet", {"d"}},
  };
  const auto spec = kParams.find(family);
  if (spec == kParams.end()) detail::fail_dist("unknown family tag '" + family + "'");
  if (!c.eat('(')) detail::fail_dist(family + ": expected '('");

  std::map<std::string, double> scalars;
  std::optional<std::vector<double>> vec;
  if (!c.eat(')')) {
    do {
      const std::string key = c.ident();
      if (key.empty() || !c.eat('=')) detail::fail_dist(family + ": expected name=value");
      if (std::find(spec->second.begin(), spec->second.end(), key) == spec->second.end()) {
        detail::fail_dist(family + ": unknown hyperparameter '" + key + "'");
      }
      if (scalars.count(key) > 0 || (key == "d" && vec)) {
        detail::fail_dist(family + ": hyperparameter '" + key + "' given twice");
      }
      if (family == "dirichlet") {
        vec = detail::parse_vector(c);
        if (!vec) detail::fail_dist("dirichlet: d must be a list like [1, 1]");
      } else {
        const auto v = c.number();
        if (!v) detail::fail_dist(family + ": '" + key + "' is not a number");
        scalars[key] = *v;
      }
    } while (c.eat(','));
    if (!c.eat(')')) detail::fail_dist(family + ": expected ')'");
  }
  if (!c.done()) detail::fail_dist(family + ": trailing text '" + std::string(c.rest()) + "'");
  for (const auto& name : spec->second) {
    if (name == "d" ? !vec : scalars.count(name) == 0) {
      detail::fail_dist(family + ": missing hyperparameter '" + name + "'");
    }
  }
  try {
    if (family == "normal_var") return NormalVar{scalars["m"], scalars["v"]};
    if (family == "normal_prec") return NormalPrec{scalars["m"], scalars["vprec"]};
    if (family == "gamma") return Gamma{scalars["a_breve"], scalars["b_breve"]};
    if (family == "invgamma") return InvGamma{scalars["a"], scalars["b"]};
    return Dirichlet{*vec};
  } catch (const DomainError& e) {
    detail::fail_dist(e.what());
  }
}

// ---------------------------------------------------------------------------
// Model documents

namespace detail {

struct RawEntry {
  int line = 0;
  std::string key;
  std::string value;
};

struct RawSection {
  int line = 0;
  std::string name;
  std::vector<RawEntry> entries;
};

inline bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char ch : s) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')) return false;
  }
  return true;
}

class DocumentParser {
 public:
  explicit DocumentParser(std::string_view text) { lex(text); }

  ModelSpec build() {
    ModelSpec m;
    const RawSection* model = nullptr;
    const RawSection* constraint = nullptr;
    for (const auto& sec : sections_) {
      if (sec.name == "model") {
        if (model) add(sec.line, "model", "duplicate [model] section");
        model = &sec;
      } else if (sec.name == "constraint") {
        if (constraint) add(sec.line, "constraint", "duplicate [constraint] section");
        constraint = &sec;
      } else if (sec.name == "delta") {
        read_delta(sec, m);
      } else if (sec.name.rfind("group.", 0) == 0) {
        read_group(sec, m);
      } else if (sec.name == "eta") {
        read_eta(sec, m);
      } else {
        add(sec.line, sec.name, "unknown section [" + sec.name + "]");
      }
    }
    if (model) {
      read_model(*model, m);
    } else {
      add(0, "model", "missing [model] section");
      add(0, "model.name", "missing required field");
      add(0, "model.kind", "missing required field");
      add(0, "model.K", "missing required field");
    }
    if (constraint) read_constraint(*constraint, m);

    if (diags_.empty()) {
      for (auto d : validate_model(m)) {
        d.line = line_of(d.path);
        diags_.push_back(std::move(d));
      }
    }
    if (!diags_.empty()) throw ParseError(std::move(diags_));
    return m;
  }

 private:
  void add(int line, std::string path, std::string msg) {
    diags_.push_back({line, std::move(path), std::move(msg)});
  }

  int line_of(const std::string& path) const {
    for (std::string p = path; !p.empty();) {
      if (auto it = lines_.find(p); it != lines_.end()) return it->second;
      const auto cut = p.find_last_of(".[");
      if (cut == std::string::npos) break;
      p = p.substr(0, cut);
    }
    return 0;
  }

  void lex(std::string_view text) {
    int lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto end = text.find('\n', start);
      std::string_view raw =
          text.substr(start, end == std::string_view::npos ? text.size() - start : end - start);
      ++lineno;
      if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
      const auto line = trim(raw);
      if (!line.empty()) lex_line(lineno, line);
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
  }

  void lex_line(int lineno, std::string_view line) {
    if (line.front() == '[') {
      if (line.back() != ']') {
        add(lineno, "", "malformed section header");
        return;
      }
      std::string name(trim(line.substr(1, line.size() - 2)));
      sections_.push_back({lineno, name, {}});
      lines_.emplace(name, lineno);
      return;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      add(lineno, "", "expected 'key = value'");
      return;
    }
    if (sections_.empty()) {
      add(lineno, "", "entry outside of any section");
      return;
    }
    RawEntry e{lineno, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1)))};
    if (e.key.empty()) {
      add(lineno, sections_.back().name, "empty key");
      return;
    }
    sections_.back().entries.push_back(std::move(e));
  }

  std::optional<DistSpec> dist_at(const RawEntry& e, const std::string& path) {
    try {
      return parse_dist(e.value);
    } catch (const ParseError& err) {
      for (const auto& d : err.diagnostics()) add(e.line, path, d.message);
    }
    return std::nullopt;
  }

  std::optional<bool> bool_at(const RawEntry& e, const std::string& path) {
    if (e.value == "true") return true;
    if (e.value == "false") return false;
    add(e.line, path, "expected true or false, got '" + e.value + "'");
    return std::nullopt;
  }

  void read_model(const RawSection& sec, ModelSpec& m) {
    std::map<std::string, const RawEntry*> fields;
    for (const auto& e : sec.entries) {
      const std::string path = "model." + e.key;
      if (!fields.emplace(e.key, &e).second) {
        add(e.line, path, "duplicate field");
        continue;
      }
      lines_.emplace(path, e.line);
      if (e.key == "name") {
        if (!valid_name(e.value)) add(e.line, path, "name must be [A-Za-z0-9_]+");
        m.name = e.value;
      } else if (e.key == "kind") {
        if (e.value == "single") m.kind = ModelKind::Single;
        else if (e.value == "mixture") m.kind = ModelKind::Mixture;
        else if (e.value == "markov_switching") m.kind = ModelKind::MarkovSwitching;
        else add(e.line, path, "unknown model kind '" + e.value + "'");
      } else if (e.key == "K") {
        const auto v = parse_number(e.value);
        if (!v || *v != std::floor(*v) || *v < 1 || *v > 10000) {
          add(e.line, path, "K must be an integer >= 1");
        } else {
          m.K = static_cast<int>(*v);
        }
      } else if (e.key == "initial_state") {
        if (e.value == "uniform") m.initial_state.kind = InitialStateKind::Uniform;
        else if (e.value == "ergodic") m.initial_state.kind = InitialStateKind::Ergodic;
        else if (e.value == "explicit") m.initial_state.kind = InitialStateKind::Explicit;
        else add(e.line, path, "expected uniform, ergodic or explicit");
      } else if (e.key == "initial_probs") {
        const auto v = parse_vector(e.value);
        if (!v) add(e.line, path, "expected a list of probabilities");
        else m.initial_state.probs = *v;
      } else {
        add(e.line, path, "unknown field");
      }
    }
    for (const char* required : {"name", "kind", "K"}) {
      if (fields.count(required) == 0) {
        add(sec.line, std::string("model.") + required, "missing required field");
      }
    }
    const bool has_probs = fields.count("initial_probs") > 0;
    if (m.initial_state.kind == InitialStateKind::Explicit && !has_probs) {
      add(sec.line, "model.initial_probs", "required when initial_state = explicit");
    }
    if (m.initial_state.kind != InitialStateKind::Explicit && has_probs) {
      add(fields["initial_probs"]->line, "model.initial_probs",
          "only allowed when initial_state = explicit");
    }
  }

  void read_delta(const RawSection& sec, ModelSpec& m) {
    for (const auto& e : sec.entries) {
      const std::string path = "delta." + e.key;
      lines_.emplace(path, e.line);
      if (!valid_name(e.key)) {
        add(e.line, path, "parameter names must be [A-Za-z0-9_]+");
        continue;
      }
      if (auto d = dist_at(e, path)) m.delta.push_back({e.key, std::move(*d)});
    }
  }

  void read_group(const RawSection& sec, ModelSpec& m) {
    const std::string label = sec.name.substr(6);
    const std::string base = "group." + label;
    if (!valid_name(label)) {
      add(sec.line, base, "group names must be [A-Za-z0-9_]+");
      return;
    }
    bool ordered = false;
    bool seen_ordered = false;
    bool ok = true;
    std::vector<DistSpec> comps;
    for (const auto& e : sec.entries) {
      if (e.key == "ordered") {
        if (seen_ordered) add(e.line, base + ".ordered", "duplicate field");
        seen_ordered = true;
        if (auto b = bool_at(e, base + ".ordered")) ordered = *b;
      } else if (e.key == "component") {
        const std::string path = base + ".component[" + std::to_string(comps.size()) + "]";
        if (auto d = dist_at(e, path)) comps.push_back(std::move(*d));
        else ok = false;
      } else {
        add(e.line, base + "." + e.key, "unknown field");
      }
    }
    if (comps.empty()) {
      if (ok) add(sec.line, base, "group has no component entries");
      return;
    }
    if (!ok) return;
    try {
      m.groups.emplace_back(label, std::move(comps), ordered);
    } catch (const DomainError& err) {
      add(sec.line, base, err.what());
    }
  }

  void read_eta(const RawSection& sec, ModelSpec& m) {
    for (const auto& e : sec.entries) {
      const std::string path = "eta.row[" + std::to_string(m.eta.size()) + "]";
      if (e.key != "row") {
        add(e.line, "eta." + e.key, "unknown field");
        continue;
      }
      lines_.emplace(path, e.line);
      if (auto d = dist_at(e, path)) {
        if (d->family() != Family::Dirichlet) {
          add(e.line, path, "transition rows need a dirichlet prior");
        } else {
          m.eta.push_back(std::move(*d));
        }
      }
    }
  }

  void read_constraint(const RawSection& sec, ModelSpec& m) {
    std::map<std::string, int> seen;
    for (const auto& e : sec.entries) {
      const std::string path = "constraint." + e.key;
      lines_.emplace(path, e.line);
      if (++seen[e.key] > 1) {
        add(e.line, path, "duplicate field");
        continue;
      }
      if (e.key == "regularity") {
        if (e.value == "none") m.regularity.kind = RegularityKind::None;
        else if (e.value == "ar2_stationarity") m.regularity.kind = RegularityKind::Ar2Stationarity;
        else if (e.value == "msar2_stationarity") m.regularity.kind = RegularityKind::Msar2Stationarity;
        else add(e.line, path, "expected none, ar2_stationarity or msar2_stationarity");
      } else if (e.key == "phi1") {
        m.regularity.phi1 = e.value;
      } else if (e.key == "phi2") {
        m.regularity.phi2 = e.value;
      } else {
        add(e.line, path, "unknown field");
      }
    }
    if (m.regularity.kind == RegularityKind::None &&
        (!m.regularity.phi1.empty() || !m.regularity.phi2.empty())) {
      add(sec.line, "constraint", "phi1/phi2 given without a regularity constraint");
    }
  }

  std::vector<RawSection> sections_;
  std::vector<Diagnostic> diags_;
  std::map<std::string, int> lines_;
};

}  // namespace detail

/// Parse and validate a model document. Throws ParseError carrying every
/// diagnostic found; never throws anything else.
inline ModelSpec parse_spec(std::string_view text) {
  try {
    return detail::DocumentParser(text).build();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError({Diagnostic{0, "", std::string("internal: ") + e.what()}});
  }
}

/// Canonical document text; parse_spec(emit_spec(m)) == m.
inline std::string emit_spec(const ModelSpec& m) {
  std::ostringstream os;
  os << "[model]\n"
     << "name = " << m.name << "\n"
     << "kind = " << to_string(m.kind) << "\n"
     << "K = " << m.K << "\n"
     << "initial_state = " << to_string(m.initial_state.kind) << "\n";
  if (m.initial_state.kind == InitialStateKind::Explicit) {
    os << "initial_probs = " << format_vector(m.initial_state.probs) << "\n";
  }
  if (!m.delta.empty()) {
    os << "\n[delta]\n";
    for (const auto& d : m.delta) os << d.name << " = " << format_dist(d.prior) << "\n";
  }
  for (const auto& g : m.groups) {
    os << "\n[group." << g.label() << "]\n"
       << "ordered = " << (g.ordered() ? "true" : "false") << "\n";
    for (const auto& c : g.components()) os << "component = " << format_dist(c) << "\n";
  }
  if (!m.eta.empty()) {
    os << "\n[eta]\n";
    for (const auto& r : m.eta) os << "row = " << format_dist(r) << "\n";
  }
  os << "\n[constraint]\n"
     << "regularity = " << to_string(m.regularity.kind) << "\n";
  if (m.regularity.kind != RegularityKind::None) {
    os << "phi1 = " << m.regularity.phi1 << "\n"
       << "phi2 = " << m.regularity.phi2 << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Coherence plans

enum class PairingRule { GroupForward, Identity, Transition, Regularity };

inline std::string_view to_string(PairingRule r) {
  switch (r) {
    case PairingRule::GroupForward: return "group_forward";
    case PairingRule::Identity: return "identity";
    case PairingRule::Transition: return "transition_identity";
    case PairingRule::Regularity: return "regularity_equivalence";
  }
  return "unknown";
}

struct Pairing {
  std::string parameter;
  PairingRule rule = PairingRule::Identity;
  bool operator==(const Pairing&) const = default;
};

/// Which prior of the nested model is checked against which prior of the
/// general model, and by which rule.
struct CoherencePlan {
  ModelSpec nested;
  ModelSpec general;
  std::vector<Pairing> pairings;
};

namespace detail {

// Scalar prior of a parameter that does not switch in `m`.
inline const DistSpec* scalar_prior(const ModelSpec& m, const std::string& name) {
  if (const auto* d = m.find_delta(name)) return &d->prior;
  if (const auto* g = m.find_group(name); g != nullptr && g->K() == 1) return &g->components().front();
  return nullptr;
}

inline bool is_normal(Family f) { return f == Family::NormalVar || f == Family::NormalPrec; }

inline DistSpec to_family(const DistSpec& d, Family target) {
  if (d.family() == target) return d;
  if (d.family() == Family::NormalVar && target == Family::NormalPrec) {
    const auto& p = d.as<NormalVar>();
    return NormalPrec{p.m, 1.0 / p.v};
  }
  if (d.family() == Family::NormalPrec && target == Family::NormalVar) {
    const auto& p = d.as<NormalPrec>();
    return NormalVar{p.m, 1.0 / p.vprec};
  }
  throw ConfigError("family mismatch: " + std::string(to_string(d.family())) + " vs " +
                    std::string(to_string(target)));
}

}  // namespace detail

/// Pair parameters by name. A parameter that is scalar in `nested` and
/// switches in `general` is checked by the forward map; parameters with the
/// same structure in both must have identical priors.
inline CoherencePlan make_plan(const ModelSpec& nested, const ModelSpec& general) {
  CoherencePlan plan{nested, general, {}};
  std::vector<std::string> names;
  for (const auto& d : nested.delta) names.push_back(d.name);
  for (const auto& g : nested.groups) names.push_back(g.label());
  for (const auto& name : names) {
    if (!general.has_parameter(name)) {
      throw ConfigError("parameter '" + name + "' of '" + nested.name + "' has no counterpart in '" +
                        general.name + "'");
    }
    const DistSpec* scalar = detail::scalar_prior(nested, name);
    const auto* ggroup = general.find_group(name);
    if (scalar != nullptr && ggroup != nullptr && ggroup->K() > 1) {
      plan.pairings.push_back({name, PairingRule::GroupForward});
    } else if (scalar != nullptr && detail::scalar_prior(general, name) != nullptr) {
      plan.pairings.push_back({name, PairingRule::Identity});
    } else if (scalar == nullptr && ggroup != nullptr && ggroup->K() == nested.find_group(name)->K()) {
      plan.pairings.push_back({name, PairingRule::Identity});
    } else {
      throw ConfigError("parameter '" + name + "' switches in '" + nested.name +
                        "' but not in the same way in '" + general.name + "'");
    }
  }
  auto in_nested = [&](const std::string& n) { return nested.has_parameter(n); };
  for (const auto& d : general.delta) {
    if (!in_nested(d.name)) throw ConfigError("parameter '" + d.name + "' missing from '" + nested.name + "'");
  }
  for (const auto& g : general.groups) {
    if (!in_nested(g.label())) throw ConfigError("parameter '" + g.label() + "' missing from '" + nested.name + "'");
  }
  if (!nested.eta.empty()) {
    if (general.eta.empty()) {
      throw ConfigError("'" + nested.name + "' has transition priors but '" + general.name + "' does not");
    }
    plan.pairings.push_back({"eta", PairingRule::Transition});
  }
  plan.pairings.push_back({"regularity", PairingRule::Regularity});
  return plan;
}

struct PairingResult {
  std::string parameter;
  PairingRule rule = PairingRule::Identity;
  bool pass = false;
  double discrepancy = 0.0;
  std::string detail;
  bool operator==(const PairingResult&) const = default;
};

struct PlanReport {
  std::string nested;
  std::string general;
  double tolerance = 1e-12;
  std::vector<PairingResult> results;
  bool pass = false;
  bool operator==(const PlanReport&) const = default;
};

/// Evaluate every pairing of `plan`. Forward-map pairings pass within
/// `tol`; identity pairings need exact hyperparameter equality.
inline PlanReport check_plan(const CoherencePlan& plan, double tol = 1e-12) {
  PlanReport report;
  report.nested = plan.nested.name;
  report.general = plan.general.name;
  report.tolerance = tol;
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (const auto& pairing : plan.pairings) {
    PairingResult r{pairing.parameter, pairing.rule, false, inf, ""};
    switch (pairing.rule) {
      case PairingRule::GroupForward: {
        const DistSpec* nested = detail::scalar_prior(plan.nested, pairing.parameter);
        const auto* group = plan.general.find_group(pairing.parameter);
        if (nested == nullptr || group == nullptr) throw ConfigError("plan refers to missing parameter '" + pairing.parameter + "'");
        if (nested->family() != group->family() &&
            !(detail::is_normal(nested->family()) && detail::is_normal(group->family()))) {
          throw ConfigError("family mismatch for '" + pairing.parameter + "': nested " +
                            std::string(to_string(nested->family())) + ", general " +
                            std::string(to_string(group->family())));
        }
        try {
          const DistSpec implied = coherent_product(*group);
          r.discrepancy = hyperparameter_discrepancy(detail::to_family(*nested, implied.family()), implied);
          r.pass = r.discrepancy <= tol;
          r.detail = "nested " + format_dist(*nested) + " vs product " + format_dist(implied);
        } catch (const InfeasibleError& e) {
          r.detail = e.what();
        }
        break;
      }
      case PairingRule::Identity: {
        const DistSpec* a = detail::scalar_prior(plan.nested, pairing.parameter);
        const DistSpec* b = detail::scalar_prior(plan.general, pairing.parameter);
        if (a != nullptr && b != nullptr) {
          if (a->family() != b->family()) {
            throw ConfigError("family mismatch for '" + pairing.parameter + "'");
          }
          r.discrepancy = hyperparameter_discrepancy(*a, *b);
          r.detail = format_dist(*a) + " vs " + format_dist(*b);
        } else {
          const auto* ga = plan.nested.find_group(pairing.parameter);
          const auto* gb = plan.general.find_group(pairing.parameter);
          if (ga == nullptr || gb == nullptr || ga->K() != gb->K()) {
            throw ConfigError("plan refers to missing parameter '" + pairing.parameter + "'");
          }
          if (ga->family() != gb->family()) throw ConfigError("family mismatch for '" + pairing.parameter + "'");
          r.discrepancy = 0.0;
          for (std::size_t i = 0; i < ga->components().size(); ++i) {
            r.discrepancy = std::max(r.discrepancy, hyperparameter_discrepancy(ga->components()[i], gb->components()[i]));
          }
          r.detail = "group of " + std::to_string(ga->K()) + " components";
          if (ga->ordered() != gb->ordered()) {
            r.discrepancy = inf;
            r.detail += "; ordering flags differ";
          }
        }
        r.pass = r.discrepancy == 0.0;
        break;
      }
      case PairingRule::Transition: {
        const auto& a = plan.nested.eta;
        const auto& b = plan.general.eta;
        if (a.size() == b.size()) {
          r.discrepancy = 0.0;
          for (std::size_t i = 0; i < a.size(); ++i) {
            r.discrepancy = std::max(r.discrepancy, hyperparameter_discrepancy(a[i], b[i]));
          }
        }
        r.pass = r.discrepancy == 0.0;
        r.detail = std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " dirichlet rows";
        break;
      }
      case PairingRule::Regularity: {
        const auto& a = plan.nested.regularity;
        const auto& b = plan.general.regularity;
        const bool none_a = a.kind == RegularityKind::None;
        const bool none_b = b.kind == RegularityKind::None;
        // Under the nesting restriction rho(P2) = rho(Phi)^2, so AR(2) and
        // MS-AR(2) stationarity describe the same region.
        r.pass = none_a == none_b && (none_a || (a.phi1 == b.phi1 && a.phi2 == b.phi2));
        r.discrepancy = r.pass ? 0.0 : 1.0;
        r.detail = std::string(to_string(a.kind)) + " vs " + std::string(to_string(b.kind));
        break;
      }
    }
    report.results.push_back(std::move(r));
  }
  report.pass = std::all_of(report.results.begin(), report.results.end(),
                            [](const PairingResult& r) { return r.pass; });
  return report;
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { Human, Machine };

inline constexpr std::string_view kReportSchema = "v1";

namespace detail {

inline nlohmann::json number_json(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

inline double json_number(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ParseError({Diagnostic{0, "", "expected a number, got '" + s + "'"}});
  }
  return j.get<double>();
}

inline std::string fmt_g(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace detail

inline nlohmann::json to_json(const CoherenceReport& r) {
  using detail::number_json;
  return nlohmann::json{
      {"schema", kReportSchema},
      {"type", "coherence_report"},
      {"method", to_string(r.method)},
      {"sup_norm_error", number_json(r.sup_norm_error)},
      {"coverage", number_json(r.coverage)},
      {"ks_statistic", number_json(r.ks_statistic)},
      {"critical_value", number_json(r.critical_value)},
      {"n_retained", r.n_retained},
      {"n_draws", r.n_draws},
      {"epsilon", number_json(r.epsilon)},
      {"tolerances",
       {{"sup_norm", number_json(r.tolerances.sup_norm)},
        {"ks_alpha", number_json(r.tolerances.ks_alpha)},
        {"min_coverage", number_json(r.tolerances.min_coverage)}}},
      {"pass", r.pass},
  };
}

inline nlohmann::json to_json(const PlanReport& r) {
  nlohmann::json results = nlohmann::json::array();
  for (const auto& p : r.results) {
    results.push_back({{"parameter", p.parameter},
                       {"rule", to_string(p.rule)},
                       {"pass", p.pass},
                       {"discrepancy", detail::number_json(p.discrepancy)},
                       {"detail", p.detail}});
  }
  return nlohmann::json{{"schema", kReportSchema}, {"type", "plan_report"},
                        {"nested", r.nested},       {"general", r.general},
                        {"tolerance", detail::number_json(r.tolerance)},
                        {"results", results},       {"pass", r.pass}};
}

inline void require_schema(const nlohmann::json& j, std::string_view type) {
  if (!j.is_object() || j.value("schema", "") != kReportSchema) {
    throw ParseError({Diagnostic{0, "schema", "expected report schema v1"}});
  }
  if (j.value("type", "") != type) {
    throw ParseError({Diagnostic{0, "type", "expected a " + std::string(type)}});
  }
}

inline CoherenceReport coherence_report_from_json(const nlohmann::json& j) {
  require_schema(j, "coherence_report");
  try {
    using detail::json_number;
    CoherenceReport r;
    const auto method = j.at("method").get<std::string>();
    if (method == "grid") r.method = VerifyMethod::Grid;
    else if (method == "mc_band") r.method = VerifyMethod::McBand;
    else throw ParseError({Diagnostic{0, "method", "unknown method '" + method + "'"}});
    r.sup_norm_error = json_number(j.at("sup_norm_error"));
    r.coverage = json_number(j.at("coverage"));
    r.ks_statistic = json_number(j.at("ks_statistic"));
    r.critical_value = json_number(j.at("critical_value"));
    r.n_retained = j.at("n_retained").get<std::size_t>();
    r.n_draws = j.at("n_draws").get<std::size_t>();
    r.epsilon = json_number(j.at("epsilon"));
    const auto& t = j.at("tolerances");
    r.tolerances.sup_norm = json_number(t.at("sup_norm"));
    r.tolerances.ks_alpha = json_number(t.at("ks_alpha"));
    r.tolerances.min_coverage = json_number(t.at("min_coverage"));
    r.pass = j.at("pass").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError({Diagnostic{0, "", e.what()}});
  }
}

inline PlanReport plan_report_from_json(const nlohmann::json& j) {
  require_schema(j, "plan_report");
  try {
    PlanReport r;
    r.nested = j.at("nested").get<std::string>();
    r.general = j.at("general").get<std::string>();
    r.tolerance = detail::json_number(j.at("tolerance"));
    r.pass = j.at("pass").get<bool>();
    for (const auto& p : j.at("results")) {
      PairingResult pr;
      pr.parameter = p.at("parameter").get<std::string>();
      const auto rule = p.at("rule").get<std::string>();
      bool known = false;
      for (auto candidate : {PairingRule::GroupForward, PairingRule::Identity,
                             PairingRule::Transition, PairingRule::Regularity}) {
        if (to_string(candidate) == rule) {
          pr.rule = candidate;
          known = true;
        }
      }
      if (!known) throw ParseError({Diagnostic{0, "rule", "unknown rule '" + rule + "'"}});
      pr.pass = p.at("pass").get<bool>();
      pr.discrepancy = detail::json_number(p.at("discrepancy"));
      pr.detail = p.at("detail").get<std::string>();
      r.results.push_back(std::move(pr));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError({Diagnostic{0, "", e.what()}});
  }
}

inline nlohmann::json parse_report_json(std::string_view text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError({Diagnostic{0, "", e.what()}});
  }
}

inline std::string emit_report(const CoherenceReport& r, ReportFormat format) {
  if (format == ReportFormat::Machine) return to_json(r).dump(2) + "\n";
  using detail::fmt_g;
  using detail::pad;
  std::ostringstream os;
  os << (r.pass ? "PASS" : "FAIL") << "  " << to_string(r.method) << " coherence check\n";
  if (r.method == VerifyMethod::Grid) {
    os << "  " << pad("sup_norm_error", 16) << pad(fmt_g(r.sup_norm_error), 14)
       << "tol " << fmt_g(r.tolerances.sup_norm) << "\n"
       << "  " << pad("coverage", 16) << pad(fmt_g(r.coverage), 14) << "min "
       << fmt_g(r.tolerances.min_coverage) << "\n";
  } else {
    os << "  " << pad("ks_statistic", 16) << pad(fmt_g(r.ks_statistic), 14) << "critical "
       << fmt_g(r.critical_value) << " (alpha " << fmt_g(r.tolerances.ks_alpha) << ")\n"
       << "  " << pad("retained", 16) << r.n_retained << " of " << r.n_draws << "\n"
       << "  " << pad("epsilon", 16) << fmt_g(r.epsilon) << "\n";
  }
  return os.str();
}

inline std::string emit_report(const PlanReport& r, ReportFormat format) {
  if (format == ReportFormat::Machine) return to_json(r).dump(2) + "\n";
  using detail::fmt_g;
  using detail::pad;
  std::size_t width = 9;
  for (const auto& p : r.results) width = std::max(width, p.parameter.size());
  std::ostringstream os;
  os << (r.pass ? "PASS" : "FAIL") << "  plan " << r.nested << " -> " << r.general
     << " (tol " << fmt_g(r.tolerance) << ")\n";
  os << "  " << pad("parameter", width + 2) << pad("rule", 24) << pad("discrepancy", 14)
     << "result\n";
  for (const auto& p : r.results) {
    os << "  " << pad(p.parameter, width + 2) << pad(std::string(to_string(p.rule)), 24)
       << pad(fmt_g(p.discrepancy), 14) << (p.pass ? "pass" : "FAIL") << "\n";
  }
  if (!r.pass) {
    os << "failing pairings:\n";
    for (const auto& p : r.results) {
      if (!p.pass) os << "  " << p.parameter << ": " << p.detail << "\n";
    }
  }
  return os.str();
}

}  // namespace coherent
