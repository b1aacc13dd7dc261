#pragma once

#include <charconv>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace coherent {

// Shortest round-trip text of a double, for error messages.
inline std::string number_text(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// Argument outside the mathematical domain of an operation (nonpositive
// variance, x outside the support, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Operation not defined for the given distribution family.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A coherence map exists but its output would not be a proper distribution.
// `bound` is the value the offending quantity had to exceed.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double value, double bound)
      : std::runtime_error(what), value_(value), bound_(bound) {}

  double value() const noexcept { return value_; }
  double bound() const noexcept { return bound_; }

 private:
  double value_;
  double bound_;
};

// Model shape and requested constraint/operation do not fit together.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double lower, double upper)
      : std::runtime_error(what), lower_(lower), upper_(upper) {}

  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }

 private:
  double lower_;
  double upper_;
};

// Rejection sampler ran out of attempts.
class RejectionCapError : public std::runtime_error {
 public:
  RejectionCapError(const std::string& what, std::size_t attempts,
                    std::size_t accepted)
      : std::runtime_error(what), attempts_(attempts), accepted_(accepted) {}

  std::size_t attempts() const noexcept { return attempts_; }
  std::size_t accepted() const noexcept { return accepted_; }
  double acceptance_rate() const noexcept {
    return attempts_ == 0 ? 0.0
                          : static_cast<double>(accepted_) /
                                static_cast<double>(attempts_);
  }

 private:
  std::size_t attempts_;
  std::size_t accepted_;
};

// Monte Carlo band retained too few draws for a meaningful KS test.
class RetentionError : public std::runtime_error {
 public:
  RetentionError(const std::string& what, std::size_t retained)
      : std::runtime_error(what), retained_(retained) {}
  std::size_t retained() const noexcept { return retained_; }

 private:
  std::size_t retained_;
};

// Quadrature grid misses a noticeable share of the product's mass.
class CoverageError : public std::runtime_error {
 public:
  CoverageError(const std::string& what, double coverage)
      : std::runtime_error(what), coverage_(coverage) {}
  double coverage() const noexcept { return coverage_; }

 private:
  double coverage_;
};

struct Diagnostic {
  int line = 0;  // 0 when not tied to a line
  std::string path;
  std::string message;
};

inline std::string format_diagnostic(const Diagnostic& d) {
  std::string out;
  if (d.line > 0) out += "line " + std::to_string(d.line) + ": ";
  if (!d.path.empty()) out += d.path + ": ";
  out += d.message;
  return out;
}

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(std::vector<Diagnostic> diagnostics)
      : std::runtime_error(summarize(diagnostics)),
        diagnostics_(std::move(diagnostics)) {}

  const std::vector<Diagnostic>& diagnostics() const noexcept {
    return diagnostics_;
  }

 private:
  static std::string summarize(const std::vector<Diagnostic>& ds) {
    std::string out;
    for (const auto& d : ds) {
      if (!out.empty()) out += '\n';
      out += format_diagnostic(d);
    }
    return out.empty() ? std::string("parse error") : out;
  }

  std::vector<Diagnostic> diagnostics_;
};

}  // namespace coherent
