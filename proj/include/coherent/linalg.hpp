#pragma once

// Small dense matrices for the stationarity checks: Kronecker products, norms,
// a Hessenberg/Francis-QR eigenvalue routine, and a spectral radius based on
// Gelfand's formula.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "coherent/errors.hpp"

namespace coherent {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DomainError("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw DomainError("Matrix product: shape mismatch");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    }
    return c;
  }

  friend Matrix operator*(double s, Matrix m) { return m *= s; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t l = 0; l < b.cols(); ++l)
          out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

/// Max absolute row sum.
inline double norm_inf(const Matrix& a) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += std::fabs(a(i, j));
    best = std::max(best, s);
  }
  return best;
}

inline double norm_frobenius(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

inline double trace(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
  return s;
}

namespace detail {

// 1-based view used by the Hessenberg/QR routines below, which follow the
// classic EISPACK index conventions.
class OneBased {
 public:
  explicit OneBased(Matrix& m) : m_(m) {}
  double& operator()(int i, int j) {
    return m_(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1));
  }

 private:
  Matrix& m_;
};

inline void balance(Matrix& m) {
  constexpr double radix = 2.0;
  constexpr double sqrdx = radix * radix;
  const int n = static_cast<int>(m.rows());
  OneBased a(m);
  bool done = false;
  while (!done) {
    done = true;
    for (int i = 1; i <= n; ++i) {
      double r = 0.0, c = 0.0;
      for (int j = 1; j <= n; ++j) {
        if (j != i) {
          c += std::fabs(a(j, i));
          r += std::fabs(a(i, j));
        }
      }
      if (c != 0.0 && r != 0.0) {
        double g = r / radix;
        double f = 1.0;
        const double s = c + r;
        while (c < g) {
          f *= radix;
          c *= sqrdx;
        }
        g = r * radix;
        while (c > g) {
          f /= radix;
          c /= sqrdx;
        }
        if ((c + r) / f < 0.95 * s) {
          done = false;
          g = 1.0 / f;
          for (int j = 1; j <= n; ++j) a(i, j) *= g;
          for (int j = 1; j <= n; ++j) a(j, i) *= f;
        }
      }
    }
  }
}

// Reduction to upper Hessenberg form by stabilized elementary similarity
// transformations.
inline void to_hessenberg(Matrix& m) {
  const int n = static_cast<int>(m.rows());
  OneBased a(m);
  for (int mm = 2; mm < n; ++mm) {
    double x = 0.0;
    int i = mm;
    for (int j = mm; j <= n; ++j) {
      if (std::fabs(a(j, mm - 1)) > std::fabs(x)) {
        x = a(j, mm - 1);
        i = j;
      }
    }
    if (i != mm) {
      for (int j = mm - 1; j <= n; ++j) std::swap(a(i, j), a(mm, j));
      for (int j = 1; j <= n; ++j) std::swap(a(j, i), a(j, mm));
    }
    if (x != 0.0) {
      for (i = mm + 1; i <= n; ++i) {
        double y = a(i, mm - 1);
        if (y != 0.0) {
          y /= x;
          a(i, mm - 1) = y;
          for (int j = mm; j <= n; ++j) a(i, j) -= y * a(mm, j);
          for (int j = 1; j <= n; ++j) a(j, mm) += y * a(j, i);
        }
      }
    }
  }
  for (int i = 3; i <= n; ++i)
    for (int j = 1; j <= i - 2; ++j) a(i, j) = 0.0;
}

// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift QR
// iteration with exceptional shifts. Destroys `m`.
inline std::vector<std::complex<double>> hessenberg_qr(Matrix& m) {
  constexpr int kMaxIts = 60;
  const int n = static_cast<int>(m.rows());
  OneBased a(m);
  std::vector<double> wr(static_cast<std::size_t>(n) + 1), wi(static_cast<std::size_t>(n) + 1);
  auto sign = [](double x, double s) { return s >= 0.0 ? std::fabs(x) : -std::fabs(x); };

  double anorm = 0.0;
  for (int i = 1; i <= n; ++i)
    for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::fabs(a(i, j));

  int nn = n;
  double t = 0.0;
  double p = 0.0, q = 0.0, r = 0.0, s = 0.0, w = 0.0, x = 0.0, y = 0.0, z = 0.0;
  while (nn >= 1) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l >= 2; --l) {
        s = std::fabs(a(l - 1, l - 1)) + std::fabs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::fabs(a(l, l - 1)) + s == s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      x = a(nn, nn);
      if (l == nn) {
        wr[nn] = x + t;
        wi[nn--] = 0.0;
      } else {
        y = a(nn - 1, nn - 1);
        w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::fabs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign(z, p);
            wr[nn - 1] = wr[nn] = x + z;
            if (z != 0.0) wr[nn] = x - w / z;
            wi[nn - 1] = wi[nn] = 0.0;
          } else {
            wr[nn - 1] = wr[nn] = x + p;
            wi[nn - 1] = -(wi[nn] = z);
          }
          nn -= 2;
        } else {
          if (its == kMaxIts) {
            throw ConvergenceError("QR eigenvalue iteration did not converge", 0.0,
                                   std::numeric_limits<double>::infinity());
          }
          if (its == 10 || its == 20 || its == 40) {
            t += x;
            for (int i = 1; i <= nn; ++i) a(i, i) -= x;
            s = std::fabs(a(nn, nn - 1)) + std::fabs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int mm = nn - 2;
          for (; mm >= l; --mm) {
            z = a(mm, mm);
            r = x - z;
            s = y - z;
            p = (r * s - w) / a(mm + 1, mm) + a(mm, mm + 1);
            q = a(mm + 1, mm + 1) - z - r - s;
            r = a(mm + 2, mm + 1);
            s = std::fabs(p) + std::fabs(q) + std::fabs(r);
            p /= s;
            q /= s;
            r /= s;
            if (mm == l) break;
            const double u = std::fabs(a(mm, mm - 1)) * (std::fabs(q) + std::fabs(r));
            const double v =
                std::fabs(p) * (std::fabs(a(mm - 1, mm - 1)) + std::fabs(z) +
                                std::fabs(a(mm + 1, mm + 1)));
            if (u + v == v) break;
          }
          for (int i = mm + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != mm + 2) a(i, i - 3) = 0.0;
          }
          for (int k = mm; k <= nn - 1; ++k) {
            if (k != mm) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = a(k + 2, k - 1);
              if ((x = std::fabs(p) + std::fabs(q) + std::fabs(r)) != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            if ((s = sign(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
              if (k == mm) {
                if (l != mm) a(k, k - 1) = -a(k, k - 1);
              } else {
                a(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = a(k, j) + q * a(k + 1, j);
                if (k != nn - 1) {
                  p += r * a(k + 2, j);
                  a(k + 2, j) -= p * z;
                }
                a(k + 1, j) -= p * y;
                a(k, j) -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * a(i, k) + y * a(i, k + 1);
                if (k != nn - 1) {
                  p += z * a(i, k + 2);
                  a(i, k + 2) -= p * r;
                }
                a(i, k + 1) -= p * q;
                a(i, k) -= p;
              }
            }
          }
        }
      }
    } while (l < nn - 1);
  }

  std::vector<std::complex<double>> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) out.emplace_back(wr[i], wi[i]);
  return out;
}

inline void require_square_finite(const Matrix& a, const char* op) {
  if (!a.square()) throw DomainError(std::string(op) + ": matrix must be square");
  for (double v : a.data()) {
    if (!std::isfinite(v)) throw DomainError(std::string(op) + ": matrix has non-finite entries");
  }
}

}  // namespace detail

/// All eigenvalues of a real square matrix (balancing, Hessenberg reduction,
/// shifted QR). Order is unspecified.
inline std::vector<std::complex<double>> eigenvalues(Matrix a) {
  detail::require_square_finite(a, "eigenvalues");
  if (a.rows() == 0) return {};
  if (a.rows() == 1) return {std::complex<double>(a(0, 0), 0.0)};
  detail::balance(a);
  detail::to_hessenberg(a);
  return detail::hessenberg_qr(a);
}

enum class SpectralMethod { Gelfand, QrFallback };

struct SpectralRadius {
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  SpectralMethod method = SpectralMethod::Gelfand;
  int squarings = 0;
};

/// Spectral radius by Gelfand's formula with rigorous two-sided bracketing.
///
/// After k squarings with M = A^(2^k):
///   rho <= ||M||^(1/2^k)        for the max-row-sum and Frobenius norms
///   rho >= (|tr M| / n)^(1/2^k) since |tr M| <= n rho^(2^k)
/// Powers are kept normalized and their scale tracked in log space. When the
/// bracket does not close within `max_squarings` (for example, when dominant
/// eigenvalues of equal modulus make every trace cancel) the dense QR
/// eigenvalue routine decides.
inline SpectralRadius spectral_radius_detailed(const Matrix& a, double tol = 1e-10,
                                               int max_squarings = 64) {
  detail::require_square_finite(a, "spectral_radius");
  if (!(tol > 0.0)) throw DomainError("spectral_radius: tol must be > 0");
  const std::size_t n = a.rows();
  SpectralRadius out;
  if (n == 0) return out;

  Matrix power = a;
  double log_scale = 0.0;  // A^(2^k) = exp(log_scale) * power
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  const double log_n = std::log(static_cast<double>(n));
  for (int k = 0; k <= max_squarings; ++k) {
    const double p = std::ldexp(1.0, k);
    const double row = norm_inf(power);
    if (row == 0.0) {
      out.value = out.lower = out.upper = 0.0;
      out.squarings = k;
      return out;
    }
    const double fro = norm_frobenius(power);
    upper = std::min({upper, std::exp((log_scale + std::log(row)) / p),
                      std::exp((log_scale + std::log(fro)) / p)});
    const double tr = std::fabs(trace(power));
    if (tr > 0.0) lower = std::max(lower, std::exp((log_scale + std::log(tr) - log_n) / p));
    if (upper - lower <= tol) {
      out.lower = std::min(lower, upper);
      out.upper = std::max(lower, upper);
      out.value = 0.5 * (lower + upper);
      out.squarings = k;
      return out;
    }
    power *= 1.0 / row;
    log_scale += std::log(row);
    power = power * power;
    log_scale *= 2.0;
  }

  try {
    double rho = 0.0;
    for (const auto& ev : eigenvalues(a)) rho = std::max(rho, std::abs(ev));
    out.value = rho;
    out.lower = lower;
    out.upper = upper;
    out.method = SpectralMethod::QrFallback;
    out.squarings = max_squarings;
    return out;
  } catch (const ConvergenceError&) {
    throw ConvergenceError("spectral_radius: bracket did not close and QR failed", lower, upper);
  }
}

inline double spectral_radius(const Matrix& a, double tol = 1e-10, int max_squarings = 64) {
  return spectral_radius_detailed(a, tol, max_squarings).value;
}

}  // namespace coherent
