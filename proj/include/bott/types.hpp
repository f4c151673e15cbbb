#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace bott {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Base for every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problem data violates one of the structural conditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A discrete quantity did not stabilize under refinement.
class NonconvergenceError : public Error {
 public:
  using Error::Error;
};

/// An exact integer identity (Fourier identity, jump bound) failed.
class IdentityViolation : public Error {
 public:
  using Error::Error;
};

/// Point exp(2 pi i theta) on the unit circle; theta is kept in [0,1).
class CirclePoint {
 public:
  constexpr CirclePoint() = default;
  explicit CirclePoint(double theta) : theta_(reduce(theta)) {}

  static CirclePoint root_of_unity(int k, int N) {
    // integer reduction first so that k/N is exact for k = N
    int r = ((k % N) + N) % N;
    return CirclePoint(static_cast<double>(r) / N);
  }

  double theta() const { return theta_; }
  cplx rho() const { return std::polar(1.0, two_pi * theta_); }
  /// rho^N, computed from the angle to keep N-th roots of unity exact on the real axis.
  cplx rho_pow(int N) const {
    double a = reduce(theta_ * N);
    if (a == 0.0) return {1.0, 0.0};
    if (a == 0.5) return {-1.0, 0.0};
    if (a == 0.25) return {0.0, 1.0};
    if (a == 0.75) return {0.0, -1.0};
    return std::polar(1.0, two_pi * a);
  }
  /// True when rho^N = 1 up to `tol` in the angle.
  bool is_root_of_unity(int N, double tol = 1e-12) const {
    double a = reduce(theta_ * N);
    return a <= tol || 1.0 - a <= tol;
  }
  CirclePoint conj() const { return CirclePoint(1.0 - theta_); }

  static double reduce(double theta) {
    double r = theta - std::floor(theta);
    if (r >= 1.0) r = 0.0;
    return r;
  }

 private:
  double theta_ = 0.0;
};

/// Distance between two angles on R/Z.
inline double circle_distance(double a, double b) {
  double d = std::abs(CirclePoint::reduce(a) - CirclePoint::reduce(b));
  return std::min(d, 1.0 - d);
}

enum class ConstraintKind { star, zero };

inline const char* to_string(ConstraintKind k) { return k == ConstraintKind::star ? "star" : "zero"; }

inline ConstraintKind parse_kind(const std::string& s) {
  if (s == "star") return ConstraintKind::star;
  if (s == "zero") return ConstraintKind::zero;
  throw Error("unknown constraint kind '" + s + "' (expected star|zero)");
}

/// Numerical thresholds shared by all modules.
struct Tolerances {
  double structural = 1e-10;  ///< algebraic identities, relative
  double ode = 1e-7;          ///< residual of the timelike solution
  double singular = 1e-9;     ///< defect below which Y is declared singular
  double rank = 1e-6;         ///< relative singular-value threshold for kernels
  double spectrum = 1e-7;     ///< | |lambda| - 1 | threshold for unit-circle eigenvalues
  double eig = 1.0;           ///< scale factor of the discrete kernel window (see galerkin.hpp)
};

}  // namespace bott
