#pragma once

// Representations of the coefficient path R(t) and the timelike solution Y(t)
// on the base interval [0,1]. Evaluation outside [0,1] (the quasi-periodic
// extension through T) lives in system.hpp.

#include <algorithm>
#include <cmath>
#include <variant>
#include <vector>

#include "bott/types.hpp"

namespace bott {

/// a(t) = drift*t + sum_k cos[k] cos(2 pi k t) + sin[k] sin(2 pi k t).
struct ScalarTrig {
  double drift = 0.0;
  std::vector<double> cos;  ///< cos[0] is the constant term
  std::vector<double> sin;  ///< sin[0] is ignored

  double value(double t) const {
    double v = drift * t;
    for (std::size_t k = 0; k < cos.size(); ++k) v += cos[k] * std::cos(two_pi * k * t);
    for (std::size_t k = 1; k < sin.size(); ++k) v += sin[k] * std::sin(two_pi * k * t);
    return v;
  }
  double d1(double t) const {
    double v = drift;
    for (std::size_t k = 1; k < cos.size(); ++k) v -= two_pi * k * cos[k] * std::sin(two_pi * k * t);
    for (std::size_t k = 1; k < sin.size(); ++k) v += two_pi * k * sin[k] * std::cos(two_pi * k * t);
    return v;
  }
  double d2(double t) const {
    double v = 0.0;
    for (std::size_t k = 1; k < cos.size(); ++k) {
      double w = two_pi * k;
      v -= w * w * cos[k] * std::cos(w * t);
    }
    for (std::size_t k = 1; k < sin.size(); ++k) {
      double w = two_pi * k;
      v -= w * w * sin[k] * std::sin(w * t);
    }
    return v;
  }
  bool is_constant() const {
    if (drift != 0.0) return false;
    for (std::size_t k = 1; k < cos.size(); ++k)
      if (cos[k] != 0.0) return false;
    for (std::size_t k = 1; k < sin.size(); ++k)
      if (sin[k] != 0.0) return false;
    return true;
  }
};

// ---------------------------------------------------------------- R(t)

struct ConstantMatrix {
  Matrix value;
};

/// R(t) = sum_k cos[k] cos(2 pi k t) + sin[k] sin(2 pi k t).
struct TrigMatrix {
  std::vector<Matrix> cos;
  std::vector<Matrix> sin;
};

/// Uniform samples at t_j = j/M, j = 0..M. Interpolation is cubic Hermite with
/// central-difference slopes (ghost samples come from the T-extension) or linear.
struct SampledMatrix {
  std::vector<Matrix> values;
  bool cubic = true;
};

/// R built from a boost-type Y so that R Y = Y'': the minimal g-symmetric rank-2
/// part plus springs -k_j on the g-orthonormal complement (E(t), then the
/// coordinate axes outside the boost plane, in increasing order).
struct TiltRecipe {
  std::vector<double> springs;
};

using CurvatureRep = std::variant<ConstantMatrix, TrigMatrix, SampledMatrix, TiltRecipe>;

// ---------------------------------------------------------------- Y(t)

struct ConstantVector {
  Vector value;
};

/// Y(t) = sum_k cos[k] cos(2 pi k t) + sin[k] sin(2 pi k t), componentwise.
struct TrigVector {
  std::vector<Vector> cos;
  std::vector<Vector> sin;
};

/// Y(t) = cosh a(t) e_time + sinh a(t) e_space.
struct BoostPath {
  int time_axis = 0;
  int space_axis = 1;
  ScalarTrig angle;
};

/// Uniform samples of (Y, Y') at t_j = j/M, cubic Hermite interpolation.
struct SampledVector {
  std::vector<Vector> values;
  std::vector<Vector> derivs;
};

using SolutionRep = std::variant<ConstantVector, TrigVector, BoostPath, SampledVector>;

/// Y, Y' and Y'' at one point.
struct Jet {
  Vector y;
  Vector dy;
  Vector ddy;
};

namespace detail {

inline Jet eval_trig(const TrigVector& p, double t, Eigen::Index n) {
  Jet j{Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
  for (std::size_t k = 0; k < p.cos.size(); ++k) {
    double w = two_pi * k;
    j.y += p.cos[k] * std::cos(w * t);
    j.dy -= p.cos[k] * (w * std::sin(w * t));
    j.ddy -= p.cos[k] * (w * w * std::cos(w * t));
  }
  for (std::size_t k = 1; k < p.sin.size(); ++k) {
    double w = two_pi * k;
    j.y += p.sin[k] * std::sin(w * t);
    j.dy += p.sin[k] * (w * std::cos(w * t));
    j.ddy -= p.sin[k] * (w * w * std::sin(w * t));
  }
  return j;
}

inline Jet eval_boost(const BoostPath& p, double t, Eigen::Index n) {
  double a = p.angle.value(t), da = p.angle.d1(t), dda = p.angle.d2(t);
  Vector y = Vector::Zero(n), e = Vector::Zero(n);
  y(p.time_axis) = std::cosh(a);
  y(p.space_axis) = std::sinh(a);
  e(p.time_axis) = std::sinh(a);
  e(p.space_axis) = std::cosh(a);
  return {y, da * e, dda * e + da * da * y};
}

/// Locates t in the uniform grid with M intervals: returns interval index and local coordinate.
inline std::pair<std::size_t, double> locate(double t, std::size_t M) {
  double s = std::clamp(t, 0.0, 1.0) * static_cast<double>(M);
  auto j = static_cast<std::size_t>(std::floor(s));
  if (j >= M) j = M - 1;
  return {j, s - static_cast<double>(j)};
}

inline Jet eval_samples(const SampledVector& p, double t) {
  std::size_t M = p.values.size() - 1;
  auto [j, u] = locate(t, M);
  double h = 1.0 / static_cast<double>(M);
  const Vector &y0 = p.values[j], &y1 = p.values[j + 1];
  const Vector &d0 = p.derivs[j], &d1 = p.derivs[j + 1];
  double u2 = u * u, u3 = u2 * u;
  double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u, h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
  double g00 = 6 * u2 - 6 * u, g10 = 3 * u2 - 4 * u + 1, g01 = -6 * u2 + 6 * u, g11 = 3 * u2 - 2 * u;
  double k00 = 12 * u - 6, k10 = 6 * u - 4, k01 = -12 * u + 6, k11 = 6 * u - 2;
  Jet r;
  r.y = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
  r.dy = (g00 * y0 + g01 * y1) / h + g10 * d0 + g11 * d1;
  r.ddy = (k00 * y0 + k01 * y1) / (h * h) + (k10 * d0 + k11 * d1) / h;
  return r;
}

}  // namespace detail

}  // namespace bott
