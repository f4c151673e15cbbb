#pragma once

// Morse-Sturm data (n, g, T, R, Y): V'' = R(t) V with a g-symmetric R, a
// g-preserving boundary twist T and a timelike solution Y with T Y(1) = Y(0),
// T Y'(1) = Y'(0). Everything here is immutable after construction.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bott/paths.hpp"
#include "bott/types.hpp"

namespace bott {

/// Values of the N-th iterated data at one point.
struct IteratedPoint {
  Matrix R;    ///< R_N(t) = R(tN)
  Vector Y;    ///< Y_N(t) = Y(tN)
  Vector dY;   ///< Y_N'(t) = N Y'(tN)
};

class MorseSturmSystem {
 public:
  MorseSturmSystem(Matrix g, Matrix T, CurvatureRep R, SolutionRep Y, std::string label = {})
      : g_(std::move(g)), T_(std::move(T)), R_(std::move(R)), Y_(std::move(Y)), label_(std::move(label)) {
    if (g_.rows() < 1 || g_.rows() != g_.cols()) throw ValidationError("metric must be a square matrix with n >= 1");
    if (T_.rows() != g_.rows() || T_.cols() != g_.cols()) throw ValidationError("T must be n x n");
    n_ = static_cast<int>(g_.rows());
    check_shapes();
    Eigen::FullPivLU<Matrix> lu(T_);
    T_invertible_ = lu.isInvertible();
    if (T_invertible_) Tinv_ = lu.inverse();
    else Tinv_ = Matrix::Identity(n_, n_);
    double rmax = 0.0;
    for (int i = 0; i <= 256; ++i) rmax = std::max(rmax, R_local(i / 256.0).norm());
    r_max_ = rmax;
  }

  int n() const { return n_; }
  const Matrix& g() const { return g_; }
  const Matrix& T() const { return T_; }
  const Matrix& T_inverse() const { return Tinv_; }
  bool T_invertible() const { return T_invertible_; }
  const CurvatureRep& R_rep() const { return R_; }
  const SolutionRep& Y_rep() const { return Y_; }
  const std::string& label() const { return label_; }
  /// Largest Frobenius norm of R over a 257-point grid on [0,1].
  double r_max() const { return r_max_; }

  /// T^k for any integer k.
  Matrix T_power(int k) const {
    Matrix base = k >= 0 ? T_ : Tinv_;
    Matrix out = Matrix::Identity(n_, n_);
    for (int i = 0; i < std::abs(k); ++i) out = base * out;
    return out;
  }

  /// g(v, w) = w^* G v, linear in the first slot.
  cplx metric(const CVector& v, const CVector& w) const { return w.dot(g_.cast<cplx>() * v); }
  double metric(const Vector& v, const Vector& w) const { return w.dot(g_ * v); }

  // ---- base-interval evaluation (r in [0,1])

  Matrix R_local(double r) const {
    return std::visit([&](const auto& rep) { return eval_R(rep, r); }, R_);
  }

  Jet Y_local(double r) const {
    return std::visit([&](const auto& rep) { return eval_Y(rep, r); }, Y_);
  }

  // ---- extension to the real line: Y(k+r) = T^{-k} Y(r), R(k+r) = T^{-k} R(r) T^k

  /// R at block k, local coordinate r; avoids the rounding of floor(k + r).
  Matrix R_extended(int k, double r) const {
    if (k == 0) return R_local(r);
    return T_power(-k) * R_local(r) * T_power(k);
  }
  Jet Y_extended(int k, double r) const {
    Jet j = Y_local(r);
    if (k == 0) return j;
    Matrix P = T_power(-k);
    return {P * j.y, P * j.dy, P * j.ddy};
  }

  /// R_N(t), Y_N(t), Y_N'(t) for t in [0,1].
  IteratedPoint iterated(int N, double t) const {
    if (N < 1) throw Error("iteration count N must be >= 1");
    auto [k, r] = split(N * t);
    return iterated_split(N, k, r);
  }

  /// Same as iterated() with s = tN given as k + r.
  IteratedPoint iterated_split(int N, int k, double r) const {
    Jet j = Y_extended(k, r);
    return {R_extended(k, r), j.y, N * j.dy};
  }

  static std::pair<int, double> split(double s) {
    double k = std::floor(s);
    double r = s - k;
    if (r >= 1.0) {
      k += 1.0;
      r = 0.0;
    }
    return {static_cast<int>(k), r};
  }

  /// Gram matrix of the positive form g_t^N(V,W) = W^* Gt V.
  Matrix positive_metric_matrix(int N, double t) const {
    Vector y = iterated(N, t).Y;
    return positive_metric_matrix(y);
  }
  Matrix positive_metric_matrix(const Vector& y) const {
    Vector gy = g_ * y;
    return g_ - 2.0 * gy * gy.transpose() / y.dot(gy);
  }

  /// g_t^N(V, W).
  cplx positive_metric(int N, double t, const CVector& V, const CVector& W) const {
    return W.dot(positive_metric_matrix(N, t).cast<cplx>() * V);
  }

  /// A(t,N) with g(V,W) = g_t^N(A V, W).
  Matrix operator_A(int N, double t) const {
    Matrix Gt = positive_metric_matrix(N, t);
    return Gt.ldlt().solve(g_);
  }

 private:
  void check_shapes() const {
    auto bad = [](const char* what) { throw ValidationError(std::string("malformed data: ") + what); };
    std::visit(
        [&](const auto& rep) {
          using Rep = std::decay_t<decltype(rep)>;
          if constexpr (std::is_same_v<Rep, ConstantMatrix>) {
            if (rep.value.rows() != n_ || rep.value.cols() != n_) bad("R constant shape");
          } else if constexpr (std::is_same_v<Rep, TrigMatrix>) {
            if (rep.cos.empty()) bad("R trig needs at least the constant term");
            for (auto& m : rep.cos)
              if (m.rows() != n_ || m.cols() != n_) bad("R trig shape");
            for (auto& m : rep.sin)
              if (m.rows() != n_ || m.cols() != n_) bad("R trig shape");
          } else if constexpr (std::is_same_v<Rep, SampledMatrix>) {
            if (rep.values.size() < 3) bad("R samples need at least 3 values");
            for (auto& m : rep.values)
              if (m.rows() != n_ || m.cols() != n_) bad("R sample shape");
          } else {
            if (!std::holds_alternative<BoostPath>(Y_)) bad("tilt curvature requires a boost-type Y");
            if (static_cast<int>(rep.springs.size()) > n_ - 1) bad("too many springs for tilt curvature");
          }
        },
        R_);
    std::visit(
        [&](const auto& rep) {
          using Rep = std::decay_t<decltype(rep)>;
          if constexpr (std::is_same_v<Rep, ConstantVector>) {
            if (rep.value.size() != n_) bad("Y constant shape");
          } else if constexpr (std::is_same_v<Rep, TrigVector>) {
            if (rep.cos.empty()) bad("Y trig needs at least the constant term");
            for (auto& v : rep.cos)
              if (v.size() != n_) bad("Y trig shape");
            for (auto& v : rep.sin)
              if (v.size() != n_) bad("Y trig shape");
          } else if constexpr (std::is_same_v<Rep, BoostPath>) {
            if (n_ < 2 || rep.time_axis == rep.space_axis || rep.time_axis < 0 || rep.space_axis < 0 ||
                rep.time_axis >= n_ || rep.space_axis >= n_)
              bad("Y boost plane");
          } else {
            if (rep.values.size() < 3 || rep.derivs.size() != rep.values.size()) bad("Y samples need values and derivs");
            for (std::size_t i = 0; i < rep.values.size(); ++i)
              if (rep.values[i].size() != n_ || rep.derivs[i].size() != n_) bad("Y sample shape");
          }
        },
        Y_);
  }

  Matrix eval_R(const ConstantMatrix& c, double) const { return c.value; }

  Matrix eval_R(const TrigMatrix& c, double r) const {
    Matrix out = Matrix::Zero(n_, n_);
    for (std::size_t k = 0; k < c.cos.size(); ++k) out += c.cos[k] * std::cos(two_pi * k * r);
    for (std::size_t k = 1; k < c.sin.size(); ++k) out += c.sin[k] * std::sin(two_pi * k * r);
    return out;
  }

  Matrix eval_R(const SampledMatrix& c, double r) const {
    std::size_t M = c.values.size() - 1;
    auto [j, u] = detail::locate(r, M);
    if (!c.cubic) return (1.0 - u) * c.values[j] + u * c.values[j + 1];
    // slopes from central differences; neighbours outside [0,1] come from the extension
    auto sample = [&](long i) -> Matrix {
      if (i < 0) return T_ * c.values[M + i] * Tinv_;
      if (i > static_cast<long>(M)) return Tinv_ * c.values[i - M] * T_;
      return c.values[i];
    };
    long jj = static_cast<long>(j);
    Matrix m0 = 0.5 * (sample(jj + 1) - sample(jj - 1));
    Matrix m1 = 0.5 * (sample(jj + 2) - sample(jj));
    double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * c.values[j] + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * c.values[j + 1] +
           (u3 - u2) * m1;
  }

  Matrix eval_R(const TiltRecipe& c, double r) const {
    const auto& boost = std::get<BoostPath>(Y_);
    Jet j = detail::eval_boost(boost, r, n_);
    Vector gy = g_ * j.y, gyy = g_ * j.ddy;
    double q = j.y.dot(gy);
    double c2 = j.ddy.dot(gy);
    Matrix R = (j.ddy * gy.transpose() + j.y * gyy.transpose()) / q - (c2 / (q * q)) * j.y * gy.transpose();
    if (c.springs.empty()) return R;
    // g-orthonormal complement: E in the boost plane, then the remaining axes
    Vector f = Vector::Zero(n_);
    f(boost.space_axis) = 1.0;
    Vector E = f - (f.dot(gy) / q) * j.y;
    E /= std::sqrt(std::abs(E.dot(g_ * E)));
    std::vector<Vector> frame{E};
    for (int a = 0; a < n_; ++a) {
      if (a == boost.time_axis || a == boost.space_axis) continue;
      Vector e = Vector::Zero(n_);
      e(a) = 1.0;
      frame.push_back(e);
    }
    for (std::size_t i = 0; i < c.springs.size(); ++i) {
      const Vector& e = frame[i];
      Vector ge = g_ * e;
      R -= c.springs[i] * e * ge.transpose() / e.dot(ge);
    }
    return R;
  }

  Jet eval_Y(const ConstantVector& c, double) const {
    return {c.value, Vector::Zero(n_), Vector::Zero(n_)};
  }
  Jet eval_Y(const TrigVector& c, double r) const { return detail::eval_trig(c, r, n_); }
  Jet eval_Y(const BoostPath& c, double r) const { return detail::eval_boost(c, r, n_); }
  Jet eval_Y(const SampledVector& c, double r) const { return detail::eval_samples(c, r); }

  Matrix g_;
  Matrix T_;
  Matrix Tinv_;
  CurvatureRep R_;
  SolutionRep Y_;
  std::string label_;
  int n_ = 0;
  bool T_invertible_ = false;
  double r_max_ = 0.0;
};

/// Result of the singularity test: flag plus the point of largest defect.
struct SingularityResult {
  bool singular = false;
  double defect = 0.0;
  std::optional<double> witness;
};

/// Y is singular when Y' is everywhere a multiple of Y, i.e. g(Y,Y) Y' = g(Y',Y) Y.
inline SingularityResult is_singular(const MorseSturmSystem& sys, double tol = 1e-9, int grid = 1000) {
  SingularityResult out;
  double worst_t = 0.0;
  for (int i = 0; i <= grid; ++i) {
    double t = static_cast<double>(i) / grid;
    Jet j = sys.Y_local(t);
    double q = sys.metric(j.y, j.y);
    Vector defect = q * j.dy - sys.metric(j.dy, j.y) * j.y;
    double rel = defect.norm() / (j.y.norm() * std::abs(q));
    if (rel > out.defect) {
      out.defect = rel;
      worst_t = t;
    }
  }
  out.singular = out.defect <= tol;
  if (!out.singular) out.witness = worst_t;
  return out;
}

}  // namespace bott
