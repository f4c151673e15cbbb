#pragma once

// Fixed-step RK4 for the iterated Morse-Sturm system J'' = N^2 R_N(t) J, the
// linear Poincare map P(v,w) = (T J(1), T J'(1)), its restriction to the
// invariant hyperplane J_0 and the exact nullities derived from them.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "bott/system.hpp"

namespace bott {

struct SolutionPath {
  std::vector<double> t;
  std::vector<CVector> J;
  std::vector<CVector> dJ;
};

namespace detail {

/// R_N at t = (i + c) / steps on [0,1], split into block and local coordinate
/// with integer arithmetic so that block boundaries are hit exactly.
inline Matrix iterated_R_at_step(const MorseSturmSystem& sys, int N, long i, double c, long steps) {
  long num = static_cast<long>(N) * i;
  long k = num / steps;
  double r = (static_cast<double>(num % steps) + N * c) / static_cast<double>(steps);
  if (r >= 1.0) {
    ++k;
    r -= 1.0;
  }
  return sys.R_extended(static_cast<int>(k), r);
}

/// One RK4 run for the first-order system X = [J; J'], X' = [J'; N^2 R_N J].
/// `observer(i, X)` is called at every node i = 0..steps.
template <typename Scalar, typename Observer>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> rk4_run(const MorseSturmSystem& sys, int N,
                                                              Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> X,
                                                              long steps, Observer&& observer) {
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const int n = sys.n();
  const double h = 1.0 / static_cast<double>(steps);
  const double N2 = static_cast<double>(N) * N;
  auto rhs = [&](const Matrix& R, const M& Z) {
    M out(Z.rows(), Z.cols());
    out.topRows(n) = Z.bottomRows(n);
    out.bottomRows(n) = (N2 * R).template cast<Scalar>() * Z.topRows(n);
    return out;
  };
  observer(0L, X);
  Matrix R0 = iterated_R_at_step(sys, N, 0, 0.0, steps);
  for (long i = 0; i < steps; ++i) {
    Matrix Rm = iterated_R_at_step(sys, N, i, 0.5, steps);
    Matrix R1 = iterated_R_at_step(sys, N, i + 1, 0.0, steps);
    M k1 = rhs(R0, X);
    M k2 = rhs(Rm, X + (0.5 * h) * k1);
    M k3 = rhs(Rm, X + (0.5 * h) * k2);
    M k4 = rhs(R1, X + h * k3);
    X += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    R0 = std::move(R1);
    observer(i + 1, X);
  }
  return X;
}

}  // namespace detail

inline long default_steps(int N) { return 1000L * N; }

/// Solution of J'' = N^2 R_N J with J(0) = v, J'(0) = w on a uniform grid.
inline SolutionPath solve_ivp(const MorseSturmSystem& sys, int N, const CVector& v, const CVector& w, long steps) {
  if (steps < 32) throw Error("solve_ivp needs at least 32 steps");
  if (N < 1) throw Error("iteration count N must be >= 1");
  const int n = sys.n();
  CMatrix X(2 * n, 1);
  X.col(0) << v, w;
  SolutionPath path;
  path.t.reserve(steps + 1);
  path.J.reserve(steps + 1);
  path.dJ.reserve(steps + 1);
  detail::rk4_run<cplx>(sys, N, X, steps, [&](long i, const CMatrix& Z) {
    path.t.push_back(static_cast<double>(i) / steps);
    path.J.push_back(Z.col(0).head(n));
    path.dJ.push_back(Z.col(0).tail(n));
  });
  return path;
}

/// Fundamental matrix at t = 1 of the N-th iterated system: column j holds
/// (J(1), J'(1)) for the j-th canonical initial condition.
inline Matrix fundamental_matrix(const MorseSturmSystem& sys, int N, long steps) {
  const int n = sys.n();
  Matrix X = Matrix::Identity(2 * n, 2 * n);
  return detail::rk4_run<double>(sys, N, X, steps, [](long, const Matrix&) {});
}

/// Monodromy of the N-th iterated system, (v,w) -> (T^N J(1), T^N J'(1)).
inline CMatrix iterated_monodromy(const MorseSturmSystem& sys, int N, long steps) {
  const int n = sys.n();
  Matrix TN = sys.T_power(N);
  Matrix B = Matrix::Zero(2 * n, 2 * n);
  B.topLeftCorner(n, n) = TN;
  B.bottomRightCorner(n, n) = TN;
  return (B * fundamental_matrix(sys, N, steps)).cast<cplx>();
}

/// g(J1', J2) - g(J1, J2'), constant along exact solutions.
inline cplx pairing(const MorseSturmSystem& sys, const CVector& J1, const CVector& dJ1, const CVector& J2,
                    const CVector& dJ2) {
  return sys.metric(dJ1, J2) - sys.metric(J1, dJ2);
}

/// max_t |pairing(t) - pairing(0)| for two solutions on the same grid.
inline double pairing_drift(const MorseSturmSystem& sys, const SolutionPath& a, const SolutionPath& b) {
  cplx p0 = pairing(sys, a.J[0], a.dJ[0], b.J[0], b.dJ[0]);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.t.size(); ++i)
    worst = std::max(worst, std::abs(pairing(sys, a.J[i], a.dJ[i], b.J[i], b.dJ[i]) - p0));
  return worst;
}

/// pairing_drift divided by max_t (|J_a|+|J_a'|)(|J_b|+|J_b'|), so that growing
/// solutions are measured against their own size.
inline double pairing_drift_relative(const MorseSturmSystem& sys, const SolutionPath& a, const SolutionPath& b) {
  double scale = 0.0;
  for (std::size_t i = 0; i < a.t.size(); ++i)
    scale = std::max(scale, (a.J[i].norm() + a.dJ[i].norm()) * (b.J[i].norm() + b.dJ[i].norm()));
  return scale > 0.0 ? pairing_drift(sys, a, b) / scale : 0.0;
}

/// One eigenvalue cluster of P on the unit circle.
struct UnitEigenvalue {
  double theta = 0.0;
  cplx lambda;
  int algebraic = 0;     ///< size of the numerical cluster
  int geometric_P = 0;   ///< dim Ker(P - lambda)
  int geometric_P0 = 0;  ///< dim Ker(P0 - lambda)
};

struct PoincareData {
  CMatrix P;         ///< 2n x 2n
  CMatrix P0;        ///< (2n-1) x (2n-1) in basis_J0
  CMatrix basis_J0;  ///< orthonormal columns spanning J_0
  CVector j0_functional;  ///< unit row (as a column) with J_0 = its kernel
  std::vector<cplx> eigenvalues;
  std::vector<UnitEigenvalue> unit_spectrum;
  double fixed_point_defect = 0.0;  ///< |P (Y0,Y0') - (Y0,Y0')| / |(Y0,Y0')|
  double invariance_defect = 0.0;   ///< |P B - B P0| / |P|
  long steps = 0;

  /// P^N, the monodromy of the N-th iterate in base coordinates.
  CMatrix power(int N) const {
    CMatrix out = CMatrix::Identity(P.rows(), P.cols());
    for (int i = 0; i < N; ++i) out = P * out;
    return out;
  }
};

/// Number of singular values of A at most tol * sigma_max, with a borderline flag.
struct RankDeficiency {
  int nullity = 0;
  bool borderline = false;
};

inline RankDeficiency numerical_nullity(const CMatrix& A, double tol_rel) {
  Eigen::JacobiSVD<CMatrix> svd(A);
  const auto& s = svd.singularValues();
  RankDeficiency out;
  double smax = s.size() ? s(0) : 0.0;
  double thr = tol_rel * std::max(smax, 1.0);
  int zeros = static_cast<int>(A.cols()) - static_cast<int>(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) <= thr) ++zeros;
    if (s(i) > thr / 10.0 && s(i) < thr * 10.0) out.borderline = true;
  }
  out.nullity = zeros;
  return out;
}

namespace detail {

inline double theta_of(cplx z) {
  double th = std::arg(z) / two_pi;
  th = CirclePoint::reduce(th);
  if (th < 1e-10 || 1.0 - th < 1e-10) th = 0.0;
  if (std::abs(th - 0.5) < 1e-10) th = 0.5;
  return th;
}

}  // namespace detail

/// Linear Poincare map with unit-circle spectrum. Eigenvalues split by Jordan
/// blocks under integration error are merged into clusters whose radius scales
/// with sqrt of the measured integration defect.
inline PoincareData poincare(const MorseSturmSystem& sys, long steps, const Tolerances& tol = {}) {
  const int n = sys.n();
  PoincareData d;
  d.steps = steps;
  d.P = iterated_monodromy(sys, 1, steps);

  Jet y0 = sys.Y_local(0.0);
  CVector fixed(2 * n);
  fixed << y0.y.cast<cplx>(), y0.dy.cast<cplx>();
  d.fixed_point_defect = (d.P * fixed - fixed).norm() / fixed.norm();

  // J_0 = kernel of (v,w) -> g(w, Y0) - g(v, Y0')
  Vector a(2 * n);
  a << -(sys.g() * y0.dy), sys.g() * y0.y;
  a /= a.norm();
  d.j0_functional = a.cast<cplx>();
  Eigen::HouseholderQR<CMatrix> qr(d.j0_functional);
  CMatrix Q = qr.householderQ() * CMatrix::Identity(2 * n, 2 * n);
  d.basis_J0 = Q.rightCols(2 * n - 1);
  d.P0 = d.basis_J0.adjoint() * d.P * d.basis_J0;
  d.invariance_defect = (d.P * d.basis_J0 - d.basis_J0 * d.P0).norm() / d.P.norm();
  if (d.invariance_defect > 100.0 * tol.ode)
    throw NonconvergenceError("J_0 is not invariant under P within tolerance (integrator accuracy); defect " +
                              std::to_string(d.invariance_defect));

  Eigen::ComplexEigenSolver<CMatrix> es(d.P, false);
  const auto& ev = es.eigenvalues();
  d.eigenvalues.assign(ev.data(), ev.data() + ev.size());

  double eps = std::max(d.fixed_point_defect, 1e-15) * std::max(1.0, d.P.norm());
  double radius = std::max(tol.spectrum, 4.0 * std::sqrt(eps));
  std::vector<bool> used(d.eigenvalues.size(), false);
  for (std::size_t i = 0; i < d.eigenvalues.size(); ++i) {
    if (used[i]) continue;
    std::vector<cplx> cluster{d.eigenvalues[i]};
    used[i] = true;
    for (std::size_t j = i + 1; j < d.eigenvalues.size(); ++j)
      if (!used[j] && std::abs(d.eigenvalues[j] - d.eigenvalues[i]) <= radius) {
        cluster.push_back(d.eigenvalues[j]);
        used[j] = true;
      }
    cplx c = 0.0;
    for (auto z : cluster) c += z;
    c /= static_cast<double>(cluster.size());
    double mod_tol = std::max(tol.spectrum, cluster.size() > 1 ? 10.0 * eps : tol.spectrum);
    if (std::abs(std::abs(c) - 1.0) > mod_tol) continue;
    c /= std::abs(c);
    UnitEigenvalue u;
    u.lambda = c;
    u.theta = detail::theta_of(c);
    u.algebraic = static_cast<int>(cluster.size());
    u.geometric_P = numerical_nullity(d.P - c * CMatrix::Identity(2 * n, 2 * n), tol.rank).nullity;
    u.geometric_P0 =
        numerical_nullity(d.P0 - c * CMatrix::Identity(2 * n - 1, 2 * n - 1), tol.rank).nullity;
    d.unit_spectrum.push_back(u);
  }
  std::sort(d.unit_spectrum.begin(), d.unit_spectrum.end(),
            [](const UnitEigenvalue& x, const UnitEigenvalue& y) { return x.theta < y.theta; });
  return d;
}

struct NullityResult {
  int value = 0;
  bool resolution_warning = false;
};

namespace detail {

/// Right singular vectors of A for singular values at most tol * max(sigma_max, 1).
struct KernelBasis {
  CMatrix basis;
  bool borderline = false;
};

inline KernelBasis kernel_basis(const CMatrix& A, double tol_rel) {
  Eigen::JacobiSVD<CMatrix> svd(A, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  double thr = tol_rel * std::max(s.size() ? s(0) : 0.0, 1.0);
  KernelBasis out;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < A.cols(); ++i) {
    double si = i < s.size() ? s(i) : 0.0;
    if (si <= thr) cols.push_back(i);
    if (si > thr / 10.0 && si < thr * 10.0) out.borderline = true;
  }
  out.basis.resize(A.cols(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.basis.col(static_cast<Eigen::Index>(k)) = svd.matrixV().col(cols[k]);
  return out;
}

/// Ker(P^N - rho^N) as the direct sum of Ker(P - rho omega^j), j = 0..N-1. The
/// roots of x^N - rho^N are distinct, so the decomposition is exact, and P itself
/// is far better conditioned than its N-th power.
inline KernelBasis power_kernel(const PoincareData& d, CirclePoint rho, int N, double tol_rel) {
  if (N < 1) throw Error("iteration count N must be >= 1");
  const auto dim = d.P.rows();
  std::vector<CMatrix> parts;
  KernelBasis out;
  Eigen::Index total = 0;
  for (int j = 0; j < N; ++j) {
    cplx lam = CirclePoint(rho.theta() + static_cast<double>(j) / N).rho();
    auto kb = kernel_basis(d.P - lam * CMatrix::Identity(dim, dim), tol_rel);
    out.borderline = out.borderline || kb.borderline;
    total += kb.basis.cols();
    parts.push_back(std::move(kb.basis));
  }
  out.basis.resize(dim, total);
  Eigen::Index c = 0;
  for (const auto& b : parts) {
    out.basis.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  return out;
}

}  // namespace detail

/// nu_*(rho, N) = dim Ker(P^N - rho^N).
inline NullityResult nullity_star(const PoincareData& d, CirclePoint rho, int N, const Tolerances& tol = {}) {
  auto kb = detail::power_kernel(d, rho, N, tol.rank);
  return {static_cast<int>(kb.basis.cols()), kb.borderline};
}

/// nu_0(rho, N): equals nu_* unless rho^N = 1, where the kernel of P^N - 1 is
/// intersected with J_0 (the zero-pairing condition against Y).
inline NullityResult nullity_zero(const PoincareData& d, CirclePoint rho, int N, const Tolerances& tol = {}) {
  if (!rho.is_root_of_unity(N)) return nullity_star(d, rho, N, tol);
  auto kb = detail::power_kernel(d, rho, N, tol.rank);
  const int k = static_cast<int>(kb.basis.cols());
  if (k == 0) return {0, kb.borderline};
  Eigen::RowVectorXcd r = d.j0_functional.transpose() * kb.basis;
  // the basis is orthonormal within each block, so |r| is on the scale of 1
  bool cut = r.norm() > tol.rank;
  return {k - (cut ? 1 : 0), kb.borderline};
}

}  // namespace bott
