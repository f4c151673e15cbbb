#pragma once

// Continuous piecewise-linear Galerkin discretization of the quasi-periodic
// field space H^rho(N), the index form I_N, the pairing constraints and the
// restricted inertia counts lambda_*(rho,N), lambda_0(rho,N).
//
// Unknowns are the node values V_0..V_{m-1} (node-major, index i*n + c); the
// last node is eliminated through V_m = rho^N T^{-N} V_0.
//
// Constraints use G(t) = g(V,Y_N) - 2 int_0^t g(V,Y_N'), whose derivative is the
// conserved pairing g(V',Y_N) - g(V,Y_N'). With D_i = G(t_i) - G(t_{i-1}):
//   zero: D_i = 0 for all i            (G constant, pairing zero)
//   star: D_{i+1} = D_i for all i      (G affine, pairing constant)
// so the zero space sits inside the star space with codimension at most one.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/Sparse>

#include "bott/ode.hpp"
#include "bott/system.hpp"

namespace bott {

using CSparse = Eigen::SparseMatrix<cplx>;

struct Mesh {
  int m = 64;

  explicit Mesh(int m_ = 64) : m(m_) {
    if (m < 8) throw Error("mesh needs m >= 8 subintervals");
  }
  double h() const { return 1.0 / m; }
  double node(int i) const { return static_cast<double>(i) / m; }
  Mesh refined() const { return Mesh(2 * m); }
};

/// Node values of a piecewise-linear field in H^rho(N); V_m = boundary * V_0.
struct DiscreteField {
  int n = 0;
  int m = 0;
  CMatrix boundary;  ///< rho^N T^{-N}
  CVector coeffs;    ///< size n*m

  CVector node(int i) const {
    if (i == m) return boundary * coeffs.segment(0, n);
    return coeffs.segment(static_cast<Eigen::Index>(i) * n, n);
  }
};

namespace detail {

inline constexpr std::array<double, 3> gauss_x{0.5 - 0.3872983346207417, 0.5, 0.5 + 0.3872983346207417};
inline constexpr std::array<double, 3> gauss_w{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

/// Iterated data at t = (e + xi)/m, split into block and local coordinate with
/// integer arithmetic.
inline IteratedPoint element_point(const MorseSturmSystem& sys, int N, int m, int e, double xi) {
  long num = static_cast<long>(N) * e;
  long k = num / m;
  double r = (static_cast<double>(num % m) + N * xi) / m;
  while (r >= 1.0) {
    ++k;
    r -= 1.0;
  }
  return sys.iterated_split(N, static_cast<int>(k), r);
}

inline CMatrix boundary_map(const MorseSturmSystem& sys, int N, CirclePoint rho) {
  if (!sys.T_invertible()) throw ValidationError("T not invertible");
  return rho.rho_pow(N) * sys.T_power(-N).cast<cplx>();
}

/// Visits every element with its two global node blocks and their coefficient maps.
template <typename F>
void for_each_element(int m, const CMatrix& boundary, F&& f) {
  const auto n = boundary.rows();
  CMatrix I = CMatrix::Identity(n, n);
  for (int e = 0; e < m; ++e) {
    int b = e + 1;
    if (b == m) f(e, e, 0, I, boundary);
    else f(e, e, b, I, I);
  }
}

inline void add_block(std::vector<Eigen::Triplet<cplx>>& trip, int n, int row_block, int col_block,
                      const CMatrix& B) {
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (B(r, c) != cplx(0.0)) trip.emplace_back(row_block * n + r, col_block * n + c, B(r, c));
}

/// Assembles sum over elements of W^* K(q) V with local shape weights; `local`
/// returns the 2x2 block family K_ba (test node b, trial node a).
template <typename Local>
CSparse assemble_blocks(const MorseSturmSystem& sys, int N, CirclePoint rho, const Mesh& mesh, Local&& local) {
  const int n = sys.n(), m = mesh.m;
  CMatrix bmap = boundary_map(sys, N, rho);
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(static_cast<std::size_t>(m) * 4 * n * n);
  for_each_element(m, bmap, [&](int e, int ga, int gb, const CMatrix& Aa, const CMatrix& Ab) {
    std::array<std::array<Matrix, 2>, 2> K = local(e);
    const std::array<int, 2> blk{ga, gb};
    const std::array<const CMatrix*, 2> A{&Aa, &Ab};
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) add_block(trip, n, blk[b], blk[a], A[b]->adjoint() * K[b][a].cast<cplx>() * *A[a]);
  });
  CSparse H(static_cast<Eigen::Index>(n) * m, static_cast<Eigen::Index>(n) * m);
  H.setFromTriplets(trip.begin(), trip.end());
  CSparse Ht = H.adjoint();
  CSparse out = 0.5 * (H + Ht);
  out.makeCompressed();
  return out;
}

}  // namespace detail

/// Matrix H of I_N on the discrete space: I_N(V,W) = w^* H v. Derivative term
/// exact, R term by 3-point Gauss per element.
inline CSparse assemble_form(const MorseSturmSystem& sys, int N, CirclePoint rho, const Mesh& mesh) {
  const Matrix& G = sys.g();
  const double h = mesh.h(), N2 = static_cast<double>(N) * N;
  return detail::assemble_blocks(sys, N, rho, mesh, [&](int e) {
    std::array<std::array<Matrix, 2>, 2> K;
    K[0][0] = G / h;
    K[1][1] = G / h;
    K[0][1] = -G / h;
    K[1][0] = -G / h;
    for (int q = 0; q < 3; ++q) {
      double x = detail::gauss_x[q];
      std::array<double, 2> phi{1.0 - x, x};
      Matrix GR = G * detail::element_point(sys, N, mesh.m, e, x).R;
      for (int b = 0; b < 2; ++b)
        for (int a = 0; a < 2; ++a) K[b][a] += (N2 * h * detail::gauss_w[q] * phi[a] * phi[b]) * GR;
    }
    return K;
  });
}

/// Gram matrix of the L^2 product int g_t^N(V,W) dt, positive definite.
inline CSparse assemble_mass(const MorseSturmSystem& sys, int N, CirclePoint rho, const Mesh& mesh) {
  const int n = sys.n();
  const double h = mesh.h();
  return detail::assemble_blocks(sys, N, rho, mesh, [&](int e) {
    std::array<std::array<Matrix, 2>, 2> K;
    for (auto& row : K)
      for (auto& b : row) b = Matrix::Zero(n, n);
    for (int q = 0; q < 3; ++q) {
      double x = detail::gauss_x[q];
      std::array<double, 2> phi{1.0 - x, x};
      Matrix Gt = sys.positive_metric_matrix(detail::element_point(sys, N, mesh.m, e, x).Y);
      for (int b = 0; b < 2; ++b)
        for (int a = 0; a < 2; ++a) K[b][a] += (h * detail::gauss_w[q] * phi[a] * phi[b]) * Gt;
    }
    return K;
  });
}

/// Rows D_1..D_m of the increments of G(t) over the elements.
inline CMatrix constraint_increments(const MorseSturmSystem& sys, int N, CirclePoint rho, const Mesh& mesh) {
  const int n = sys.n(), m = mesh.m;
  const double h = mesh.h();
  const Matrix& G = sys.g();
  CMatrix bmap = detail::boundary_map(sys, N, rho);
  CMatrix D = CMatrix::Zero(m, static_cast<Eigen::Index>(n) * m);
  detail::for_each_element(m, bmap, [&](int e, int ga, int gb, const CMatrix& Aa, const CMatrix& Ab) {
    Vector ya = detail::element_point(sys, N, m, e, 0.0).Y;
    Vector yb = detail::element_point(sys, N, m, e, 1.0).Y;
    Eigen::RowVectorXd ra = -(G * ya).transpose(), rb = (G * yb).transpose();
    for (int q = 0; q < 3; ++q) {
      double x = detail::gauss_x[q];
      Eigen::RowVectorXd gdy = (G * detail::element_point(sys, N, m, e, x).dY).transpose();
      ra -= (2.0 * h * detail::gauss_w[q] * (1.0 - x)) * gdy;
      rb -= (2.0 * h * detail::gauss_w[q] * x) * gdy;
    }
    D.block(e, static_cast<Eigen::Index>(ga) * n, 1, n) += ra.cast<cplx>() * Aa;
    D.block(e, static_cast<Eigen::Index>(gb) * n, 1, n) += rb.cast<cplx>() * Ab;
  });
  return D;
}

/// Constraint matrix C with C v = 0 describing the discrete H_0 (zero) or H_* (star).
inline CMatrix assemble_constraints(const MorseSturmSystem& sys, int N, CirclePoint rho, const Mesh& mesh,
                                   ConstraintKind kind) {
  CMatrix D = constraint_increments(sys, N, rho, mesh);
  if (kind == ConstraintKind::zero) return D;
  const int m = mesh.m;
  CMatrix C(m - 1, D.cols());
  for (int i = 0; i + 1 < m; ++i) C.row(i) = D.row(i + 1) - D.row(i);
  return C;
}

/// Orthonormal basis of the null space of C, from a column-pivoted QR of C^*.
struct NullSpace {
  CMatrix Z;
  int rank = 0;
  int expected_rank = 0;
  bool deficient = false;  ///< rank below the row count
};

inline NullSpace null_space(const CMatrix& C, double tol_rel = 1e-12) {
  NullSpace out;
  const auto dim = C.cols();
  out.expected_rank = static_cast<int>(C.rows());
  if (C.rows() == 0) {
    out.Z = CMatrix::Identity(dim, dim);
    return out;
  }
  // rows scaled to unit length so the rank threshold is relative per row
  CMatrix Cn = C;
  for (Eigen::Index i = 0; i < Cn.rows(); ++i) {
    double r = Cn.row(i).norm();
    if (r > 0) Cn.row(i) /= r;
  }
  Eigen::ColPivHouseholderQR<CMatrix> qr(Cn.adjoint());
  qr.setThreshold(tol_rel * std::sqrt(static_cast<double>(dim)));
  out.rank = static_cast<int>(qr.rank());
  out.deficient = out.rank < out.expected_rank;
  CMatrix E = CMatrix::Zero(dim, dim - out.rank);
  E.bottomRows(dim - out.rank).setIdentity();
  out.Z = qr.householderQ() * E;
  return out;
}

struct IndexOptions {
  Tolerances tol{};
  bool want_kernel = false;       ///< also return kernel fields
  std::uint64_t rotate_seed = 0;  ///< nonzero: replace Z by Z U with a seeded random unitary U
};

struct IndexResult {
  int lambda = 0;
  int discrete_nullity = 0;
  int ode_nullity = 0;
  bool nullity_agrees = true;
  bool constraint_deficient = false;
  int mesh = 0;
  int reduced_dim = 0;
  double window = 0.0;                     ///< kernel window on the generalized eigenvalues
  std::vector<double> smallest_eigenvalues;  ///< up to 8 eigenvalues of smallest modulus
  std::vector<DiscreteField> kernel;
};

/// Kernel window for the generalized eigenvalues of (Z^*HZ, Z^*MZ): a fixed
/// multiple of h^2 times the squared frequency scale of the iterated problem.
inline double kernel_window(const MorseSturmSystem& sys, int N, const Mesh& mesh, const Tolerances& tol) {
  double scale = 1.0 + static_cast<double>(N) * N * sys.r_max() + two_pi * two_pi;
  return tol.eig * scale * scale * mesh.h() * mesh.h();
}

/// Inertia of I_N restricted to the discrete H_kind^rho(N). `ode_nullity` is
/// the exact kernel dimension; the ode_nullity eigenvalues of smallest modulus
/// are taken as kernel when they fall inside the window, everything else is
/// counted by sign.
inline IndexResult restricted_index(const MorseSturmSystem& sys, int N, CirclePoint rho, const Mesh& mesh,
                                    ConstraintKind kind, int ode_nullity, const IndexOptions& opt = {}) {
  IndexResult res;
  res.mesh = mesh.m;
  res.ode_nullity = ode_nullity;
  CSparse H = assemble_form(sys, N, rho, mesh);
  CSparse Mm = assemble_mass(sys, N, rho, mesh);
  NullSpace ns = null_space(assemble_constraints(sys, N, rho, mesh, kind));
  res.constraint_deficient = ns.deficient;
  CMatrix Z = std::move(ns.Z);
  if (opt.rotate_seed != 0) {
    std::mt19937_64 rng(opt.rotate_seed);
    std::normal_distribution<double> nd;
    CMatrix X(Z.cols(), Z.cols());
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = cplx(nd(rng), nd(rng));
    Eigen::HouseholderQR<CMatrix> qr(X);
    CMatrix U = qr.householderQ() * CMatrix::Identity(X.rows(), X.cols());
    Z = Z * U;
  }
  const auto d = Z.cols();
  res.reduced_dim = static_cast<int>(d);
  CMatrix Hr = Z.adjoint() * (H * Z);
  CMatrix Mr = Z.adjoint() * (Mm * Z);
  Hr = 0.5 * (Hr + Hr.adjoint()).eval();
  Mr = 0.5 * (Mr + Mr.adjoint()).eval();
  Eigen::LLT<CMatrix> llt(Mr);
  if (llt.info() != Eigen::Success) throw NonconvergenceError("reduced mass matrix not positive definite");
  CMatrix Li = llt.matrixL().solve(CMatrix::Identity(d, d));
  CMatrix A = Li * Hr * Li.adjoint();
  A = 0.5 * (A + A.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(A, opt.want_kernel ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  const Vector& mu = es.eigenvalues();

  res.window = kernel_window(sys, N, mesh, opt.tol);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(mu(a)) < std::abs(mu(b)); });
  std::vector<bool> is_kernel(static_cast<std::size_t>(d), false);
  for (int j = 0; j < std::min<Eigen::Index>(ode_nullity, d); ++j)
    if (std::abs(mu(order[j])) <= res.window) {
      is_kernel[order[j]] = true;
      ++res.discrete_nullity;
    }
  for (Eigen::Index i = 0; i < d; ++i)
    if (!is_kernel[i] && mu(i) < 0.0) ++res.lambda;
  res.nullity_agrees = res.discrete_nullity == ode_nullity;
  for (Eigen::Index j = 0; j < std::min<Eigen::Index>(8, d); ++j) res.smallest_eigenvalues.push_back(mu(order[j]));

  if (opt.want_kernel) {
    CMatrix bmap = detail::boundary_map(sys, N, rho);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!is_kernel[i]) continue;
      CVector x = llt.matrixU().solve(es.eigenvectors().col(i));
      res.kernel.push_back({sys.n(), mesh.m, bmap, Z * x});
    }
  }
  return res;
}

/// Overload that reads the exact nullity from the Poincare data.
inline IndexResult restricted_index(const MorseSturmSystem& sys, const PoincareData& pd, int N, CirclePoint rho,
                                    const Mesh& mesh, ConstraintKind kind, const IndexOptions& opt = {}) {
  int nu = kind == ConstraintKind::star ? nullity_star(pd, rho, N, opt.tol).value
                                        : nullity_zero(pd, rho, N, opt.tol).value;
  return restricted_index(sys, N, rho, mesh, kind, nu, opt);
}

struct RefinedIndex {
  int lambda = 0;
  int discrete_nullity = 0;
  int ode_nullity = 0;
  bool monotone = true;
  std::vector<int> meshes;
  std::vector<int> lambdas;
  IndexResult last;
};

/// Dyadic refinement from mesh0 until two successive lambdas agree and the
/// discrete nullity matches the exact one. At least two meshes are evaluated.
inline RefinedIndex lambda_with_refinement(const MorseSturmSystem& sys, int N, CirclePoint rho, ConstraintKind kind,
                                           const Mesh& mesh0, int ode_nullity, const IndexOptions& opt = {},
                                           int max_refinements = 4) {
  RefinedIndex out;
  out.ode_nullity = ode_nullity;
  Mesh mesh = mesh0;
  for (int level = 0; level <= max_refinements; ++level) {
    IndexResult r = restricted_index(sys, N, rho, mesh, kind, ode_nullity, opt);
    if (!out.lambdas.empty() && r.lambda < out.lambdas.back()) out.monotone = false;
    out.meshes.push_back(mesh.m);
    out.lambdas.push_back(r.lambda);
    out.last = std::move(r);
    std::size_t k = out.lambdas.size();
    if (k >= 2 && out.lambdas[k - 1] == out.lambdas[k - 2] && out.last.nullity_agrees) {
      out.lambda = out.lambdas.back();
      out.discrete_nullity = out.last.discrete_nullity;
      return out;
    }
    mesh = mesh.refined();
  }
  std::string seq;
  for (std::size_t i = 0; i < out.lambdas.size(); ++i)
    seq += (i ? "," : "") + std::to_string(out.lambdas[i]) + "@" + std::to_string(out.meshes[i]);
  throw NonconvergenceError("index did not stabilize (theta=" + std::to_string(rho.theta()) +
                            ", N=" + std::to_string(N) + ", kind=" + to_string(kind) + ", sequence " + seq +
                            ", discrete nullity " + std::to_string(out.last.discrete_nullity) + " vs exact " +
                            std::to_string(ode_nullity) + ")");
}

inline RefinedIndex lambda_with_refinement(const MorseSturmSystem& sys, const PoincareData& pd, int N,
                                           CirclePoint rho, ConstraintKind kind, const Mesh& mesh0,
                                           const IndexOptions& opt = {}, int max_refinements = 4) {
  int nu = kind == ConstraintKind::star ? nullity_star(pd, rho, N, opt.tol).value
                                        : nullity_zero(pd, rho, N, opt.tol).value;
  return lambda_with_refinement(sys, N, rho, kind, mesh0, nu, opt, max_refinements);
}

/// epsilon of the N-th iterate: lambda_*(1,N) - lambda_0(1,N), both stabilized.
inline int epsilon(const MorseSturmSystem& sys, const PoincareData& pd, const Mesh& mesh0, int N = 1,
                   const IndexOptions& opt = {}) {
  CirclePoint one(0.0);
  int ls = lambda_with_refinement(sys, pd, N, one, ConstraintKind::star, mesh0, opt).lambda;
  int l0 = lambda_with_refinement(sys, pd, N, one, ConstraintKind::zero, mesh0, opt).lambda;
  int eps = ls - l0;
  if (eps != 0 && eps != 1)
    throw NonconvergenceError("lambda_* - lambda_0 = " + std::to_string(eps) + " outside {0,1}; mesh too coarse");
  return eps;
}

struct KernelResidual {
  double ode_residual = 0.0;        ///< discrete L^2 norm of V'' - N^2 R_N V relative to the field
  double boundary_value = 0.0;      ///< |T^N V(1) - rho^N V(0)|
  double boundary_derivative = 0.0; ///< |T^N V'(1) - rho^N V'(0)| from one-sided differences
};

/// Residual of a kernel field against V'' = N^2 R_N V and the quasi-periodic
/// boundary conditions. Second differences at nodes use the quasi-periodic
/// neighbours across the boundary.
inline KernelResidual kernel_residual_check(const MorseSturmSystem& sys, int N, CirclePoint rho,
                                            const DiscreteField& V) {
  const int m = V.m;
  const double h = 1.0 / m, N2 = static_cast<double>(N) * N;
  CMatrix Binv = V.boundary.inverse();
  auto node = [&](int i) -> CVector {
    if (i < 0) return Binv * V.node(m + i);
    if (i > m) return V.boundary * V.node(i - m);
    return V.node(i);
  };
  double res2 = 0.0, norm2 = 0.0;
  for (int i = 0; i < m; ++i) {
    CVector vi = node(i);
    CVector r = (node(i + 1) - 2.0 * vi + node(i - 1)) / (h * h) -
                N2 * detail::element_point(sys, N, m, i, 0.0).R.cast<cplx>() * vi;
    res2 += h * r.squaredNorm();
    norm2 += h * vi.squaredNorm();
  }
  KernelResidual out;
  double scale = std::sqrt(norm2) * (1.0 + N2 * sys.r_max() + two_pi * two_pi);
  out.ode_residual = scale > 0 ? std::sqrt(res2) / scale : 0.0;
  CMatrix TN = sys.T_power(N).cast<cplx>();
  cplx rN = rho.rho_pow(N);
  out.boundary_value = (TN * node(m) - rN * node(0)).norm();
  CVector d0 = (-3.0 * node(0) + 4.0 * node(1) - node(2)) / (2.0 * h);
  CVector d1 = (3.0 * node(m) - 4.0 * node(m - 1) + node(m - 2)) / (2.0 * h);
  out.boundary_derivative = (TN * d1 - rN * d0).norm();
  return out;
}

}  // namespace bott
