#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bott/galerkin.hpp"
#include "bott/generators.hpp"

using namespace bott;
namespace gen = bott::generators;

namespace {

const double pi = std::numbers::pi;
const double k9 = 9 * pi * pi;

std::vector<double> sorted_eigs(const CSparse& H) {
  CMatrix D = CMatrix(H);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(D, Eigen::EigenvaluesOnly);
  std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(v.begin(), v.end());
  return v;
}

// nodal interpolant of a field given by f(t)
template <typename F>
CVector interpolate(int n, int m, F f) {
  CVector v(static_cast<Eigen::Index>(n) * m);
  for (int i = 0; i < m; ++i) v.segment(static_cast<Eigen::Index>(i) * n, n) = f(static_cast<double>(i) / m);
  return v;
}

}  // namespace

TEST(Mesh, RejectsCoarseMeshes) {
  EXPECT_THROW(Mesh(4), Error);
  EXPECT_EQ(Mesh(16).refined().m, 32);
}

// ---------------------------------------------------------------- assembly

TEST(Assembly, FlatStiffnessMatchesCirculantSpectrum) {
  auto sys = gen::flat(2);
  for (double th : {0.0, 0.3}) {
    const int m = 32;
    auto ev = sorted_eigs(assemble_form(sys, 1, CirclePoint(th), Mesh(m)));
    std::vector<double> oracle;
    for (int j = 0; j < m; ++j) {
      double l = (2.0 - 2.0 * std::cos(two_pi * (j + th) / m)) * m;
      oracle.push_back(l);
      oracle.push_back(-l);
    }
    std::sort(oracle.begin(), oracle.end());
    ASSERT_EQ(ev.size(), oracle.size());
    for (std::size_t i = 0; i < ev.size(); ++i) EXPECT_NEAR(ev[i], oracle[i], 1e-9 * m) << i;
  }
}

TEST(Assembly, FlatStiffnessInertiaAtOne) {
  const int m = 40;
  auto ev = sorted_eigs(assemble_form(gen::flat(2), 1, CirclePoint(0.0), Mesh(m)));
  int neg = 0, zero = 0;
  for (double x : ev) {
    if (std::abs(x) < 1e-9) ++zero;
    else if (x < 0) ++neg;
  }
  EXPECT_EQ(neg, m - 1);
  EXPECT_EQ(zero, 2);
}

TEST(Assembly, FormIsHermitianInBothOrders) {
  auto sys = gen::random_tilted(4, 3);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  CSparse H = assemble_form(sys, 2, CirclePoint(0.37), Mesh(24));
  CVector v(H.cols()), w(H.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = {nd(rng), nd(rng)};
    w(i) = {nd(rng), nd(rng)};
  }
  cplx a = w.dot(H * v), b = v.dot(H * w);
  EXPECT_NEAR(std::abs(a - std::conj(b)), 0.0, 1e-10 * std::abs(a));
  CSparse M = assemble_mass(sys, 2, CirclePoint(0.37), Mesh(24));
  Eigen::SelfAdjointEigenSolver<CMatrix> es{CMatrix(M), Eigen::EigenvaluesOnly};
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

TEST(Assembly, QuadraticFormConvergesAtSecondOrder) {
  // V = (0, cos 2 pi t) on the oscillator: I(V,V) = (4 pi^2 - k) / 2
  auto sys = gen::oscillator({k9});
  const double exact = 0.5 * (4 * pi * pi - k9);
  std::vector<double> err;
  for (int m : {16, 32, 64, 128}) {
    CVector v = interpolate(2, m, [](double t) {
      CVector x(2);
      x << 0.0, std::cos(two_pi * t);
      return x;
    });
    double val = v.dot(assemble_form(sys, 1, CirclePoint(0.0), Mesh(m)) * v).real();
    err.push_back(std::abs(val - exact));
  }
  for (std::size_t i = 0; i + 1 < err.size(); ++i) {
    double ratio = err[i] / err[i + 1];
    EXPECT_GT(ratio, 3.5) << i;
    EXPECT_LT(ratio, 4.5) << i;
  }
}

TEST(Assembly, MassOfConstantFieldIsExact) {
  // g_t = identity for Y = e0, so the mass of (1,1) is 2
  auto sys = gen::flat(2);
  const int m = 16;
  CVector v = interpolate(2, m, [](double) { return CVector(CVector::Ones(2)); });
  EXPECT_NEAR(v.dot(assemble_mass(sys, 1, CirclePoint(0.0), Mesh(m)) * v).real(), 2.0, 1e-13);
}

// ---------------------------------------------------------------- constraints

TEST(Constraints, ConstantYOffOneIsPointwiseOrthogonal) {
  auto sys = gen::oscillator({k9, 4.0});
  const int n = 3, m = 20;
  CirclePoint rho(0.3);
  auto ns = null_space(assemble_constraints(sys, 1, rho, Mesh(m), ConstraintKind::zero));
  EXPECT_FALSE(ns.deficient);
  EXPECT_EQ(ns.Z.cols(), (n - 1) * m);
  for (Eigen::Index c = 0; c < ns.Z.cols(); ++c)
    for (int i = 0; i < m; ++i) EXPECT_NEAR(std::abs(ns.Z(static_cast<Eigen::Index>(i) * n, c)), 0.0, 1e-12);
  auto st = null_space(assemble_constraints(sys, 1, rho, Mesh(m), ConstraintKind::star));
  EXPECT_EQ(st.Z.cols(), (n - 1) * m + 1);
}

TEST(Constraints, StarExceedsZeroByAtMostOne) {
  for (const auto& sys : {gen::random_tilted(1, 2), gen::random_tilted(2, 3), gen::flat(3, {0.5})})
    for (double th : {0.0, 0.2, 0.5})
      for (int N : {1, 2}) {
        Mesh mesh(16 * N);
        auto z = null_space(assemble_constraints(sys, N, CirclePoint(th), mesh, ConstraintKind::zero));
        auto s = null_space(assemble_constraints(sys, N, CirclePoint(th), mesh, ConstraintKind::star));
        auto diff = s.Z.cols() - z.Z.cols();
        EXPECT_GE(diff, 0);
        EXPECT_LE(diff, 1);
        // the zero space sits inside the star space
        CMatrix C = assemble_constraints(sys, N, CirclePoint(th), mesh, ConstraintKind::star);
        EXPECT_LE((C * z.Z).norm(), 1e-10 * std::max(1.0, C.norm()));
      }
}

TEST(Constraints, ConstantYAtOneKeepsConstantTimeComponent) {
  auto sys = gen::flat(2);
  const int m = 16;
  auto ns = null_space(assemble_constraints(sys, 1, CirclePoint(0.0), Mesh(m), ConstraintKind::zero));
  EXPECT_EQ(ns.Z.cols(), m + 1);
}

// ---------------------------------------------------------------- indices

TEST(Index, FlatSystem) {
  auto sys = gen::flat(2);
  auto pd = poincare(sys, 1000);
  for (double th : {0.0, 0.25, 0.5, 0.8}) {
    auto r = restricted_index(sys, pd, 1, CirclePoint(th), Mesh(32), ConstraintKind::zero);
    EXPECT_EQ(r.lambda, 0) << th;
    EXPECT_TRUE(r.nullity_agrees);
  }
  // star off one adds the linear time component a + (rho - 1) a t
  EXPECT_EQ(restricted_index(sys, pd, 1, CirclePoint(0.25), Mesh(32), ConstraintKind::star).lambda, 1);
  EXPECT_EQ(restricted_index(sys, pd, 1, CirclePoint(0.0), Mesh(32), ConstraintKind::star).lambda, 0);
}

TEST(Index, OscillatorMatchesClosedForm) {
  auto sys = gen::oscillator({k9});
  auto pd = poincare(sys, 1000);
  for (double th : {0.0, 0.125, 0.25, 0.5, 0.75}) {
    auto r = lambda_with_refinement(sys, pd, 1, CirclePoint(th), ConstraintKind::zero, Mesh(64));
    EXPECT_EQ(r.lambda, gen::oracle_lambda_oscillator({k9}, th)) << th;
    EXPECT_GE(r.meshes.size(), 2u);
  }
  EXPECT_EQ(restricted_index(sys, pd, 1, CirclePoint(0.25), Mesh(64), ConstraintKind::star).lambda, 4);
  auto half = restricted_index(sys, pd, 1, CirclePoint(0.5), Mesh(64), ConstraintKind::zero);
  EXPECT_EQ(half.discrete_nullity, 2);
}

TEST(Index, TwoSpringsAndStaticProduct) {
  std::vector<double> ks{pi * pi, 25 * pi * pi};
  auto sys = gen::oscillator(ks);
  auto pd = poincare(sys, 1000);
  for (double th : {0.1, 0.3})
    EXPECT_EQ(lambda_with_refinement(sys, pd, 1, CirclePoint(th), ConstraintKind::zero, Mesh(64)).lambda,
              gen::oracle_lambda_oscillator(ks, th));
  auto st = gen::static_product(ks);
  auto pst = poincare(st, 1000);
  EXPECT_EQ(lambda_with_refinement(st, pst, 1, CirclePoint(0.3), ConstraintKind::zero, Mesh(64)).lambda,
            gen::oracle_lambda_oscillator(ks, 0.3));
}

TEST(Index, StarBoundsAndConjugation) {
  for (const auto& sys : {gen::random_tilted(1, 2), gen::random_tilted(2, 3), gen::oscillator({k9})}) {
    auto pd = poincare(sys, 1000);
    for (double th : {0.0, 0.2, 0.5}) {
      int l0 = lambda_with_refinement(sys, pd, 1, CirclePoint(th), ConstraintKind::zero, Mesh(64)).lambda;
      int ls = lambda_with_refinement(sys, pd, 1, CirclePoint(th), ConstraintKind::star, Mesh(64)).lambda;
      EXPECT_LE(l0, ls) << sys.label() << " " << th;
      EXPECT_LE(ls, l0 + 1) << sys.label() << " " << th;
    }
    int a = lambda_with_refinement(sys, pd, 1, CirclePoint(0.2), ConstraintKind::zero, Mesh(64)).lambda;
    int b = lambda_with_refinement(sys, pd, 1, CirclePoint(0.8), ConstraintKind::zero, Mesh(64)).lambda;
    EXPECT_EQ(a, b) << sys.label();
  }
}

TEST(Index, InvariantUnderRandomBasisRotation) {
  auto sys = gen::random_tilted(3, 3);
  auto pd = poincare(sys, 1000);
  auto base = restricted_index(sys, pd, 1, CirclePoint(0.3), Mesh(48), ConstraintKind::zero);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    IndexOptions opt;
    opt.rotate_seed = seed;
    auto r = restricted_index(sys, pd, 1, CirclePoint(0.3), Mesh(48), ConstraintKind::zero, opt);
    EXPECT_EQ(r.lambda, base.lambda);
    EXPECT_EQ(r.discrete_nullity, base.discrete_nullity);
  }
}

TEST(Index, RefinementFailureIsReported) {
  // exact nullity 5 cannot be matched: the window never holds five eigenvalues
  auto sys = gen::oscillator({k9});
  EXPECT_THROW(lambda_with_refinement(sys, 1, CirclePoint(0.3), ConstraintKind::zero, Mesh(16), 5, {}, 1),
               NonconvergenceError);
}

TEST(Epsilon, KnownSystems) {
  for (const auto& sys : {gen::flat(2), gen::oscillator({k9})}) {
    auto pd = poincare(sys, 1000);
    EXPECT_EQ(epsilon(sys, pd, Mesh(64)), 0) << sys.label();
  }
  auto sys = gen::random_tilted(5, 3);
  auto pd = poincare(sys, 1000);
  int e = epsilon(sys, pd, Mesh(64));
  EXPECT_TRUE(e == 0 || e == 1);
}

// ---------------------------------------------------------------- kernel fields

TEST(Kernel, FlatConstantsAreExact) {
  auto sys = gen::flat(2);
  IndexOptions opt;
  opt.want_kernel = true;
  auto r = restricted_index(sys, 1, CirclePoint(0.0), Mesh(32), ConstraintKind::zero, 2, opt);
  ASSERT_EQ(r.kernel.size(), 2u);
  for (const auto& V : r.kernel) {
    auto res = kernel_residual_check(sys, 1, CirclePoint(0.0), V);
    EXPECT_NEAR(res.ode_residual, 0.0, 1e-10);
    EXPECT_NEAR(res.boundary_value, 0.0, 1e-10);
    EXPECT_NEAR(res.boundary_derivative, 0.0, 1e-8);
  }
}

TEST(Kernel, OscillatorHalfTurnMatchesClosedForm) {
  auto sys = gen::oscillator({k9});
  IndexOptions opt;
  opt.want_kernel = true;
  const int m = 128;
  auto r = restricted_index(sys, 1, CirclePoint(0.5), Mesh(m), ConstraintKind::zero, 2, opt);
  ASSERT_EQ(r.kernel.size(), 2u);
  // each kernel field lies, up to O(h^2), in span{cos 3 pi t, sin 3 pi t} e1
  Eigen::MatrixXcd B(m, 2);
  for (int i = 0; i < m; ++i) {
    double t = static_cast<double>(i) / m;
    B(i, 0) = std::cos(3 * pi * t);
    B(i, 1) = std::sin(3 * pi * t);
  }
  for (const auto& V : r.kernel) {
    CVector x(m), tc(m);
    for (int i = 0; i < m; ++i) {
      x(i) = V.node(i)(1);
      tc(i) = V.node(i)(0);
    }
    CVector c = B.colPivHouseholderQr().solve(x);
    EXPECT_LE((B * c - x).norm(), 1e-2 * x.norm());
    EXPECT_LE(tc.norm(), 1e-8 * x.norm());
    auto res = kernel_residual_check(sys, 1, CirclePoint(0.5), V);
    EXPECT_LE(res.ode_residual, 1e-2);
    EXPECT_LE(res.boundary_value, 1e-10 * x.norm());
    EXPECT_LE(res.boundary_derivative, 1e-1 * x.norm());
  }
}

TEST(Kernel, NoKernelAwayFromSpectrum) {
  auto sys = gen::random_tilted(2, 3);
  auto pd = poincare(sys, 1000);
  IndexOptions opt;
  opt.want_kernel = true;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 3; ++i) {
    double th = u(rng);
    bool near = false;
    for (const auto& s : pd.unit_spectrum) near = near || circle_distance(s.theta, th) < 1e-3;
    if (near) continue;
    auto r = restricted_index(sys, pd, 1, CirclePoint(th), Mesh(32), ConstraintKind::zero, opt);
    EXPECT_EQ(r.ode_nullity, 0);
    EXPECT_TRUE(r.kernel.empty());
  }
}
