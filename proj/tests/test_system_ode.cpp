#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bott/generators.hpp"
#include "bott/ode.hpp"
#include "bott/system.hpp"
#include "bott/validation.hpp"

using namespace bott;
namespace gen = bott::generators;

namespace {

const double pi = std::numbers::pi;

const ValidationCheck& check(const ValidationReport& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name) return c;
  throw std::runtime_error("no check " + name);
}

Matrix rotation_t_x(double a) {
  Matrix T = Matrix::Identity(2, 2);
  T << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return T;
}

std::vector<MorseSturmSystem> suite() {
  return {gen::flat(2),           gen::flat(3, {1.0}),        gen::oscillator({9 * pi * pi}),
          gen::random_tilted(1, 2), gen::random_tilted(2, 3),
          gen::boost(3, 0.5, ScalarTrig{}, {0.0, -4.0})};
}

}  // namespace

// ---------------------------------------------------------------- validation

TEST(Validate, FlatSystemPassesWithZeroResiduals) {
  auto rep = validate(gen::flat(2));
  EXPECT_TRUE(rep.passed);
  for (const auto& c : rep.checks) {
    if (c.name == "metric_nondegenerate" || c.name == "metric_index" || c.name == "T_invertible" ||
        c.name == "Y_timelike")
      continue;
    EXPECT_EQ(c.residual, 0.0) << c.name;
  }
}

TEST(Validate, IndexZeroMetricIsRejected) {
  MorseSturmSystem sys(Matrix::Identity(2, 2), Matrix::Identity(2, 2), ConstantMatrix{Matrix::Zero(2, 2)},
                       ConstantVector{Vector::Unit(2, 0)});
  auto rep = validate(sys);
  EXPECT_FALSE(rep.passed);
  EXPECT_FALSE(check(rep, "metric_index").passed);
  EXPECT_NE(check(rep, "metric_index").diagnostic.find("metric index != 1"), std::string::npos);
  EXPECT_THROW(require_valid(rep), ValidationError);
}

TEST(Validate, RotationMixingTimeAndSpaceIsNotGPreserving) {
  MorseSturmSystem sys(gen::lorentz_metric(2), rotation_t_x(pi / 3), ConstantMatrix{Matrix::Zero(2, 2)},
                       ConstantVector{Vector::Unit(2, 0)});
  auto rep = validate(sys);
  EXPECT_FALSE(check(rep, "T_g_preserving").passed);
  // direct check of g - T^T g T
  Matrix T = rotation_t_x(pi / 3), g = gen::lorentz_metric(2);
  EXPECT_GT((g - T.transpose() * g * T).norm(), 0.5);
}

TEST(Validate, DistinctDiagnostics) {
  Matrix g = gen::lorentz_metric(2);
  g(0, 1) = 0.1;
  MorseSturmSystem asym(g, Matrix::Identity(2, 2), ConstantMatrix{Matrix::Zero(2, 2)},
                        ConstantVector{Vector::Unit(2, 0)});
  EXPECT_FALSE(check(validate(asym), "metric_symmetric").passed);
  MorseSturmSystem singT(gen::lorentz_metric(2), Matrix::Zero(2, 2), ConstantMatrix{Matrix::Zero(2, 2)},
                         ConstantVector{Vector::Unit(2, 0)});
  EXPECT_FALSE(check(validate(singT), "T_invertible").passed);
  MorseSturmSystem spacelike(gen::lorentz_metric(2), Matrix::Identity(2, 2), ConstantMatrix{Matrix::Zero(2, 2)},
                             ConstantVector{Vector::Unit(2, 1)});
  EXPECT_FALSE(check(validate(spacelike), "Y_timelike").passed);
}

TEST(Validate, WrongYIsDetectedByReintegration) {
  // Y = e1 does not solve V'' = R V when R e1 != 0
  Matrix R = Matrix::Zero(2, 2);
  R(0, 0) = 1.0;
  MorseSturmSystem sys(gen::lorentz_metric(2), Matrix::Identity(2, 2), ConstantMatrix{R},
                       ConstantVector{Vector::Unit(2, 0)});
  EXPECT_FALSE(check(validate(sys), "Y_solves_ode").passed);
}

TEST(Validate, MalformedShapesThrow) {
  EXPECT_THROW(MorseSturmSystem(gen::lorentz_metric(2), Matrix::Identity(3, 3), ConstantMatrix{Matrix::Zero(2, 2)},
                                ConstantVector{Vector::Unit(2, 0)}),
               ValidationError);
  EXPECT_THROW(MorseSturmSystem(gen::lorentz_metric(2), Matrix::Identity(2, 2), ConstantMatrix{Matrix::Zero(3, 3)},
                                ConstantVector{Vector::Unit(2, 0)}),
               ValidationError);
}

TEST(Validate, EveryGeneratorValidates) {
  for (const auto& sys : suite()) {
    auto rep = validate(sys);
    EXPECT_TRUE(rep.passed) << sys.label() << ": " << (rep.first_failure() ? rep.first_failure()->name : "");
  }
  for (std::uint64_t seed = 1; seed <= 5; ++seed) EXPECT_TRUE(validate(gen::random_tilted(seed, 3)).passed);
  EXPECT_TRUE(validate(gen::static_product({pi * pi, 25 * pi * pi})).passed);
}

// ---------------------------------------------------------------- iterated data

TEST(IteratedData, FlatSystem) {
  auto sys = gen::flat(2);
  for (int N : {1, 3})
    for (double t : {0.0, 0.3, 1.0}) {
      auto p = sys.iterated(N, t);
      EXPECT_EQ(p.R.norm(), 0.0);
      EXPECT_EQ(p.Y, Vector::Unit(2, 0));
      EXPECT_EQ(p.dY.norm(), 0.0);
    }
  EXPECT_THROW(sys.iterated(0, 0.5), Error);
}

TEST(IteratedData, RotationFixesTimelikeAxis) {
  auto sys = gen::flat(3, {0.7});
  auto p = sys.iterated(3, 0.5);  // tN = 1.5
  EXPECT_EQ(p.R.norm(), 0.0);
  EXPECT_NEAR((p.Y - Vector::Unit(3, 0)).norm(), 0.0, 1e-15);
}

TEST(IteratedData, ExtensionRuleAgainstDirectFormula) {
  // R(t) = A + B cos 2 pi t with T a spatial rotation: R(1.5) = T^{-1} R(0.5) T
  Matrix A = Matrix::Zero(3, 3), B = Matrix::Zero(3, 3);
  A(1, 1) = -2.0;
  A(2, 2) = -5.0;
  B(1, 2) = B(2, 1) = 1.0;
  Matrix T = Matrix::Identity(3, 3);
  T.block(1, 1, 2, 2) = rotation_t_x(0.4);
  MorseSturmSystem sys(gen::lorentz_metric(3), T, TrigMatrix{{A, B}, {}}, ConstantVector{Vector::Unit(3, 0)});
  Matrix expected = T.inverse() * (A + B * std::cos(two_pi * 0.5)) * T;
  auto p = sys.iterated(2, 0.75);
  EXPECT_NEAR((p.R - expected).norm(), 0.0, 1e-14);
  // shift identity Y_N(t + k/N) = T^{-k} Y_N(t) on a boost-type path
  auto b = gen::boost(3, 0.5, ScalarTrig{}, {});
  for (int k = 0; k < 3; ++k) {
    Vector y0 = b.iterated(3, 0.1).Y;
    Vector yk = b.iterated(3, 0.1 + k / 3.0).Y;
    EXPECT_NEAR((yk - b.T_power(-k) * y0).norm(), 0.0, 1e-12);
  }
}

// ---------------------------------------------------------------- singularity

TEST(Singular, ConstantAndScaledYAreSingular) {
  EXPECT_TRUE(is_singular(gen::flat(2)).singular);
  EXPECT_TRUE(is_singular(gen::oscillator({9 * pi * pi})).singular);
  // Y = (2 + sin 2 pi t) v with v timelike
  Vector v(2);
  v << 1.0, 0.3;
  TrigVector y{{Vector(2.0 * v)}, {Vector(Vector::Zero(2)), v}};
  MorseSturmSystem sys(gen::lorentz_metric(2), Matrix::Identity(2, 2), ConstantMatrix{Matrix::Zero(2, 2)}, y);
  EXPECT_TRUE(is_singular(sys).singular);
}

TEST(Singular, TiltedWithNonConstantAngleIsNotSingular) {
  ScalarTrig a;
  a.sin = {0.0, 0.3};
  auto sys = gen::tilted(2, a);
  auto r = is_singular(sys);
  EXPECT_FALSE(r.singular);
  ASSERT_TRUE(r.witness.has_value());
  // closed form: for Y = (cosh a, sinh a), the defect is |a'| (relative), largest where |cos 2 pi t| = 1
  double w = *r.witness;
  EXPECT_NEAR(std::abs(std::cos(two_pi * w)), 1.0, 1e-3);
  ScalarTrig c;
  c.cos = {0.4};
  EXPECT_TRUE(is_singular(gen::tilted(2, c)).singular);
}

// ---------------------------------------------------------------- positive metric

TEST(PositiveMetric, ClosedFormExamples) {
  auto sys = gen::flat(2);
  EXPECT_NEAR((sys.positive_metric_matrix(1, 0.3) - Matrix::Identity(2, 2)).norm(), 0.0, 1e-15);
  Matrix A = Matrix::Identity(2, 2);
  A(0, 0) = -1;
  EXPECT_NEAR((sys.operator_A(1, 0.3) - A).norm(), 0.0, 1e-15);
  MorseSturmSystem s3(gen::lorentz_metric(3), Matrix::Identity(3, 3), ConstantMatrix{Matrix::Zero(3, 3)},
                      ConstantVector{2.0 * Vector::Unit(3, 0)});
  EXPECT_NEAR((s3.positive_metric_matrix(1, 0.0) - Matrix::Identity(3, 3)).norm(), 0.0, 1e-15);
  Matrix A3 = Matrix::Identity(3, 3);
  A3(0, 0) = -1;
  EXPECT_NEAR((s3.operator_A(2, 0.7) - A3).norm(), 0.0, 1e-15);
}

TEST(PositiveMetric, DefiningIdentityAndPositivity) {
  auto sys = gen::random_tilted(7, 3);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    double t = u(rng);
    Matrix Gt = sys.positive_metric_matrix(2, t);
    Eigen::SelfAdjointEigenSolver<Matrix> es(Gt);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
    Matrix A = sys.operator_A(2, t);
    // g(V,W) = g_t(A V, W) on the basis
    EXPECT_NEAR((Gt * A - sys.g()).norm(), 0.0, 1e-12);
  }
}

TEST(Generators, TiltRecipeSolvesForY) {
  for (auto sys : {gen::random_tilted(3, 3), gen::boost(3, 0.5, ScalarTrig{{0.0}, {0.0, 0.1}}, {1.0, -4.0})}) {
    for (int i = 0; i <= 200; ++i) {
      double t = i / 200.0;
      Matrix R = sys.R_local(t);
      Jet j = sys.Y_local(t);
      EXPECT_LE((R * j.y - j.ddy).norm(), 1e-12 * (1.0 + j.ddy.norm()));
      EXPECT_LE((sys.g() * R - R.transpose() * sys.g()).norm(), 1e-12 * (1.0 + R.norm()));
    }
  }
}

TEST(Generators, OracleCounts) {
  EXPECT_EQ(gen::oracle_lambda_oscillator({9 * pi * pi}, 0.0), 3);
  EXPECT_EQ(gen::oracle_lambda_oscillator({9 * pi * pi}, 0.5), 2);
  EXPECT_EQ(gen::oracle_lambda_oscillator({-1.0}, 0.3), 0);
  // brute count over a wide window as an independent check
  for (double k : {pi * pi, 9 * pi * pi, 25 * pi * pi, 40.0})
    for (int j = 0; j < 32; ++j) {
      double th = j / 32.0;
      int brute = 0;
      for (int m = -50; m <= 50; ++m)
        if (std::pow(two_pi * (m + th), 2) < k * (1 - 1e-12)) ++brute;
      EXPECT_EQ(gen::oracle_lambda_oscillator({k}, th), brute);
    }
}

TEST(Generators, SpecParsing) {
  EXPECT_NEAR(gen::parse_scalar("9pi2"), 9 * pi * pi, 1e-12);
  EXPECT_NEAR(gen::parse_scalar("pi"), pi, 1e-15);
  EXPECT_NEAR(gen::parse_scalar("-4pi2"), -4 * pi * pi, 1e-12);
  EXPECT_EQ(gen::from_spec("flat:n=3,angles=1.0").n(), 3);
  EXPECT_EQ(gen::from_spec("oscillator:k=9pi2/25pi2").n(), 3);
  EXPECT_EQ(gen::from_spec("tilted:n=3,seed=4").label(), "tilted#4");
  EXPECT_THROW(gen::from_spec("nothing:n=2"), Error);
}

// ---------------------------------------------------------------- ODE

TEST(Ode, LinearSolutionIsExact) {
  auto sys = gen::flat(2);
  auto path = solve_ivp(sys, 1, CVector::Zero(2), Vector::Unit(2, 1).cast<cplx>(), 100);
  for (std::size_t i = 0; i < path.t.size(); ++i)
    EXPECT_NEAR((path.J[i] - path.t[i] * Vector::Unit(2, 1).cast<cplx>()).norm(), 0.0, 1e-14);
  EXPECT_THROW(solve_ivp(sys, 1, CVector::Zero(2), CVector::Zero(2), 16), Error);
}

TEST(Ode, OscillatorCosine) {
  double k = 9 * pi * pi;
  auto sys = gen::oscillator({k});
  auto path = solve_ivp(sys, 1, Vector::Unit(2, 1).cast<cplx>(), CVector::Zero(2), 1000);
  EXPECT_NEAR(std::abs(path.J.back()(1) - std::cos(std::sqrt(k))), 0.0, 1e-9);
}

TEST(Ode, PairingIsConserved) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (const auto& sys : suite()) {
    const int n = sys.n();
    CVector v1(n), w1(n), v2(n), w2(n);
    for (int i = 0; i < n; ++i) {
      v1(i) = {nd(rng), nd(rng)};
      w1(i) = {nd(rng), nd(rng)};
      v2(i) = {nd(rng), nd(rng)};
      w2(i) = {nd(rng), nd(rng)};
    }
    auto a = solve_ivp(sys, 1, v1, w1, 1000), b = solve_ivp(sys, 1, v2, w2, 1000);
    EXPECT_LE(pairing_drift(sys, a, b), 1e-8) << sys.label();
  }
}

TEST(Poincare, FlatMonodromy) {
  auto sys = gen::flat(2);
  auto pd = poincare(sys, 1000);
  CMatrix expected = CMatrix::Identity(4, 4);
  expected.topRightCorner(2, 2) = CMatrix::Identity(2, 2);
  EXPECT_NEAR((pd.P - expected).norm(), 0.0, 1e-12);
  ASSERT_EQ(pd.unit_spectrum.size(), 1u);
  EXPECT_EQ(pd.unit_spectrum[0].theta, 0.0);
  EXPECT_EQ(pd.unit_spectrum[0].geometric_P, 2);
}

TEST(Poincare, OscillatorHasHalfTurn) {
  auto pd = poincare(gen::oscillator({9 * pi * pi}), 1000);
  bool half = false;
  for (const auto& u : pd.unit_spectrum) half = half || u.theta == 0.5;
  EXPECT_TRUE(half);
}

TEST(Poincare, YDataIsFixedAndInJ0) {
  for (const auto& sys : suite()) {
    auto pd = poincare(sys, 1000);
    EXPECT_LE(pd.fixed_point_defect, 1e-7) << sys.label();
    Jet y = sys.Y_local(0.0);
    CVector x(2 * sys.n());
    x << y.y.cast<cplx>(), y.dy.cast<cplx>();
    EXPECT_NEAR(std::abs(pd.j0_functional.dot(x)), 0.0, 1e-12);
  }
}

TEST(Poincare, RestrictedSpectrumAgreesAwayFromOne) {
  for (const auto& sys : suite()) {
    auto pd = poincare(sys, 1000);
    for (const auto& u : pd.unit_spectrum) {
      if (u.theta == 0.0) continue;
      EXPECT_EQ(u.geometric_P, u.geometric_P0) << sys.label() << " theta " << u.theta;
    }
    // eigenvalues of P0 away from 1 are eigenvalues of P
    Eigen::ComplexEigenSolver<CMatrix> es(pd.P0, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      cplx z = es.eigenvalues()(i);
      if (std::abs(z - 1.0) < 1e-3) continue;
      double best = 1e300;
      for (auto w : pd.eigenvalues) best = std::min(best, std::abs(w - z));
      EXPECT_LE(best, 1e-6 * std::max(1.0, std::abs(z)));
    }
  }
}

TEST(Poincare, FlatRotationSpectrum) {
  double alpha = 1.0;
  auto pd = poincare(gen::flat(3, {alpha}), 1000);
  std::vector<double> th;
  for (const auto& u : pd.unit_spectrum) th.push_back(u.theta);
  auto has = [&](double x) {
    for (double t : th)
      if (circle_distance(t, x) < 1e-9) return true;
    return false;
  };
  EXPECT_TRUE(has(alpha / two_pi));
  EXPECT_TRUE(has(1.0 - alpha / two_pi));
}

TEST(Poincare, PowerMatchesDirectIteration) {
  for (const auto& sys : {gen::oscillator({9 * pi * pi}), gen::flat(3, {pi}), gen::random_tilted(2, 3)}) {
    auto pd = poincare(sys, 1000);
    const int n = sys.n();
    for (int N = 1; N <= 6; ++N) {
      CMatrix direct = iterated_monodromy(sys, N, default_steps(N));
      CMatrix D = CMatrix::Identity(2 * n, 2 * n);
      D.bottomRightCorner(n, n) *= static_cast<double>(N);
      CMatrix conj = D * pd.power(N) * D.inverse();
      double scale = std::max(1.0, direct.norm());
      EXPECT_LE((direct - conj).norm() / scale, 1e-7) << sys.label() << " N=" << N;
    }
  }
  // T = rotation by pi on the plane: T^2 = I
  auto sys = gen::flat(3, {pi});
  EXPECT_NEAR((sys.T_power(2) - Matrix::Identity(3, 3)).norm(), 0.0, 1e-15);
}

TEST(Nullity, FlatSystem) {
  auto sys = gen::flat(2);
  auto pd = poincare(sys, 1000);
  EXPECT_EQ(nullity_star(pd, CirclePoint(0.0), 1).value, 2);
  EXPECT_EQ(nullity_zero(pd, CirclePoint(0.0), 1).value, 2);
  for (double th : {0.1, 0.25, 0.5, 0.9}) EXPECT_EQ(nullity_star(pd, CirclePoint(th), 1).value, 0);
}

TEST(Nullity, OscillatorHalfTurnHasBothFloquetSolutions) {
  // V'' = -9 pi^2 V: cos 3 pi t and sin 3 pi t both change sign over one period
  auto pd = poincare(gen::oscillator({9 * pi * pi}), 1000);
  EXPECT_EQ(nullity_star(pd, CirclePoint(0.5), 1).value, 2);
  EXPECT_EQ(nullity_zero(pd, CirclePoint(0.5), 1).value, 2);
  EXPECT_EQ(nullity_star(pd, CirclePoint(0.0), 1).value, 1);
  EXPECT_EQ(nullity_star(pd, CirclePoint(0.0), 2).value, 3);
}

TEST(Nullity, ConjugationAndCorollaryBounds) {
  for (const auto& sys : suite()) {
    auto pd = poincare(sys, 1000);
    for (double th : {0.1, 0.25, 0.4})
      for (int N : {1, 2})
        EXPECT_EQ(nullity_star(pd, CirclePoint(th), N).value, nullity_star(pd, CirclePoint(1 - th), N).value);
    for (const auto& u : pd.unit_spectrum)
      EXPECT_EQ(nullity_star(pd, CirclePoint(u.theta), 1).value,
                nullity_star(pd, CirclePoint(u.theta).conj(), 1).value);
    int s = nullity_star(pd, CirclePoint(0.0), 1).value, z = nullity_zero(pd, CirclePoint(0.0), 1).value;
    EXPECT_LE(z, s) << sys.label();
    EXPECT_LE(s, z + 1) << sys.label();
    EXPECT_GE(z, 1);  // (Y, Y') itself
  }
}

TEST(Nullity, PowerKernelMatchesUnitSpectrum) {
  // dim Ker(P^N - rho^N) = sum of geometric multiplicities of unit eigenvalues with lambda^N = rho^N
  for (const auto& sys : suite()) {
    auto pd = poincare(sys, 1000);
    for (int N = 1; N <= 6; ++N)
      for (double th : {0.0, 0.5, 0.19}) {
        int expected = 0;
        for (const auto& u : pd.unit_spectrum)
          if (circle_distance(N * u.theta, N * th) < 1e-9) expected += u.geometric_P;
        EXPECT_EQ(nullity_star(pd, CirclePoint(th), N).value, expected) << sys.label() << " N=" << N << " " << th;
      }
  }
  // a hyperbolic pair makes P^5 badly scaled; the count must still be 1
  auto sys = gen::random_tilted(2, 3);
  auto pd = poincare(sys, 1000);
  EXPECT_EQ(nullity_star(pd, CirclePoint(0.0), 5).value, 1);
  EXPECT_EQ(nullity_zero(pd, CirclePoint(0.0), 5).value, 1);
}

TEST(Ode, RelativeDriftAndObservedOrder) {
  // growing solutions: absolute drift scales with their size, relative drift stays at rounding level
  auto sys = gen::random_tilted(2, 3);
  CVector v1 = CVector::Ones(3), w1 = CVector::Zero(3), v2 = CVector::Zero(3), w2 = CVector::Ones(3);
  auto drift = [&](int N, long s) {
    return pairing_drift_relative(sys, solve_ivp(sys, N, v1, w1, s), solve_ivp(sys, N, v2, w2, s));
  };
  EXPECT_LE(drift(3, default_steps(3)), 1e-12);
  // coarse steps: truncation dominates and halving the step cuts the drift by at least 8
  auto osc = gen::oscillator({9 * pi * pi});
  CVector a = Vector::Unit(2, 1).cast<cplx>(), b = CVector::Zero(2);
  double d40 = pairing_drift_relative(osc, solve_ivp(osc, 1, a, b, 40), solve_ivp(osc, 1, b, a, 40));
  double d80 = pairing_drift_relative(osc, solve_ivp(osc, 1, a, b, 80), solve_ivp(osc, 1, b, a, 80));
  EXPECT_GE(d40 / d80, 8.0);
}
