#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "bott/ode.hpp"
#include "bott/system.hpp"

namespace bott {

struct ValidationCheck {
  std::string name;
  bool passed = true;
  double residual = 0.0;
  double tolerance = 0.0;
  std::string diagnostic;  ///< empty when passed
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool passed = true;
  bool reduced_accuracy = false;  ///< R given only as linearly interpolated samples

  const ValidationCheck* first_failure() const {
    for (const auto& c : checks)
      if (!c.passed) return &c;
    return nullptr;
  }
};

/// Checks the structural conditions on (g, T, R, Y). Nothing is thrown for data
/// errors; every check lands in the report with its measured residual.
inline ValidationReport validate(const MorseSturmSystem& sys, const Tolerances& tol = {}, int grid = 1000,
                                 long ode_steps = 1000) {
  ValidationReport rep;
  const int n = sys.n();
  const Matrix& g = sys.g();
  const Matrix& T = sys.T();
  auto add = [&](std::string name, double residual, double limit, bool ok, std::string diag) {
    rep.checks.push_back({std::move(name), ok, residual, limit, ok ? std::string{} : std::move(diag)});
    rep.passed = rep.passed && ok;
  };

  double gsym = (g - g.transpose()).norm();
  add("metric_symmetric", gsym, 0.0, gsym == 0.0, "metric not symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> ges(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
  const Vector& gev = ges.eigenvalues();
  int negatives = 0;
  double smallest = gev.cwiseAbs().minCoeff();
  for (int i = 0; i < n; ++i)
    if (gev(i) < 0) ++negatives;
  bool nondeg = smallest > tol.structural * std::max(1.0, gev.cwiseAbs().maxCoeff());
  add("metric_nondegenerate", smallest, tol.structural, nondeg, "metric degenerate");
  add("metric_index", static_cast<double>(negatives), 1.0, negatives == 1,
      "metric index != 1 (found " + std::to_string(negatives) + " negative directions)");

  add("T_invertible", std::abs(T.determinant()), 0.0, sys.T_invertible(), "T not invertible");
  double gnorm = std::max(1.0, g.norm());
  double tpres = (T.transpose() * g * T - g).norm() / gnorm;
  add("T_g_preserving", tpres, tol.structural, tpres <= tol.structural, "T not g-preserving");

  double rsym = 0.0, rscale = 1.0;
  bool linear_samples = false;
  if (auto* s = std::get_if<SampledMatrix>(&sys.R_rep())) linear_samples = !s->cubic;
  for (int i = 0; i <= grid; ++i) {
    Matrix R = sys.R_local(static_cast<double>(i) / grid);
    rscale = std::max(rscale, R.norm());
    rsym = std::max(rsym, (g * R - R.transpose() * g).norm());
  }
  rsym /= rscale * gnorm;
  add("R_g_symmetric", rsym, tol.structural, rsym <= tol.structural, "R not g-symmetric");
  double compat = (sys.R_local(0.0) * T - T * sys.R_local(1.0)).norm() / rscale;
  add("R_compatible", compat, tol.structural, compat <= tol.structural, "R(0) T != T R(1)");

  double worst_gyy = -std::numeric_limits<double>::infinity();
  double yscale = 0.0;
  for (int i = 0; i <= grid; ++i) {
    Jet j = sys.Y_local(static_cast<double>(i) / grid);
    worst_gyy = std::max(worst_gyy, sys.metric(j.y, j.y));
    yscale = std::max(yscale, j.y.norm() + j.dy.norm());
  }
  add("Y_timelike", worst_gyy, 0.0, worst_gyy < 0.0, "Y not timelike everywhere");

  Jet y0 = sys.Y_local(0.0), y1 = sys.Y_local(1.0);
  double bnd = ((T * y1.y - y0.y).norm() + (T * y1.dy - y0.dy).norm()) / std::max(1.0, yscale);
  add("Y_boundary", bnd, tol.structural, bnd <= tol.structural, "T Y(1) != Y(0) or T Y'(1) != Y'(0)");

  // Y must solve V'' = R V: re-integrate from its initial data and compare.
  double ode_res = 0.0;
  if (sys.T_invertible()) {
    auto path = solve_ivp(sys, 1, y0.y.cast<cplx>(), y0.dy.cast<cplx>(), ode_steps);
    for (std::size_t i = 0; i < path.t.size(); ++i) {
      Jet j = sys.Y_local(path.t[i]);
      ode_res = std::max(ode_res, (path.J[i] - j.y.cast<cplx>()).norm() + (path.dJ[i] - j.dy.cast<cplx>()).norm());
    }
    ode_res /= std::max(1.0, yscale);
  }
  add("Y_solves_ode", ode_res, tol.ode, ode_res <= tol.ode, "Y does not solve V'' = R V");

  rep.reduced_accuracy = linear_samples;
  return rep;
}

/// Throws ValidationError carrying the first failing diagnostic.
inline void require_valid(const ValidationReport& rep) {
  if (const auto* f = rep.first_failure()) throw ValidationError(f->diagnostic);
}

inline void require_valid(const MorseSturmSystem& sys, const Tolerances& tol = {}) {
  require_valid(validate(sys, tol));
}

}  // namespace bott
