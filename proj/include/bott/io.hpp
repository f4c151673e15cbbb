#pragma once

// JSON problem files and JSON/CSV reports.
//
// Problem file:
//   { "n": 2, "g": [...], "T": [...], "R": {...}, "Y": {...}, "label": "..." }
// Matrices are row-major, either flat (n*n numbers) or nested rows.
//   R: {"type":"constant","value":M} | {"type":"trig","cos":[M...],"sin":[M...]}
//      | {"type":"samples","values":[M...],"interpolation":"cubic"|"linear"}
//      | {"type":"tilt","springs":[k...]}
//   Y: {"type":"constant","value":v} | {"type":"trig","cos":[v...],"sin":[v...]}
//      | {"type":"samples","values":[v...],"derivs":[v...]}
//      | {"type":"boost","time_axis":0,"space_axis":1,"angle":{"drift":b,"cos":[...],"sin":[...]}}

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "bott/bott.hpp"
#include "bott/validation.hpp"

namespace bott::io {

using json = nlohmann::ordered_json;

namespace detail {

inline Matrix read_matrix(const json& j, int n, const char* what) {
  Matrix M(n, n);
  if (!j.is_array()) throw ValidationError(std::string("malformed data: ") + what + " must be an array");
  if (j.size() == static_cast<std::size_t>(n) && j[0].is_array()) {
    for (int r = 0; r < n; ++r) {
      if (j[r].size() != static_cast<std::size_t>(n)) throw ValidationError(std::string("malformed data: ") + what);
      for (int c = 0; c < n; ++c) M(r, c) = j[r][c].get<double>();
    }
  } else if (j.size() == static_cast<std::size_t>(n) * n) {
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) M(r, c) = j[r * n + c].get<double>();
  } else {
    throw ValidationError(std::string("malformed data: ") + what + " has wrong size");
  }
  return M;
}

inline Vector read_vector(const json& j, int n, const char* what) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(n))
    throw ValidationError(std::string("malformed data: ") + what + " must have n entries");
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = j[i].get<double>();
  return v;
}

inline std::vector<double> read_list(const json& j) {
  std::vector<double> out;
  if (j.is_null()) return out;
  for (const auto& x : j) out.push_back(x.get<double>());
  return out;
}

inline json matrix_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline json complex_matrix_json(const CMatrix& M) {
  return {{"re", matrix_json(M.real())}, {"im", matrix_json(M.imag())}};
}

inline json trig_json(const ScalarTrig& a) {
  return {{"drift", a.drift}, {"cos", a.cos}, {"sin", a.sin}};
}

}  // namespace detail

/// Metadata only: T lies in the identity component of O(g) when det T > 0 and T
/// keeps a timelike vector inside its own time cone.
inline bool T_identity_component(const MorseSturmSystem& sys) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sys.g());
  Vector u = es.eigenvectors().col(0);
  return sys.T().determinant() > 0 && sys.metric(Vector(sys.T() * u), u) < 0;
}

inline MorseSturmSystem system_from_json(const json& j) {
  try {
    int n = j.at("n").get<int>();
    if (n < 1) throw ValidationError("malformed data: n must be >= 1");
    Matrix g = detail::read_matrix(j.at("g"), n, "g");
    Matrix T = detail::read_matrix(j.at("T"), n, "T");
    const json& jr = j.at("R");
    std::string rt = jr.at("type").get<std::string>();
    CurvatureRep R;
    if (rt == "constant") {
      R = ConstantMatrix{detail::read_matrix(jr.at("value"), n, "R.value")};
    } else if (rt == "trig") {
      TrigMatrix tm;
      for (const auto& m : jr.at("cos")) tm.cos.push_back(detail::read_matrix(m, n, "R.cos"));
      if (jr.contains("sin"))
        for (const auto& m : jr.at("sin")) tm.sin.push_back(detail::read_matrix(m, n, "R.sin"));
      R = tm;
    } else if (rt == "samples") {
      SampledMatrix sm;
      for (const auto& m : jr.at("values")) sm.values.push_back(detail::read_matrix(m, n, "R.values"));
      sm.cubic = jr.value("interpolation", std::string("cubic")) != "linear";
      R = sm;
    } else if (rt == "tilt") {
      R = TiltRecipe{detail::read_list(jr.value("springs", json::array()))};
    } else {
      throw ValidationError("malformed data: unknown R type '" + rt + "'");
    }
    const json& jy = j.at("Y");
    std::string yt = jy.at("type").get<std::string>();
    SolutionRep Y;
    if (yt == "constant") {
      Y = ConstantVector{detail::read_vector(jy.at("value"), n, "Y.value")};
    } else if (yt == "trig") {
      TrigVector tv;
      for (const auto& v : jy.at("cos")) tv.cos.push_back(detail::read_vector(v, n, "Y.cos"));
      if (jy.contains("sin"))
        for (const auto& v : jy.at("sin")) tv.sin.push_back(detail::read_vector(v, n, "Y.sin"));
      Y = tv;
    } else if (yt == "samples") {
      SampledVector sv;
      for (const auto& v : jy.at("values")) sv.values.push_back(detail::read_vector(v, n, "Y.values"));
      for (const auto& v : jy.at("derivs")) sv.derivs.push_back(detail::read_vector(v, n, "Y.derivs"));
      Y = sv;
    } else if (yt == "boost") {
      BoostPath bp;
      bp.time_axis = jy.value("time_axis", 0);
      bp.space_axis = jy.value("space_axis", 1);
      const json& ja = jy.at("angle");
      bp.angle.drift = ja.value("drift", 0.0);
      bp.angle.cos = detail::read_list(ja.value("cos", json::array()));
      bp.angle.sin = detail::read_list(ja.value("sin", json::array()));
      Y = bp;
    } else {
      throw ValidationError("malformed data: unknown Y type '" + yt + "'");
    }
    return MorseSturmSystem(g, T, R, Y, j.value("label", std::string{}));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed problem file: ") + e.what());
  }
}

inline MorseSturmSystem load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("malformed problem file " + path + ": " + e.what());
  }
  return system_from_json(j);
}

inline json to_json(const MorseSturmSystem& sys) {
  json j;
  j["n"] = sys.n();
  j["g"] = detail::matrix_json(sys.g());
  j["T"] = detail::matrix_json(sys.T());
  std::visit(
      [&](const auto& r) {
        using Rep = std::decay_t<decltype(r)>;
        json o;
        if constexpr (std::is_same_v<Rep, ConstantMatrix>) {
          o = {{"type", "constant"}, {"value", detail::matrix_json(r.value)}};
        } else if constexpr (std::is_same_v<Rep, TrigMatrix>) {
          json c = json::array(), s = json::array();
          for (const auto& m : r.cos) c.push_back(detail::matrix_json(m));
          for (const auto& m : r.sin) s.push_back(detail::matrix_json(m));
          o = {{"type", "trig"}, {"cos", c}, {"sin", s}};
        } else if constexpr (std::is_same_v<Rep, SampledMatrix>) {
          json v = json::array();
          for (const auto& m : r.values) v.push_back(detail::matrix_json(m));
          o = {{"type", "samples"}, {"values", v}, {"interpolation", r.cubic ? "cubic" : "linear"}};
        } else {
          o = {{"type", "tilt"}, {"springs", r.springs}};
        }
        j["R"] = o;
      },
      sys.R_rep());
  std::visit(
      [&](const auto& y) {
        using Rep = std::decay_t<decltype(y)>;
        json o;
        if constexpr (std::is_same_v<Rep, ConstantVector>) {
          o = {{"type", "constant"}, {"value", detail::vector_json(y.value)}};
        } else if constexpr (std::is_same_v<Rep, TrigVector>) {
          json c = json::array(), s = json::array();
          for (const auto& v : y.cos) c.push_back(detail::vector_json(v));
          for (const auto& v : y.sin) s.push_back(detail::vector_json(v));
          o = {{"type", "trig"}, {"cos", c}, {"sin", s}};
        } else if constexpr (std::is_same_v<Rep, BoostPath>) {
          o = {{"type", "boost"},
               {"time_axis", y.time_axis},
               {"space_axis", y.space_axis},
               {"angle", detail::trig_json(y.angle)}};
        } else {
          json v = json::array(), d = json::array();
          for (const auto& x : y.values) v.push_back(detail::vector_json(x));
          for (const auto& x : y.derivs) d.push_back(detail::vector_json(x));
          o = {{"type", "samples"}, {"values", v}, {"derivs", d}};
        }
        j["Y"] = o;
      },
      sys.Y_rep());
  j["label"] = sys.label();
  j["T_identity_component"] = T_identity_component(sys);
  return j;
}

inline json to_json(const ValidationReport& rep) {
  json checks = json::array();
  for (const auto& c : rep.checks)
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"residual", c.residual},
                      {"tolerance", c.tolerance},
                      {"diagnostic", c.diagnostic}});
  return {{"passed", rep.passed}, {"reduced_accuracy", rep.reduced_accuracy}, {"checks", checks}};
}

inline json to_json(const PoincareData& d) {
  json spec = json::array();
  for (const auto& u : d.unit_spectrum)
    spec.push_back({{"theta", u.theta},
                    {"re", u.lambda.real()},
                    {"im", u.lambda.imag()},
                    {"algebraic", u.algebraic},
                    {"geometric_P", u.geometric_P},
                    {"geometric_P0", u.geometric_P0}});
  json ev = json::array();
  for (auto z : d.eigenvalues) ev.push_back({{"re", z.real()}, {"im", z.imag()}});
  return {{"steps", d.steps},
          {"P", detail::complex_matrix_json(d.P)},
          {"P0", detail::complex_matrix_json(d.P0)},
          {"basis_J0", detail::complex_matrix_json(d.basis_J0)},
          {"eigenvalues", ev},
          {"unit_spectrum", spec},
          {"fixed_point_defect", d.fixed_point_defect},
          {"invariance_defect", d.invariance_defect}};
}

inline json to_json(const Sample& s) {
  return {{"theta", s.theta}, {"lambda", s.lambda}, {"nullity", s.nullity}, {"meshes", s.meshes},
          {"lambdas", s.lambdas}, {"monotone", s.monotone}};
}

inline json to_json(const IndexProfile& p) {
  json arcs = json::array();
  for (const auto& a : p.arcs) {
    json samples = json::array();
    for (const auto& s : a.samples) samples.push_back(to_json(s));
    arcs.push_back({{"left", a.left}, {"right", a.right}, {"plateau", a.plateau}, {"samples", samples}});
  }
  json points = json::array();
  for (const auto& s : p.points) points.push_back(to_json(s));
  return {{"spectral_angles", p.spectral_angles},
          {"arcs", arcs},
          {"points", points},
          {"singular", p.singular},
          {"epsilon", p.epsilon},
          {"lambda_star_1", p.lambda_star_1}};
}

inline json to_json(const std::vector<JumpRecord>& table) {
  json out = json::array();
  for (const auto& r : table)
    out.push_back({{"theta", r.theta},
                   {"left", r.left},
                   {"right", r.right},
                   {"point", r.point},
                   {"nullity", r.nullity},
                   {"exempt", r.exempt},
                   {"bound_ok", r.bound_ok},
                   {"semicontinuity_ok", r.semicontinuity_ok}});
  return out;
}

inline json to_json(const GrowthStats& g) {
  return {{"mean_index", g.mean_index}, {"thetas", g.thetas}, {"a", g.a},
          {"alpha", g.alpha},           {"beta", g.beta},     {"is_constant", g.is_constant}};
}

inline json to_json(const Classification& c) {
  return {{"trivial_spectrum_only", c.trivial_spectrum_only},
          {"hyperbolic_mod_Y", c.hyperbolic_mod_Y},
          {"strongly_hyperbolic_mod_Y", c.strongly_hyperbolic_mod_Y},
          {"constant_index", c.constant_index},
          {"mu_direct", c.mu_direct},
          {"mu_predicted", c.mu_predicted},
          {"identity_holds", c.identity_holds}};
}

inline json to_json(const std::vector<IterationRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json o = {{"N", r.N}, {"mu", r.mu}, {"mu0", r.mu0}, {"nu_star", r.nu_star}, {"nu0", r.nu0}};
    o["epsilon_N"] = r.epsilon_N ? json(*r.epsilon_N) : json(nullptr);
    o["recomputed_points"] = r.recomputed_points;
    out.push_back(o);
  }
  return out;
}

inline json to_json(const FourierReport& f) {
  return {{"N", f.N},
          {"mesh", f.mesh},
          {"lambda0_1N", f.lhs_zero},
          {"lambda_star_1N", f.lhs_star},
          {"lambda_star_11", f.lambda_star_1},
          {"terms", f.terms},
          {"rhs_zero", f.rhs_zero},
          {"rhs_star", f.rhs_star},
          {"nullities_agree", f.nullities_agree},
          {"refinements", f.refinements},
          {"ok", f.ok()}};
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// theta,lambda,nullity,kind with arc samples and spectral points, sorted by theta.
inline std::string profile_csv(const IndexProfile& p) {
  struct Row {
    double theta;
    int lambda, nullity;
    const char* kind;
  };
  std::vector<Row> rows;
  for (const auto& a : p.arcs)
    for (const auto& s : a.samples) rows.push_back({CirclePoint::reduce(s.theta), s.lambda, s.nullity, "arc"});
  for (const auto& s : p.points) rows.push_back({s.theta, s.lambda, s.nullity, "point"});
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.theta < b.theta; });
  std::ostringstream out;
  out << "theta,lambda,nullity,kind\n";
  for (const auto& r : rows) out << format_double(r.theta) << ',' << r.lambda << ',' << r.nullity << ',' << r.kind << '\n';
  return out.str();
}

/// N,mu,mu0,nu_star,nu0,epsilon; epsilon is the direct value when computed.
inline std::string iteration_csv(const std::vector<IterationRow>& rows, int epsilon) {
  std::ostringstream out;
  out << "N,mu,mu0,nu_star,nu0,epsilon\n";
  for (const auto& r : rows)
    out << r.N << ',' << r.mu << ',' << r.mu0 << ',' << r.nu_star << ',' << r.nu0 << ','
        << (r.epsilon_N ? *r.epsilon_N : epsilon) << '\n';
  return out.str();
}

}  // namespace bott::io
