#pragma once

// Test systems with known or oracle-computable answers.
//
// All generators use g = diag(-1, 1, ..., 1) with e1 timelike.
//   flat            R = 0, Y = e1, T = rotations on spatial planes
//   oscillator      R = diag(0, -k_2, ..., -k_n), Y = e1, T = I (singular)
//   static_product  the oscillator read as a geodesic inside a totally geodesic
//                   spacelike leaf of a static spacetime (epsilon = 0)
//   tilted          Y = (cosh a, sinh a, 0, ...) with a periodic, R rebuilt
//                   from Y so that R Y = Y'', T = I (non-singular when a' != 0)
//   boost           as tilted with a(t) = b t + periodic part and T the boost
//                   by -b, which closes Y up; spatial multipliers leave the circle

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bott/system.hpp"
#include "bott/validation.hpp"

namespace bott::generators {

inline Matrix lorentz_metric(int n) {
  Matrix g = Matrix::Identity(n, n);
  g(0, 0) = -1.0;
  return g;
}

inline Vector timelike_axis(int n) {
  Vector e = Vector::Zero(n);
  e(0) = 1.0;
  return e;
}

/// g-boost of rapidity s in the (e1, e2) plane.
inline Matrix boost_matrix(int n, double s) {
  Matrix B = Matrix::Identity(n, n);
  B(0, 0) = std::cosh(s);
  B(0, 1) = std::sinh(s);
  B(1, 0) = std::sinh(s);
  B(1, 1) = std::cosh(s);
  return B;
}

/// Flat system; angles[i] rotates the spatial plane (e_{2i+2}, e_{2i+3}).
inline MorseSturmSystem flat(int n, const std::vector<double>& angles = {}) {
  if (n < 2) throw Error("flat: n must be >= 2");
  if (2 * static_cast<int>(angles.size()) > n - 1) throw Error("flat: too many rotation angles for n");
  Matrix T = Matrix::Identity(n, n);
  for (std::size_t i = 0; i < angles.size(); ++i) {
    int a = 1 + 2 * static_cast<int>(i), b = a + 1;
    double c = std::cos(angles[i]), s = std::sin(angles[i]);
    T(a, a) = c;
    T(a, b) = -s;
    T(b, a) = s;
    T(b, b) = c;
  }
  return MorseSturmSystem(lorentz_metric(n), T, ConstantMatrix{Matrix::Zero(n, n)}, ConstantVector{timelike_axis(n)},
                          "flat");
}

/// Decoupled oscillators V_j'' = -k_j V_j in the spatial directions.
inline MorseSturmSystem oscillator(const std::vector<double>& springs) {
  int n = 1 + static_cast<int>(springs.size());
  if (n < 2) throw Error("oscillator: need at least one spring constant");
  Matrix R = Matrix::Zero(n, n);
  for (int j = 1; j < n; ++j) R(j, j) = -springs[j - 1];
  return MorseSturmSystem(lorentz_metric(n), Matrix::Identity(n, n), ConstantMatrix{R},
                          ConstantVector{timelike_axis(n)}, "oscillator");
}

/// Same system as oscillator(); the geodesic lies in a totally geodesic spacelike
/// leaf of a static spacetime, so the correction term vanishes.
inline MorseSturmSystem static_product(const std::vector<double>& riemannian_springs) {
  auto sys = oscillator(riemannian_springs);
  return MorseSturmSystem(sys.g(), sys.T(), sys.R_rep(), sys.Y_rep(), "static_product");
}

/// Tilted system. `angle` must be periodic (no drift). springs[0] acts on the
/// boosted spatial direction E(t), springs[j] on e_{j+2}.
inline MorseSturmSystem tilted(int n, const ScalarTrig& angle, const std::vector<double>& springs = {}) {
  if (n < 2) throw Error("tilted: n must be >= 2");
  if (angle.drift != 0.0) throw Error("tilted: the boost angle must be periodic; use boost() for a drift");
  return MorseSturmSystem(lorentz_metric(n), Matrix::Identity(n, n), TiltRecipe{springs}, BoostPath{0, 1, angle},
                          "tilted");
}

/// Boost-holonomy variant: a(t) = drift t + periodic part, T = boost by -drift.
inline MorseSturmSystem boost(int n, double drift, const ScalarTrig& periodic, const std::vector<double>& springs = {}) {
  if (n < 2) throw Error("boost: n must be >= 2");
  ScalarTrig a = periodic;
  a.drift = drift;
  return MorseSturmSystem(lorentz_metric(n), boost_matrix(n, -drift), TiltRecipe{springs}, BoostPath{0, 1, a},
                          "boost");
}

/// Seeded tilted system: degree-2 trig angle with amplitude `amp`, springs drawn
/// uniformly from [0, spring_max] on the directions after E (E itself unsprung).
inline MorseSturmSystem random_tilted(std::uint64_t seed, int n, double amp = 0.3, double spring_max = 60.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ScalarTrig a;
  a.cos = {0.0, amp * u(rng), 0.5 * amp * u(rng)};
  a.sin = {0.0, amp * (0.5 + 0.5 * std::abs(u(rng))), 0.5 * amp * u(rng)};
  std::vector<double> springs(n - 1, 0.0);
  std::uniform_real_distribution<double> ks(0.0, spring_max);
  for (int j = 1; j < n - 1; ++j) springs[j] = ks(rng);
  auto sys = tilted(n, a, springs);
  return MorseSturmSystem(sys.g(), sys.T(), sys.R_rep(), sys.Y_rep(), "tilted#" + std::to_string(seed));
}

/// Number of m in Z with (2 pi)^2 (m + theta)^2 < k_j, summed over j. Equality
/// (a kernel direction) is not counted.
inline int oracle_lambda_oscillator(const std::vector<double>& springs, double theta) {
  int total = 0;
  for (double k : springs) {
    if (k <= 0.0) continue;
    double bound = k / (two_pi * two_pi);
    long lim = static_cast<long>(std::ceil(std::sqrt(bound))) + 2;
    for (long m = -lim; m <= lim; ++m) {
      double x = m + theta;
      if (x * x < bound - 1e-12 * std::max(1.0, bound)) ++total;
    }
  }
  return total;
}

/// Parses "2.5", "9pi2" (9 pi^2), "pi2", "3pi" or "-4pi2".
inline double parse_scalar(const std::string& token) {
  auto pos = token.find("pi");
  if (pos == std::string::npos) return std::stod(token);
  std::string coef = token.substr(0, pos), power = token.substr(pos + 2);
  double c = coef.empty() ? 1.0 : coef == "-" ? -1.0 : std::stod(coef);
  int p = power.empty() ? 1 : std::stoi(power);
  return c * std::pow(std::numbers::pi, p);
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, '/'))
    if (!item.empty()) out.push_back(parse_scalar(item));
  return out;
}

/// Builds a system from "kind:key=value,...". Lists use '/' as separator, e.g.
///   flat:n=3,angles=1.0
///   oscillator:k=9pi2/25pi2
///   static:k=9pi2
///   tilted:n=3,seed=4            (random_tilted)
///   tilted:n=2,amp=0.3,k=0       (a = amp sin 2 pi t)
///   boost:n=3,drift=0.5,amp=0.1,k=0/-4
inline MorseSturmSystem from_spec(const std::string& spec) {
  auto colon = spec.find(':');
  std::string kind = spec.substr(0, colon);
  std::map<std::string, std::string> kv;
  if (colon != std::string::npos) {
    std::stringstream ss(spec.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto eq = item.find('=');
      if (eq == std::string::npos) throw Error("generator parameter without '=': " + item);
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  auto get = [&](const std::string& key, const std::string& dflt) { return kv.count(key) ? kv[key] : dflt; };
  if (kind == "flat") return flat(std::stoi(get("n", "2")), parse_list(get("angles", "")));
  if (kind == "oscillator") return oscillator(parse_list(get("k", "9pi2")));
  if (kind == "static" || kind == "static_product") return static_product(parse_list(get("k", "9pi2")));
  if (kind == "tilted") {
    int n = std::stoi(get("n", "2"));
    if (kv.count("seed")) return random_tilted(std::stoull(kv["seed"]), n);
    ScalarTrig a;
    a.cos = {0.0};
    a.sin = {0.0, parse_scalar(get("amp", "0.3"))};
    return tilted(n, a, parse_list(get("k", "")));
  }
  if (kind == "boost") {
    int n = std::stoi(get("n", "2"));
    ScalarTrig a;
    a.cos = {0.0};
    a.sin = {0.0, parse_scalar(get("amp", "0"))};
    return boost(n, parse_scalar(get("drift", "0.5")), a, parse_list(get("k", "")));
  }
  throw Error("unknown generator kind '" + kind + "'");
}

}  // namespace bott::generators
