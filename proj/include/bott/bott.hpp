#pragma once

// The index function Lambda(theta) = lambda_0(e^{2 pi i theta}, 1) and the
// nullity function on the circle, the iteration identities built on them, jump
// bounds, growth constants and the hyperbolicity classification.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bott/galerkin.hpp"
#include "bott/ode.hpp"
#include "bott/system.hpp"

namespace bott {

/// Runs f(0..count-1) on `jobs` threads. Results must be written by index; the
/// exception of the lowest failing index is rethrown.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& f) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min<int>(jobs, static_cast<int>(count)); ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct ScanOptions {
  Mesh mesh0{64};
  IndexOptions index{};
  int max_refinements = 4;
  int jobs = 1;
};

/// One refined evaluation of lambda_0(theta, 1).
struct Sample {
  double theta = 0.0;
  int lambda = 0;
  int nullity = 0;  ///< exact nu_0(theta, 1)
  std::vector<int> meshes;
  std::vector<int> lambdas;
  bool monotone = true;
};

struct Arc {
  double left = 0.0;   ///< spectral angle
  double right = 1.0;  ///< next spectral angle (1 + first angle for the wrap-around arc)
  int plateau = 0;
  std::vector<Sample> samples;
};

struct IndexProfile {
  std::vector<double> spectral_angles;  ///< sorted, always contains 0
  std::vector<Arc> arcs;                ///< arcs[j] starts at spectral_angles[j]
  std::vector<Sample> points;           ///< one per spectral angle
  bool singular = false;
  int epsilon = 0;
  int lambda_star_1 = 0;  ///< lambda_*(1,1)

  /// Lambda at theta from plateau or point values; nullopt when theta is within
  /// `guard` of a spectral angle without coinciding with it.
  std::optional<int> lambda_at(double theta, double guard = 1e-6) const {
    theta = CirclePoint::reduce(theta);
    for (const auto& p : points) {
      double d = circle_distance(theta, p.theta);
      if (d <= 1e-12) return p.lambda;
      if (d <= guard) return std::nullopt;
    }
    for (const auto& a : arcs) {
      double t = theta < a.left ? theta + 1.0 : theta;
      if (t > a.left && t < a.right) return a.plateau;
    }
    return std::nullopt;
  }
  int nullity_at(double theta) const {
    for (const auto& p : points)
      if (circle_distance(theta, p.theta) <= 1e-12) return p.nullity;
    return 0;
  }
  int max_lambda() const {
    int mx = 0;
    for (const auto& a : arcs) mx = std::max(mx, a.plateau);
    for (const auto& p : points) mx = std::max(mx, p.lambda);
    return mx;
  }
  /// Right-limit plateau at spectral angle j and the left-limit plateau.
  int right_plateau(std::size_t j) const { return arcs[j].plateau; }
  int left_plateau(std::size_t j) const { return arcs[(j + arcs.size() - 1) % arcs.size()].plateau; }
};

inline Sample evaluate_lambda(const MorseSturmSystem& sys, const PoincareData& pd, double theta,
                              const ScanOptions& opt) {
  CirclePoint rho(theta);
  auto r = lambda_with_refinement(sys, pd, 1, rho, ConstraintKind::zero, opt.mesh0, opt.index, opt.max_refinements);
  return {rho.theta(), r.lambda, r.ode_nullity, r.meshes, r.lambdas, r.monotone};
}

/// Distinct unit-circle spectral angles of P, sorted, with 0 always present.
inline std::vector<double> spectral_angles(const PoincareData& pd) {
  std::vector<double> out{0.0};
  for (const auto& u : pd.unit_spectrum) {
    bool dup = false;
    for (double a : out) dup = dup || circle_distance(a, u.theta) <= 1e-9;
    if (!dup) out.push_back(u.theta);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Lambda on every open arc between spectral angles (midpoint plus a confirmation
/// sample at the first quarter) and at every spectral angle.
inline IndexProfile scan_circle(const MorseSturmSystem& sys, const PoincareData& pd, const ScanOptions& opt = {}) {
  IndexProfile prof;
  prof.spectral_angles = spectral_angles(pd);
  prof.singular = is_singular(sys, opt.index.tol.singular).singular;
  const std::size_t K = prof.spectral_angles.size();
  for (std::size_t j = 0; j < K; ++j) {
    Arc a;
    a.left = prof.spectral_angles[j];
    a.right = j + 1 < K ? prof.spectral_angles[j + 1] : prof.spectral_angles[0] + 1.0;
    prof.arcs.push_back(a);
  }
  // task list: 2 samples per arc, 1 per point, then lambda_*(1,1)
  std::vector<double> thetas;
  for (const auto& a : prof.arcs) {
    thetas.push_back(a.left + 0.5 * (a.right - a.left));
    thetas.push_back(a.left + 0.25 * (a.right - a.left));
  }
  for (double th : prof.spectral_angles) thetas.push_back(th);
  std::vector<Sample> results(thetas.size() + 1);
  RefinedIndex star;
  parallel_for(results.size(), opt.jobs, [&](std::size_t i) {
    if (i < thetas.size()) results[i] = evaluate_lambda(sys, pd, thetas[i], opt);
    else star = lambda_with_refinement(sys, pd, 1, CirclePoint(0.0), ConstraintKind::star, opt.mesh0, opt.index,
                                       opt.max_refinements);
  });
  for (std::size_t j = 0; j < K; ++j) {
    Arc& a = prof.arcs[j];
    a.samples = {results[2 * j], results[2 * j + 1]};
    a.plateau = a.samples[0].lambda;
    if (a.samples[1].lambda != a.plateau)
      throw NonconvergenceError("arc constancy violated on (" + std::to_string(a.left) + ", " +
                                std::to_string(a.right) + "): " + std::to_string(a.samples[0].lambda) + " vs " +
                                std::to_string(a.samples[1].lambda));
  }
  for (std::size_t j = 0; j < K; ++j) prof.points.push_back(results[2 * K + j]);
  prof.lambda_star_1 = star.lambda;
  prof.epsilon = star.lambda - prof.points[0].lambda;
  if (prof.epsilon != 0 && prof.epsilon != 1)
    throw NonconvergenceError("lambda_*(1,1) - lambda_0(1,1) = " + std::to_string(prof.epsilon) + " outside {0,1}");
  return prof;
}

// ------------------------------------------------------------------ iteration

struct IterationRow {
  int N = 0;
  int mu = 0;   ///< mu(gamma^N) = epsilon + mu_0(gamma^N)
  int mu0 = 0;  ///< sum_k Lambda(k/N)
  int nu_star = 0;
  int nu0 = 0;
  std::optional<int> epsilon_N;  ///< lambda_*(1,N) - lambda_0(1,N) computed directly
  int recomputed_points = 0;     ///< roots of unity too close to a spectral angle
};

struct GrowthStats {
  double mean_index = 0.0;
  std::vector<double> thetas;  ///< theta_1..theta_K
  std::vector<int> a;          ///< a_0..a_K of a_0 + sum a_j theta_j
  double alpha = 0.0;
  double beta = 0.0;
  bool is_constant = false;  ///< Lambda vanishes identically
};

struct Classification {
  bool trivial_spectrum_only = false;  ///< unit spectrum is {1}
  bool hyperbolic_mod_Y = false;       ///< ... and Ker(P - 1) is spanned by (Y(0), Y'(0))
  bool strongly_hyperbolic_mod_Y = false;
  bool constant_index = false;  ///< Lambda constant on the circle
  std::vector<int> mu_direct;   ///< lambda_*(1,N), N = 1..6, when constant_index
  std::vector<int> mu_predicted;  ///< epsilon + N * mu_0(gamma)
  bool identity_holds = true;
};

struct IterationReport {
  std::vector<IterationRow> rows;
  bool epsilon_constant = true;
  GrowthStats growth;
  std::optional<Classification> classification;
};

/// mu_0, mu, nu_*, nu_0 for N = 1..N_max; epsilon_N directly up to `direct_eps_max`.
inline std::vector<IterationRow> iterate_indices(const MorseSturmSystem& sys, const PoincareData& pd,
                                                 const IndexProfile& prof, int N_max, const ScanOptions& opt = {},
                                                 int direct_eps_max = 0) {
  if (N_max < 1) throw Error("N_max must be >= 1");
  std::vector<IterationRow> rows(N_max);
  parallel_for(static_cast<std::size_t>(N_max), opt.jobs, [&](std::size_t idx) {
    int N = static_cast<int>(idx) + 1;
    IterationRow& row = rows[idx];
    row.N = N;
    for (int k = 1; k <= N; ++k) {
      double th = CirclePoint::root_of_unity(k, N).theta();
      auto v = prof.lambda_at(th);
      if (!v) {
        ++row.recomputed_points;
        v = evaluate_lambda(sys, pd, th, opt).lambda;
      }
      row.mu0 += *v;
    }
    row.mu = prof.epsilon + row.mu0;
    row.nu_star = nullity_star(pd, CirclePoint(0.0), N, opt.index.tol).value;
    row.nu0 = nullity_zero(pd, CirclePoint(0.0), N, opt.index.tol).value;
    if (N <= direct_eps_max) row.epsilon_N = epsilon(sys, pd, Mesh(opt.mesh0.m * N), N, opt.index);
  });
  return rows;
}

inline GrowthStats growth_stats(const IndexProfile& prof) {
  GrowthStats g;
  const std::size_t K = prof.spectral_angles.size();
  g.thetas = prof.spectral_angles;
  std::vector<int> beta(K);
  for (std::size_t j = 0; j < K; ++j) beta[j] = prof.arcs[j].plateau;
  for (std::size_t j = 0; j < K; ++j) g.mean_index += (prof.arcs[j].right - prof.arcs[j].left) * beta[j];
  g.a.assign(K + 1, 0);
  g.a[0] = beta[K - 1];
  g.a[1] = beta[K - 1] - beta[0];
  for (std::size_t j = 2; j <= K; ++j) g.a[j] = beta[j - 2] - beta[j - 1];
  g.is_constant = prof.max_lambda() == 0;
  if (!g.is_constant) {
    std::size_t j0 = K;
    for (std::size_t j = 0; j < K && j0 == K; ++j)
      if (beta[j] > 0) j0 = j;
    if (j0 == K) j0 = 0;  // Lambda positive only at isolated points
    const auto& arc = prof.arcs[j0];
    g.alpha = (arc.right - arc.left) * beta[j0];
    g.beta = -static_cast<double>(beta[j0]) - 3.0 * static_cast<double>(K + 1) * prof.max_lambda();
  }
  return g;
}

/// Hyperbolicity flags; when Lambda is constant also checks mu(gamma^N) =
/// epsilon + N mu_0(gamma) against direct Galerkin values of lambda_*(1,N).
inline Classification classify(const MorseSturmSystem& sys, const PoincareData& pd, const IndexProfile& prof,
                               const ScanOptions& opt = {}, int N_check = 6) {
  Classification c;
  c.trivial_spectrum_only = true;
  int geo_one = 0;
  for (const auto& u : pd.unit_spectrum) {
    if (u.theta != 0.0) c.trivial_spectrum_only = false;
    else geo_one = u.geometric_P;
  }
  c.hyperbolic_mod_Y = c.trivial_spectrum_only && geo_one == 1;
  c.strongly_hyperbolic_mod_Y = c.hyperbolic_mod_Y && prof.epsilon == 0;
  int v0 = prof.points[0].lambda;
  c.constant_index = true;
  for (const auto& a : prof.arcs) c.constant_index = c.constant_index && a.plateau == v0;
  for (const auto& p : prof.points) c.constant_index = c.constant_index && p.lambda == v0;
  if (c.constant_index) {
    c.mu_direct.assign(N_check, 0);
    parallel_for(static_cast<std::size_t>(N_check), opt.jobs, [&](std::size_t i) {
      int N = static_cast<int>(i) + 1;
      c.mu_direct[i] = lambda_with_refinement(sys, pd, N, CirclePoint(0.0), ConstraintKind::star,
                                              Mesh(opt.mesh0.m * N), opt.index, opt.max_refinements)
                           .lambda;
    });
    for (int N = 1; N <= N_check; ++N) {
      c.mu_predicted.push_back(prof.epsilon + N * v0);
      c.identity_holds = c.identity_holds && c.mu_predicted.back() == c.mu_direct[N - 1];
    }
  }
  return c;
}

// ------------------------------------------------------------------ jumps

struct JumpRecord {
  double theta = 0.0;
  int left = 0;
  int right = 0;
  int point = 0;
  int nullity = 0;
  bool exempt = false;  ///< singular system at theta = 0
  bool bound_ok = true;
  bool semicontinuity_ok = true;
};

/// Jumps and drops of Lambda at spectral angles.
inline std::vector<JumpRecord> jump_table(const IndexProfile& prof) {
  std::vector<JumpRecord> out;
  for (std::size_t j = 0; j < prof.points.size(); ++j) {
    JumpRecord r;
    r.theta = prof.points[j].theta;
    r.left = prof.left_plateau(j);
    r.right = prof.right_plateau(j);
    r.point = prof.points[j].lambda;
    r.nullity = prof.points[j].nullity;
    if (r.left == r.right && r.point >= std::min(r.left, r.right)) continue;
    r.exempt = prof.singular && r.theta == 0.0;
    r.bound_ok = r.exempt || std::abs(r.left - r.right) <= r.nullity;
    r.semicontinuity_ok = r.exempt || r.point <= std::min(r.left, r.right);
    out.push_back(r);
  }
  return out;
}

/// Throws IdentityViolation on the first jump record breaking a bound.
inline void require_jump_bounds(const std::vector<JumpRecord>& table) {
  for (const auto& r : table)
    if (!r.bound_ok || !r.semicontinuity_ok)
      throw IdentityViolation("jump bound violated at theta=" + std::to_string(r.theta) + ": left " +
                              std::to_string(r.left) + ", right " + std::to_string(r.right) + ", point " +
                              std::to_string(r.point) + ", nullity " + std::to_string(r.nullity));
}

// ------------------------------------------------------------------ Fourier

/// V_k(t_i) = (1/N) sum_j omega^{-kj} T^j V(t_{i + j m}), k = 1..N, from a field of
/// the N-th iterate (rho = 1) on mesh m N to fields on mesh m with rho = omega^k.
inline std::vector<DiscreteField> psi_transform(const MorseSturmSystem& sys, const DiscreteField& V, int N) {
  if (N < 1) throw Error("N must be >= 1");
  if (V.m % N != 0) throw Error("mesh size " + std::to_string(V.m) + " not divisible by N=" + std::to_string(N));
  const int n = sys.n(), m = V.m / N;
  std::vector<CMatrix> Tj;
  for (int j = 0; j < N; ++j) Tj.push_back(sys.T_power(j).cast<cplx>());
  std::vector<DiscreteField> out;
  for (int k = 1; k <= N; ++k) {
    CirclePoint rho = CirclePoint::root_of_unity(k, N);
    DiscreteField f{n, m, detail::boundary_map(sys, 1, rho), CVector::Zero(static_cast<Eigen::Index>(n) * m)};
    for (int i = 0; i < m; ++i) {
      CVector acc = CVector::Zero(n);
      for (int j = 0; j < N; ++j) acc += CirclePoint::root_of_unity(-k * j, N).rho() * (Tj[j] * V.node(i + j * m));
      f.coeffs.segment(static_cast<Eigen::Index>(i) * n, n) = acc / static_cast<double>(N);
    }
    out.push_back(std::move(f));
  }
  return out;
}

/// Inverse of psi_transform: V(t_{l m + i}) = sum_k omega^{k l} T^{-l} V_k(t_i).
inline DiscreteField upsilon_transform(const MorseSturmSystem& sys, const std::vector<DiscreteField>& parts) {
  const int N = static_cast<int>(parts.size());
  if (N < 1) throw Error("upsilon needs at least one component");
  const int n = sys.n(), m = parts[0].m;
  DiscreteField V{n, m * N, detail::boundary_map(sys, N, CirclePoint(0.0)),
                  CVector::Zero(static_cast<Eigen::Index>(n) * m * N)};
  for (int l = 0; l < N; ++l) {
    CMatrix Tl = sys.T_power(-l).cast<cplx>();
    for (int i = 0; i < m; ++i) {
      CVector acc = CVector::Zero(n);
      for (int k = 1; k <= N; ++k) acc += CirclePoint::root_of_unity(k * l, N).rho() * parts[k - 1].node(i);
      V.coeffs.segment(static_cast<Eigen::Index>(l * m + i) * n, n) = Tl * acc;
    }
  }
  return V;
}

struct FourierReport {
  int N = 0;
  int mesh = 0;              ///< base mesh m; the iterate uses m N
  int lhs_zero = 0;          ///< lambda_0(1,N)
  int lhs_star = 0;          ///< lambda_*(1,N)
  int lambda_star_1 = 0;     ///< lambda_*(1,1)
  std::vector<int> terms;    ///< lambda_0(omega^k, 1) for theta = k/N, k = 0..N-1
  int rhs_zero = 0;
  int rhs_star = 0;
  bool nullities_agree = true;
  int refinements = 0;
  bool ok() const { return lhs_zero == rhs_zero && lhs_star == rhs_star; }
};

/// Both sides of the Fourier identities, the left by direct Galerkin on the
/// N-th iterate over mesh m N, the right on mesh m. A mismatch is retried on
/// refined meshes before IdentityViolation is thrown.
inline FourierReport fourier_check(const MorseSturmSystem& sys, const PoincareData& pd, int N, const Mesh& mesh,
                                   const IndexOptions& opt = {}, int jobs = 1, int max_refinements = 2) {
  if (N < 1) throw Error("N must be >= 1");
  Mesh base = mesh;
  FourierReport rep;
  for (int level = 0; level <= max_refinements; ++level) {
    rep = FourierReport{};
    rep.N = N;
    rep.mesh = base.m;
    rep.refinements = level;
    rep.terms.assign(N, 0);
    // tasks: 0 lhs zero, 1 lhs star, 2 lambda_*(1,1), 3.. terms
    std::vector<IndexResult> res(3 + static_cast<std::size_t>(N));
    parallel_for(res.size(), jobs, [&](std::size_t i) {
      if (i == 0) res[i] = restricted_index(sys, pd, N, CirclePoint(0.0), Mesh(base.m * N), ConstraintKind::zero, opt);
      else if (i == 1)
        res[i] = restricted_index(sys, pd, N, CirclePoint(0.0), Mesh(base.m * N), ConstraintKind::star, opt);
      else if (i == 2) res[i] = restricted_index(sys, pd, 1, CirclePoint(0.0), base, ConstraintKind::star, opt);
      else
        res[i] = restricted_index(sys, pd, 1, CirclePoint::root_of_unity(static_cast<int>(i) - 3, N), base,
                                  ConstraintKind::zero, opt);
    });
    rep.lhs_zero = res[0].lambda;
    rep.lhs_star = res[1].lambda;
    rep.lambda_star_1 = res[2].lambda;
    for (int k = 0; k < N; ++k) rep.terms[k] = res[3 + k].lambda;
    for (const auto& r : res) rep.nullities_agree = rep.nullities_agree && r.nullity_agrees;
    for (int k = 0; k < N; ++k) rep.rhs_zero += rep.terms[k];
    rep.rhs_star = rep.lambda_star_1;
    for (int k = 1; k < N; ++k) rep.rhs_star += rep.terms[k];
    if (rep.ok()) return rep;
    base = base.refined();
  }
  throw IdentityViolation("Fourier identity failed for N=" + std::to_string(N) + ": lambda_0(1,N)=" +
                          std::to_string(rep.lhs_zero) + " vs " + std::to_string(rep.rhs_zero) +
                          ", lambda_*(1,N)=" + std::to_string(rep.lhs_star) + " vs " + std::to_string(rep.rhs_star));
}

}  // namespace bott
