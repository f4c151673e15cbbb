// bott: command-line front end for Morse-Sturm index computations.
//
// Exit codes: 0 success, 1 usage, 2 validation failure, 3 nonconvergence,
// 4 identity violation.

#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "bott/bott.hpp"
#include "bott/generators.hpp"
#include "bott/io.hpp"
#include "bott/validation.hpp"

namespace {

using bott::io::json;

struct RunConfig {
  std::string command;
  std::string input;
  std::string generate;
  int mesh = 64;
  long ode_steps = 0;  // 0: 1000 per unit of N
  int N = 1;
  int N_max = 6;
  double theta = 0.0;
  std::string kind = "zero";
  std::string out;
  std::string format = "json";
  int jobs = 1;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double tol_eig = 1.0;
  double tol_rank = 1e-6;
};

class Runner {
 public:
  explicit Runner(const RunConfig& cfg) : cfg_(cfg) {
    if (cfg.tol_eig <= 0 || cfg.tol_rank <= 0) throw CLI::ValidationError("tolerances must be positive");
    if (cfg.jobs < 1) throw CLI::ValidationError("--jobs must be >= 1");
    tol_.eig = cfg.tol_eig;
    tol_.rank = cfg.tol_rank;
    opt_.mesh0 = bott::Mesh(cfg.mesh);
    opt_.index.tol = tol_;
    opt_.jobs = cfg.jobs;
  }

  int run() {
    const std::string& c = cfg_.command;
    if (c == "generate") return cmd_generate();
    const auto& sys = system();
    if (c == "validate") return cmd_validate(sys);
    bott::require_valid(bott::validate(sys, tol_));
    if (c == "poincare") return emit(bott::io::to_json(pd()));
    if (c == "index") return cmd_index(sys);
    if (c == "scan") return cmd_scan(sys);
    if (c == "iterate") return cmd_iterate(sys);
    if (c == "fourier-check") return cmd_fourier(sys);
    if (c == "growth") return cmd_growth(sys);
    if (c == "classify") return cmd_classify(sys);
    if (c == "report") return cmd_report(sys);
    throw CLI::ValidationError("unknown command " + c);
  }

 private:
  const bott::MorseSturmSystem& system() {
    if (!sys_) {
      if (!cfg_.input.empty() == !cfg_.generate.empty())
        throw CLI::ValidationError("exactly one of --input or --generate is required");
      if (!cfg_.input.empty()) sys_.emplace(bott::io::load_system(cfg_.input));
      else sys_.emplace(bott::generators::from_spec(generator_spec()));
    }
    return *sys_;
  }

  std::string generator_spec() const {
    std::string spec = cfg_.generate;
    if (cfg_.seed_given && spec.rfind("tilted", 0) == 0 && spec.find("seed=") == std::string::npos)
      spec += (spec.find(':') == std::string::npos ? ":" : ",") + std::string("seed=") + std::to_string(cfg_.seed);
    return spec;
  }

  long steps() const { return cfg_.ode_steps > 0 ? cfg_.ode_steps : bott::default_steps(1); }

  const bott::PoincareData& pd() {
    if (!pd_) pd_.emplace(bott::poincare(system(), steps(), tol_));
    return *pd_;
  }

  const bott::IndexProfile& profile() {
    if (!profile_) profile_.emplace(bott::scan_circle(system(), pd(), opt_));
    return *profile_;
  }

  int write(const std::string& text) {
    if (cfg_.out.empty()) {
      std::cout << text;
      return 0;
    }
    std::ofstream f(cfg_.out);
    if (!f) throw bott::Error("cannot write " + cfg_.out);
    f << text;
    return 0;
  }

  int emit(const json& j) { return write(j.dump(2) + "\n"); }

  int cmd_generate() {
    auto sys = bott::generators::from_spec(generator_spec());
    auto rep = bott::validate(sys, tol_);
    if (!rep.passed) throw bott::ValidationError("generator produced invalid data: " + rep.first_failure()->diagnostic);
    return emit(bott::io::to_json(sys));
  }

  int cmd_validate(const bott::MorseSturmSystem& sys) {
    auto rep = bott::validate(sys, tol_);
    json j = bott::io::to_json(rep);
    j["singular"] = bott::is_singular(sys, tol_.singular).singular;
    emit(j);
    if (!rep.passed) {
      std::cerr << "validation failed: " << rep.first_failure()->diagnostic << "\n";
      return 2;
    }
    return 0;
  }

  int cmd_index(const bott::MorseSturmSystem& sys) {
    auto kind = bott::parse_kind(cfg_.kind);
    auto r = bott::lambda_with_refinement(sys, pd(), cfg_.N, bott::CirclePoint(cfg_.theta), kind,
                                          bott::Mesh(cfg_.mesh * cfg_.N), opt_.index, opt_.max_refinements);
    std::cout << r.lambda << "\n";
    if (!cfg_.out.empty()) {
      json j = {{"theta", bott::CirclePoint(cfg_.theta).theta()},
                {"N", cfg_.N},
                {"kind", bott::to_string(kind)},
                {"lambda", r.lambda},
                {"discrete_nullity", r.discrete_nullity},
                {"ode_nullity", r.ode_nullity},
                {"meshes", r.meshes},
                {"lambdas", r.lambdas},
                {"monotone", r.monotone}};
      std::ofstream(cfg_.out) << j.dump(2) << "\n";
    }
    return 0;
  }

  int cmd_scan(const bott::MorseSturmSystem&) {
    const auto& p = profile();
    if (cfg_.format == "csv") return write(bott::io::profile_csv(p));
    json j = bott::io::to_json(p);
    auto table = bott::jump_table(p);
    j["jumps"] = bott::io::to_json(table);
    emit(j);
    bott::require_jump_bounds(table);
    return 0;
  }

  int cmd_iterate(const bott::MorseSturmSystem& sys) {
    const auto& p = profile();
    auto rows = bott::iterate_indices(sys, pd(), p, cfg_.N_max, opt_, std::min(cfg_.N_max, 5));
    for (const auto& r : rows)
      if (r.epsilon_N && *r.epsilon_N != p.epsilon)
        throw bott::IdentityViolation("epsilon of iterate " + std::to_string(r.N) + " differs from epsilon");
    if (cfg_.format == "csv") return write(bott::io::iteration_csv(rows, p.epsilon));
    return emit(json{{"epsilon", p.epsilon}, {"rows", bott::io::to_json(rows)}});
  }

  int cmd_fourier(const bott::MorseSturmSystem& sys) {
    auto f = bott::fourier_check(sys, pd(), cfg_.N, bott::Mesh(cfg_.mesh), opt_.index, cfg_.jobs);
    std::string zero = std::to_string(f.lhs_zero) + " =", star = std::to_string(f.lhs_star) + " = " +
                                                                  std::to_string(f.lambda_star_1);
    for (int k = 0; k < f.N; ++k) zero += (k ? " + " : " ") + std::to_string(f.terms[k]);
    for (int k = 1; k < f.N; ++k) star += " + " + std::to_string(f.terms[k]);
    std::cout << zero << " OK\n" << star << " OK\n";
    if (!cfg_.out.empty()) std::ofstream(cfg_.out) << bott::io::to_json(f).dump(2) << "\n";
    return 0;
  }

  int cmd_growth(const bott::MorseSturmSystem& sys) {
    const auto& p = profile();
    auto g = bott::growth_stats(p);
    auto rows = bott::iterate_indices(sys, pd(), p, cfg_.N_max, opt_);
    json j = bott::io::to_json(g);
    j["N_max"] = cfg_.N_max;
    j["mu0_over_N"] = static_cast<double>(rows.back().mu0) / cfg_.N_max;
    return emit(j);
  }

  int cmd_classify(const bott::MorseSturmSystem& sys) {
    auto c = bott::classify(sys, pd(), profile(), opt_);
    emit(bott::io::to_json(c));
    if (!c.identity_holds) throw bott::IdentityViolation("mu(gamma^N) != epsilon + N mu_0(gamma)");
    return 0;
  }

  int cmd_report(const bott::MorseSturmSystem& sys) {
    json j;
    j["system"] = bott::io::to_json(sys);
    j["validation"] = bott::io::to_json(bott::validate(sys, tol_));
    j["singular"] = bott::is_singular(sys, tol_.singular).singular;
    json spec = bott::io::to_json(pd());
    j["unit_spectrum"] = spec["unit_spectrum"];
    const auto& p = profile();
    j["profile"] = bott::io::to_json(p);
    auto table = bott::jump_table(p);
    j["jumps"] = bott::io::to_json(table);
    auto rows = bott::iterate_indices(sys, pd(), p, cfg_.N_max, opt_, std::min(cfg_.N_max, 5));
    j["iteration"] = bott::io::to_json(rows);
    j["growth"] = bott::io::to_json(bott::growth_stats(p));
    auto c = bott::classify(sys, pd(), p, opt_);
    j["classification"] = bott::io::to_json(c);
    emit(j);
    bott::require_jump_bounds(table);
    for (const auto& r : rows)
      if (r.epsilon_N && *r.epsilon_N != p.epsilon)
        throw bott::IdentityViolation("epsilon of iterate " + std::to_string(r.N) + " differs from epsilon");
    if (!c.identity_holds) throw bott::IdentityViolation("mu(gamma^N) != epsilon + N mu_0(gamma)");
    return 0;
  }

  RunConfig cfg_;
  bott::Tolerances tol_;
  bott::ScanOptions opt_;
  std::optional<bott::MorseSturmSystem> sys_;
  std::optional<bott::PoincareData> pd_;
  std::optional<bott::IndexProfile> profile_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Morse index, nullity and Bott-type index function of periodic Morse-Sturm systems"};
  app.require_subcommand(1);
  RunConfig cfg;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"validate", "check the structural conditions of the problem data"},
      {"poincare", "linear Poincare map and its unit-circle spectrum"},
      {"index", "restricted index lambda for one (theta, N, kind)"},
      {"scan", "index function on the circle"},
      {"iterate", "index and nullity of the iterates"},
      {"fourier-check", "Fourier identities for the N-th iterate"},
      {"growth", "mean index and growth constants"},
      {"classify", "hyperbolicity flags"},
      {"report", "full pipeline"},
      {"generate", "emit a generated system as a problem file"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    sub->callback([&cfg, name = name] { cfg.command = name; });
  }

  app.add_option("--input", cfg.input, "problem JSON file");
  app.add_option("--generate", cfg.generate, "generator spec, e.g. oscillator:k=9pi2");
  app.add_option("--mesh", cfg.mesh, "initial mesh size m")->check(CLI::Range(8, 1 << 20));
  app.add_option("--ode-steps", cfg.ode_steps, "RK4 steps for the Poincare map")->check(CLI::Range(32L, 1L << 30));
  app.add_option("--N", cfg.N, "iteration number")->check(CLI::Range(1, 1000));
  app.add_option("--N-max", cfg.N_max, "largest iterate")->check(CLI::Range(1, 1000));
  app.add_option("--theta", cfg.theta, "angle, rho = exp(2 pi i theta)");
  app.add_option("--kind", cfg.kind, "constraint kind")->check(CLI::IsMember({"star", "zero"}));
  app.add_option("--out", cfg.out, "output path");
  app.add_option("--format", cfg.format, "output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--jobs", cfg.jobs, "worker threads")->check(CLI::Range(1, 256));
  auto* seed = app.add_option("--seed", cfg.seed, "seed for randomized generators");
  app.add_option("--tol-eig", cfg.tol_eig, "scale of the discrete kernel window");
  app.add_option("--tol-rank", cfg.tol_rank, "relative singular-value threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  cfg.seed_given = seed->count() > 0;

  try {
    return Runner(cfg).run();
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const bott::ValidationError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return 2;
  } catch (const bott::NonconvergenceError& e) {
    std::cerr << "nonconvergence: " << e.what() << "\n";
    return 3;
  } catch (const bott::IdentityViolation& e) {
    std::cerr << "identity violation: " << e.what() << "\n";
    return 4;
  } catch (const bott::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }
}
