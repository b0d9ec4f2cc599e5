// lichlab — solver and verification laboratory for the conformal constraint
// system of a scalar-field spacetime on the round 3-sphere.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "lichlab/analysis.hpp"
#include "lichlab/chart.hpp"
#include "lichlab/config.hpp"
#include "lichlab/killing.hpp"
#include "lichlab/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lichlab;

namespace {

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[64];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
  return buf;
}

struct Manifest {
  std::string command;
  uint64_t config_hash = 0;
  double R = 0, h = 0;
  uint64_t seed = 0;
  std::string started, finished;
  std::vector<std::string> artifacts;
  bool partial = false;

  void write(const fs::path& dir) const {
    json j;
    j["command"] = command;
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx", (unsigned long long)config_hash);
    j["config_hash"] = hex;
    j["grid"] = {{"R_trunc", R}, {"h", h}};
    j["seed"] = seed;
    j["started"] = started;
    j["finished"] = finished;
    j["artifacts"] = artifacts;
    j["partial"] = partial;
    j["tool"] = "lichlab 1.0";
    std::ofstream os(dir / "manifest.json");
    os << j.dump(2) << "\n";
  }
};

int cmd_solve(const ProblemConfig& cfg, const fs::path& out, Manifest& man) {
  GridPtr grid = make_ball_grid(cfg.R_trunc, cfg.h);
  const ProblemInputs in = make_inputs(cfg);
  const PhysicsData F = build_physics(in, grid);
  const GeneralizedCoefficients G = to_generalized(F, in.potential);

  CoupledConfig ccfg;
  ccfg.tol = in.tol;
  ccfg.max_outer = in.max_outer;
  ccfg.scalar.tol = std::min(1e-10, in.tol);
  SolutionPair init;
  init.phi = ScalarField(grid, 1.0);
  init.W = OneFormField(grid);
  auto [sol, rep] = coupled_solve(G, init, ccfg);

  dump_field(sol.phi, (out / "phi.elfg").string());
  dump_field(sol.W, (out / "W.elfg").string());
  export_csv(sol.phi, (out / "phi.csv").string());
  dump_report(rep, (out / "solve_report.json").string());
  man.artifacts = {"phi.elfg", "W.elfg", "phi.csv", "solve_report.json"};

  const ConstraintResiduals cres = physical_constraint_residual(F, in.potential, sol);
  std::printf("solve: outer iterations %d, final update %.3e\n", rep.iterations, rep.final_residual);
  std::printf("constraint residuals: hamiltonian %.3e (scale %.3e), momentum %.3e (scale %.3e)\n",
              cres.hamiltonian, cres.hamiltonian_scale, cres.momentum, cres.momentum_scale);
  return 0;
}

int cmd_stability(const ProblemConfig& cfg, const fs::path& out, Manifest& man) {
  if (!cfg.stability) {
    std::fprintf(stderr, "stability: config has no [stability] section\n");
    return 2;
  }
  const ProblemInputs in = make_inputs(cfg);
  CoupledConfig ccfg;
  ccfg.tol = in.tol;
  ccfg.max_outer = in.max_outer;
  ccfg.scalar.tol = std::min(1e-10, in.tol);
  const auto family = make_perturbations(cfg);
  const StabilityResult res = stability_experiment(in, family, ccfg);
  write_stability_csv(res.rows, (out / "stability.csv").string());
  write_stability_plot_csv(res.rows, (out / "stability_loglog.csv").string());
  man.artifacts = {"stability.csv", "stability_loglog.csv"};
  bool all_ok = true;
  for (const auto& r : res.rows) {
    std::printf("delta=%.3e data=%.6e solution=%.6e iters=%d %s\n", r.delta, r.data_distance,
                r.solution_distance, r.outer_iters, r.status.c_str());
    if (r.status != "ok") all_ok = false;
  }
  return all_ok ? 0 : 1;
}

int cmd_verify(const std::vector<std::string>& suites, uint64_t seed, int workers,
               const fs::path& out, Manifest& man) {
  const auto plan = verify_suite_select(suites);
  std::vector<std::vector<SuiteCheck>> results(plan.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < plan.size(); ++i) results[i] = run_verify_suite(plan[i], seed);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mu;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= plan.size()) return;
            i = next++;
          }
          results[i] = run_verify_suite(plan[i], seed);
        }
      });
    for (auto& t : pool) t.join();
  }
  std::ofstream os(out / "verify.csv");
  os << "suite,check,value,threshold,comparison,pass\n";
  bool all = true;
  char buf[160];
  for (const auto& res : results)
    for (const auto& c : res) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%s,%s\n", c.suite.c_str(), c.name.c_str(),
                    c.value, c.threshold, c.lower_bound ? ">=" : "<=", c.pass ? "pass" : "FAIL");
      os << buf;
      std::printf("%-10s %-28s %12.4e %s %12.4e  %s\n", c.suite.c_str(), c.name.c_str(), c.value,
                  c.lower_bound ? ">=" : "<=", c.threshold, c.pass ? "pass" : "FAIL");
      all = all && c.pass;
    }
  man.artifacts = {"verify.csv"};
  return all ? 0 : 1;
}

int cmd_green(const ProblemConfig& cfg, const std::vector<std::string>& points, int component,
              const fs::path& out, Manifest& man) {
  GridPtr grid = make_ball_grid(cfg.R_trunc, cfg.h);
  KillingBasis basis = make_killing_basis(grid, cfg.R_trunc);
  LinearSolverConfig lin;
  lin.tol_rel = 1e-9;
  json report = json::array();
  int idx = 0;
  for (const auto& spec : points) {
    Vec3 x{};
    if (std::sscanf(spec.c_str(), "%lf,%lf,%lf", &x[0], &x[1], &x[2]) != 3) {
      std::fprintf(stderr, "green: bad --point '%s' (want x,y,z)\n", spec.c_str());
      return 2;
    }
    const GreenForm G = neumann_green_assemble(basis, x, component, lin);
    const GreenVerifyReport rep = green_verify(G, basis, 0.1);
    const std::string base = "green_" + std::to_string(idx++);
    dump_green(G, (out / (base + ".elfg")).string(), (out / (base + ".json")).string());
    man.artifacts.push_back(base + ".elfg");
    man.artifacts.push_back(base + ".json");
    json r;
    r["x"] = {x[0], x[1], x[2]};
    r["i"] = component;
    r["max_r_G"] = rep.max_r_G;
    r["max_r2_dG"] = rep.max_r2_dG;
    r["near_ratio"] = {rep.near_ratio_lo, rep.near_ratio_hi};
    r["killing_inner"] = rep.killing_inner;
    report.push_back(r);
    std::printf("green %s: max|z||G|=%.4e max|z|^2|dG|=%.4e near ratio [%.3f, %.3f]\n",
                spec.c_str(), rep.max_r_G, rep.max_r2_dG, rep.near_ratio_lo, rep.near_ratio_hi);
  }
  std::ofstream os(out / "green_verify.json");
  os << report.dump(2) << "\n";
  man.artifacts.push_back("green_verify.json");
  return 0;
}

int cmd_detect(const std::string& field_path, double threshold, const fs::path& out, Manifest& man) {
  ScalarField u{load_field<1>(field_path)};
  const ConcentrationReport rep = concentration_detect(u, nullptr, threshold);
  json j;
  j["separation_ok"] = rep.separation_ok;
  j["bound_constant"] = rep.bound_constant;
  j["points"] = json::array();
  for (const auto& p : rep.points)
    j["points"].push_back({{"x", {p.x[0], p.x[1], p.x[2]}}, {"height", p.height}, {"mu", p.mu}});
  std::ofstream os(out / "detect.json");
  os << j.dump(2) << "\n";
  man.artifacts = {"detect.json"};
  std::printf("detect: %zu point(s), separation_ok=%d, bound constant %.4e\n", rep.points.size(),
              (int)rep.separation_ok, rep.bound_constant);
  for (const auto& p : rep.points)
    std::printf("  x=(%.4f, %.4f, %.4f) height=%.4f mu=%.5f\n", p.x[0], p.x[1], p.x[2], p.height, p.mu);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal constraint solver and verification laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", field_path;
  std::vector<std::string> suites, points;
  uint64_t seed = 0;
  int workers = 1, component = 0;
  double threshold = 1e-2;
  if (const char* env = std::getenv("LICH_LAB_WORKERS")) workers = std::max(1, std::atoi(env));

  app.add_option("--out", out_dir, "output directory");
  app.add_option("--workers", workers, "worker pool size");
  app.add_option("--seed", seed, "random seed");

  auto* solve = app.add_subcommand("solve", "solve the coupled constraint system");
  solve->add_option("--config", config_path, "problem definition file")->required();
  auto* stability = app.add_subcommand("stability", "run the stability-under-perturbation experiment");
  stability->add_option("--config", config_path, "problem definition file")->required();
  auto* verify = app.add_subcommand("verify", "run the identity verification suites");
  verify->add_option("--suite", suites, "suite name (repeatable; default all)");
  auto* green = app.add_subcommand("green", "assemble and verify Neumann Green forms");
  green->add_option("--config", config_path, "problem definition file")->required();
  green->add_option("--point", points, "source point x,y,z (repeatable)")->required();
  green->add_option("--component", component, "form index i in 0..2");
  auto* detect = app.add_subcommand("detect", "detect concentration points in a field file");
  detect->add_option("--field", field_path, "scalar field dump")->required();
  detect->add_option("--threshold", threshold, "gradient threshold");

  CLI11_PARSE(app, argc, argv);

  Manifest man;
  man.seed = seed;
  man.started = now_iso();
  const fs::path out(out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);

  ProblemConfig cfg;
  const bool needs_config = solve->parsed() || stability->parsed() || green->parsed();
  if (needs_config) {
    try {
      cfg = load_problem_config(config_path);
    } catch (const ConfigParseError& e) {
      std::fprintf(stderr, "%s\n", e.what());
      return 2;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 2;
    }
    man.config_hash = cfg.hash();
    man.R = cfg.R_trunc;
    man.h = cfg.h;
  }

  int rc = 0;
  try {
    if (solve->parsed()) {
      man.command = "solve";
      rc = cmd_solve(cfg, out, man);
    } else if (stability->parsed()) {
      man.command = "stability";
      rc = cmd_stability(cfg, out, man);
    } else if (verify->parsed()) {
      man.command = "verify";
      try {
        rc = cmd_verify(suites, seed, workers, out, man);
      } catch (const UnknownSuite& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
      }
    } else if (green->parsed()) {
      man.command = "green";
      rc = cmd_green(cfg, points, component, out, man);
    } else if (detect->parsed()) {
      man.command = "detect";
      rc = cmd_detect(field_path, threshold, out, man);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    man.partial = true;
    man.finished = now_iso();
    man.write(out);
    return 1;
  }
  man.finished = now_iso();
  man.write(out);
  return rc;
}
