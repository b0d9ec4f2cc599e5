#include "lichlab/lichnerowicz.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "lichlab/chart.hpp"

namespace lichlab {

double bubble_eval(const Bubble& b, const Vec3& x) {
  const double k = 4.0 * b.f_at_center / 3.0;
  const double d2 = norm2(x - b.center);
  return std::sqrt(2.0) * std::sqrt(b.mu) / std::sqrt(b.mu * b.mu + k * d2);
}

double pointwise_floor(double f, double b) {
  if (!(f > 0)) throw NonPositiveF("pointwise_floor needs f > 0");
  if (b < 0) throw std::invalid_argument("pointwise_floor needs b >= 0");
  if (b == 0) return 0.0;
  return (12.0 * b / 5.0) * std::pow(7.0 * b / (5.0 * f), -7.0 / 12.0);
}

std::vector<ConstantRoot> constant_branches(double h0, double f0, double a0) {
  if (!(f0 > 0)) throw NonPositiveF("constant_branches needs f0 > 0");
  auto g = [&](double c) { return f0 * std::pow(c, 5) + a0 * std::pow(c, -7) - h0 * c; };
  auto dg = [&](double c) { return 5 * f0 * std::pow(c, 4) - 7 * a0 * std::pow(c, -8) - h0; };
  auto scale = [&](double c) { return 5 * f0 * std::pow(c, 4) + 7 * a0 * std::pow(c, -8) + std::abs(h0); };

  const int n = 4000;
  const double lo = 1e-4, hi = 1e4;
  std::vector<double> cs(n), gs(n);
  for (int i = 0; i < n; ++i) {
    cs[i] = lo * std::pow(hi / lo, i / double(n - 1));
    gs[i] = g(cs[i]);
  }
  std::vector<ConstantRoot> roots;
  auto push_root = [&](double c) {
    for (const auto& r : roots)
      if (std::abs(r.c - c) < 1e-8 * (1 + std::abs(c))) return;
    ConstantRoot r;
    r.c = c;
    r.derivative = dg(c);
    r.kind = std::abs(r.derivative) < 1e-6 * scale(c) ? RootKind::Tangent : RootKind::Simple;
    roots.push_back(r);
  };
  for (int i = 0; i + 1 < n; ++i) {
    if (gs[i] == 0.0) push_root(cs[i]);
    if (gs[i] * gs[i + 1] < 0) {
      double a = cs[i], b = cs[i + 1];
      for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        if (g(a) * g(m) <= 0) b = m;
        else a = m;
      }
      push_root(0.5 * (a + b));
    }
  }
  // touching roots: local minima of g that reach zero without a sign change
  for (int i = 1; i + 1 < n; ++i) {
    if (!(gs[i] <= gs[i - 1] && gs[i] <= gs[i + 1])) continue;
    auto [cmin, gmin] = golden_min(g, cs[i - 1], cs[i + 1]);
    const double local = f0 * std::pow(cmin, 5) + a0 * std::pow(cmin, -7) + std::abs(h0) * cmin;
    if (std::abs(gmin) <= 1e-9 * (local + 1e-300)) push_root(cmin);
  }
  std::sort(roots.begin(), roots.end(), [](const ConstantRoot& a, const ConstantRoot& b) { return a.c < b.c; });
  return roots;
}

void ScalarProblem::validate() const {
  const std::size_t N = grid()->size();
  for (std::size_t i = 0; i < N; ++i) {
    if (!(f(i) > 0)) throw NonPositiveF("ScalarProblem needs f > 0 everywhere");
    if (a(i) < 0) throw std::invalid_argument("ScalarProblem needs a >= 0 everywhere");
  }
  if (gauge == ScalarGauge::Flat && bc == ScalarBc::Dirichlet && bc_values.size() != N)
    throw std::invalid_argument("Dirichlet problem needs bc_values");
}

namespace {

/// Shared assembly for the three problem variants. Unknowns are either all
/// nodes or the interior ones (flat Dirichlet).
struct NonlinearContext {
  const ScalarProblem& p;
  const BallGrid& g;
  double h2;
  std::vector<std::size_t> nodes;       // unknown -> node
  std::vector<int> unk;                 // node -> unknown or -1
  std::unique_ptr<ConformalScalarOperator> conf;

  explicit NonlinearContext(const ScalarProblem& prob) : p(prob), g(*prob.grid()) {
    const double h = g.spacing();
    h2 = h * h;
    const bool interior_only = p.gauge == ScalarGauge::Flat && p.bc == ScalarBc::Dirichlet;
    unk.assign(g.size(), -1);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!interior_only || g.is_interior(i)) {
        unk[i] = (int)nodes.size();
        nodes.push_back(i);
      }
    if (p.gauge == ScalarGauge::ConformalSphere)
      conf = std::make_unique<ConformalScalarOperator>(prob.grid());
  }

  std::size_t size() const { return nodes.size(); }

  void full_from_unknowns(const std::vector<double>& x, std::vector<double>& vfull) const {
    vfull.resize(g.size());
    if (p.gauge == ScalarGauge::Flat && p.bc == ScalarBc::Dirichlet) {
      vfull = p.bc_values.v;
      for (std::size_t k = 0; k < nodes.size(); ++k) vfull[nodes[k]] = x[k];
    } else {
      vfull = x;
    }
  }

  // nonlinear residual on unknowns; scale = max node magnitude of the terms
  void eval(const std::vector<double>& x, std::vector<double>& F, double* scale) const {
    std::vector<double> vfull;
    full_from_unknowns(x, vfull);
    F.assign(size(), 0.0);
    double sc = 1e-300;
    if (p.gauge == ScalarGauge::ConformalSphere) {
      std::vector<double> Aw(g.size());
      conf->apply(vfull, Aw);
      for (std::size_t k = 0; k < size(); ++k) {
        const std::size_t i = nodes[k];
        const double u6 = conf->mass(i), v = vfull[i];
        const double terms = p.h(i) * v - p.f(i) * std::pow(v, 5) - p.a(i) * std::pow(v, -7);
        F[k] = Aw[i] + u6 * terms;
        sc = std::max(sc, u6 * (std::abs(p.h(i) * v) + std::abs(p.f(i)) * std::pow(v, 5) +
                                std::abs(p.a(i)) * std::pow(v, -7)) + std::abs(Aw[i]));
      }
    } else {
      ScalarField vf(p.grid());
      vf.v = vfull;
      for (std::size_t k = 0; k < size(); ++k) {
        const std::size_t i = nodes[k];
        const double v = vfull[i];
        if (g.is_interior(i)) {
          double lap = 0;
          for (int d = 0; d < 3; ++d)
            lap += 2 * v - vfull[g.neighbor(i, d, +1)] - vfull[g.neighbor(i, d, -1)];
          lap /= h2;
          F[k] = lap + p.h(i) * v - p.f(i) * std::pow(v, 5) - p.a(i) * std::pow(v, -7);
          sc = std::max(sc, std::abs(lap) + std::abs(p.h(i) * v) + p.f(i) * std::pow(v, 5) +
                                std::abs(p.a(i)) * std::pow(v, -7));
        } else {
          // Robin row, scaled like the interior rows
          const Vec3 nu = g.boundary_normal(i);
          double s = v / norm(g.node(i));
          for (int d = 0; d < 3; ++d) s += nu[d] * diff1(vf, i, 0, d);
          F[k] = s / g.spacing();
        }
      }
    }
    if (scale) *scale = sc;
  }

  // zero-order Jacobian coefficient per unknown (interior rows)
  std::vector<double> jac_diag_terms(const std::vector<double>& x) const {
    std::vector<double> vfull;
    full_from_unknowns(x, vfull);
    std::vector<double> dcoef(size());
    for (std::size_t k = 0; k < size(); ++k) {
      const std::size_t i = nodes[k];
      const double v = vfull[i];
      dcoef[k] = p.h(i) - 5 * p.f(i) * std::pow(v, 4) + 7 * p.a(i) * std::pow(v, -8);
    }
    return dcoef;
  }

  // applies the linearization with the given zero-order coefficients
  void apply_linear(const std::vector<double>& dcoef, const std::vector<double>& x,
                    std::vector<double>& out) const {
    out.resize(size());
    if (p.gauge == ScalarGauge::ConformalSphere) {
      std::vector<double> u6c(g.size(), 0.0);
      for (std::size_t k = 0; k < size(); ++k) u6c[nodes[k]] = conf->mass(nodes[k]) * dcoef[k];
      std::vector<double> tmp(g.size());
      conf->apply(x, tmp, &u6c);
      out = tmp;
      return;
    }
    ScalarField xf(p.grid());
    if (p.bc == ScalarBc::Robin) xf.v = x;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < (std::ptrdiff_t)size(); ++k) {
      const std::size_t i = nodes[k];
      if (g.is_interior(i)) {
        double s = (6.0 / h2 + dcoef[k]) * x[k];
        for (int d = 0; d < 3; ++d)
          for (int sg = -1; sg <= 1; sg += 2) {
            const int nb = g.neighbor(i, d, sg);
            const int u = unk[nb];
            if (u >= 0) s -= x[u] / h2;
          }
        out[k] = s;
      } else {
        const Vec3 nu = g.boundary_normal(i);
        double s = x[k] / norm(g.node(i));
        for (int d = 0; d < 3; ++d) s += nu[d] * diff1(xf, i, 0, d);
        out[k] = s / g.spacing();
      }
    }
  }

  std::vector<double> jacobi_diag(const std::vector<double>& dcoef) const {
    std::vector<double> diag(size());
    for (std::size_t k = 0; k < size(); ++k) {
      const std::size_t i = nodes[k];
      if (p.gauge == ScalarGauge::ConformalSphere)
        diag[k] = conf->diag(i) + std::abs(conf->mass(i) * dcoef[k]) + 1e-30;
      else if (g.is_interior(i))
        diag[k] = 6.0 / h2 + std::abs(dcoef[k]) + 1e-30;
      else
        diag[k] = 1.0 / g.spacing();
    }
    return diag;
  }

  bool symmetric() const { return !(p.gauge == ScalarGauge::Flat && p.bc == ScalarBc::Robin); }
};

double inf_norm(const std::vector<double>& v) {
  return det_max(v.size(), [&](std::size_t i) { return std::abs(v[i]); });
}

}  // namespace

std::pair<ScalarField, SolveReport> lichnerowicz_solve(const ScalarProblem& p, const ScalarField& init,
                                                       SolveStrategy strategy, const SolveConfig& cfg) {
  p.validate();
  const BallGrid& g = *p.grid();
  double init_min = init.v[0];
  for (double v : init.v) init_min = std::min(init_min, v);
  if (!(init_min > 0)) throw NonPositiveField("initial iterate must be positive");
  const double floor = std::max(1e-8, 0.1 * init_min);

  NonlinearContext ctx(p);
  SolveReport rep;
  rep.strategy = strategy;
  rep.positivity_floor_used = floor;

  std::vector<double> x(ctx.size());
  for (std::size_t k = 0; k < ctx.size(); ++k) x[k] = init.v[ctx.nodes[k]];

  std::vector<double> F;
  double scale = 1;
  ctx.eval(x, F, &scale);
  double res = inf_norm(F);
  rep.residual_history.push_back(res);

  if (strategy == SolveStrategy::Monotone) {
    // init must be a sub- or super-solution (interior rows decide the sign)
    int sign = 0;
    for (std::size_t k = 0; k < ctx.size(); ++k) {
      if (!g.is_interior(ctx.nodes[k])) continue;
      if (F[k] > 1e-12 * scale) {
        if (sign < 0) throw NotBracketing("initial iterate is neither sub- nor super-solution");
        sign = 1;
      } else if (F[k] < -1e-12 * scale) {
        if (sign > 0) throw NotBracketing("initial iterate is neither sub- nor super-solution");
        sign = -1;
      }
    }
    std::vector<double> vfull, xn = x, rhs(ctx.size()), prev = x;
    for (int it = 1; it <= cfg.max_iter; ++it) {
      // shift exceeding the local Lipschitz bound of the nonlinearity
      double M = 0;
      for (std::size_t k = 0; k < ctx.size(); ++k) {
        const std::size_t i = ctx.nodes[k];
        M = std::max(M, 5 * p.f(i) * std::pow(std::max(x[k], 1.0) * 1.5, 4) +
                            7 * p.a(i) * std::pow(std::min(x[k], floor * 10) / 1.5, -8));
      }
      M = 1.5 * M + 1.0;
      std::vector<double> dcoef(ctx.size());
      for (std::size_t k = 0; k < ctx.size(); ++k) dcoef[k] = p.h(ctx.nodes[k]) + M;
      for (std::size_t k = 0; k < ctx.size(); ++k) {
        const std::size_t i = ctx.nodes[k];
        const double u6 = p.gauge == ScalarGauge::ConformalSphere ? ctx.conf->mass(i) : 1.0;
        rhs[k] = ctx.g.is_interior(i) || p.gauge == ScalarGauge::ConformalSphere
                     ? u6 * (M * x[k] + p.f(i) * std::pow(x[k], 5) + p.a(i) * std::pow(x[k], -7))
                     : 0.0;
      }
      const auto diag = ctx.jacobi_diag(dcoef);
      LinOp A = [&](const std::vector<double>& in, std::vector<double>& out) {
        ctx.apply_linear(dcoef, in, out);
      };
      if (ctx.symmetric()) cg_solve(A, rhs, xn, cfg.linear, &diag);
      else bicgstab_solve(A, rhs, xn, cfg.linear, &diag);
      // iterates move one way from a bracketing start
      for (std::size_t k = 0; k < ctx.size(); ++k) {
        if (sign < 0 && xn[k] < x[k] - 1e-9 * (1 + std::abs(x[k])))
          throw SolverDiverged("monotone iteration lost monotonicity");
        if (sign > 0 && xn[k] > x[k] + 1e-9 * (1 + std::abs(x[k])))
          throw SolverDiverged("monotone iteration lost monotonicity");
        if (xn[k] < floor) throw PositivityLost("monotone iterate fell below the floor");
      }
      x = xn;
      ctx.eval(x, F, &scale);
      res = inf_norm(F);
      rep.residual_history.push_back(res);
      rep.iterations = it;
      if (res <= cfg.tol * scale) break;
      if (it == cfg.max_iter) throw SolverDiverged("monotone iteration reached max_iter");
    }
  } else {
    for (int it = 1; it <= cfg.max_iter; ++it) {
      if (res <= cfg.tol * scale) break;
      const auto dcoef = ctx.jac_diag_terms(x);
      const auto diag = ctx.jacobi_diag(dcoef);
      LinOp A = [&](const std::vector<double>& in, std::vector<double>& out) {
        ctx.apply_linear(dcoef, in, out);
      };
      std::vector<double> rhsneg(ctx.size()), delta;
      for (std::size_t k = 0; k < ctx.size(); ++k) rhsneg[k] = -F[k];
      try {
        if (ctx.symmetric()) cg_solve(A, rhsneg, delta, cfg.linear, &diag);
        else bicgstab_solve(A, rhsneg, delta, cfg.linear, &diag);
      } catch (const SingularOperator&) {
        bicgstab_solve(A, rhsneg, delta, cfg.linear, &diag);
      }
      double t = 1.0;
      bool accepted = false;
      std::vector<double> xn(ctx.size()), Fn;
      for (int halving = 0; halving <= 30; ++halving, t *= 0.5) {
        bool positive = true;
        for (std::size_t k = 0; k < ctx.size(); ++k) {
          xn[k] = x[k] + t * delta[k];
          if (xn[k] < floor) { positive = false; break; }
        }
        if (!positive) continue;
        double sc2;
        ctx.eval(xn, Fn, &sc2);
        const double rn = inf_norm(Fn);
        if (rn <= (1.0 - 1e-4 * t) * res) {
          x = xn;
          F = Fn;
          res = rn;
          scale = sc2;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        bool tiny_step_ok = true;
        for (std::size_t k = 0; k < ctx.size() && tiny_step_ok; ++k)
          if (x[k] + 9.3e-10 * delta[k] < floor) tiny_step_ok = false;
        if (!tiny_step_ok) throw PositivityLost("no damped step stays above the positivity floor");
        throw SolverDiverged("Newton line search failed to reduce the residual");
      }
      rep.iterations = it;
      rep.residual_history.push_back(res);
      if (it == cfg.max_iter && res > cfg.tol * scale)
        throw SolverDiverged("Newton reached max_iter");
    }
  }
  rep.final_residual = res;
  std::vector<double> vfull;
  ctx.full_from_unknowns(x, vfull);
  ScalarField out(p.grid());
  out.v = vfull;
  return {out, rep};
}

double residual_eval(const ScalarProblem& p, const ScalarField& v) {
  const BallGrid& g = *p.grid();
  for (double x : v.v)
    if (!(x > 0)) throw NonPositiveField("residual_eval needs v > 0");
  if (p.gauge == ScalarGauge::ConformalSphere) {
    ConformalScalarOperator conf(p.grid());
    std::vector<double> Aw(g.size());
    conf.apply(v.v, Aw);
    return det_max(g.size(), [&](std::size_t i) {
      const double u6 = conf.mass(i);
      return std::abs(Aw[i] / u6 + p.h(i) * v(i) - p.f(i) * std::pow(v(i), 5) -
                      p.a(i) * std::pow(v(i), -7));
    });
  }
  const ScalarField lap = laplacian(v);
  return det_max(g.size(), [&](std::size_t i) -> double {
    if (!g.is_interior(i)) return 0.0;
    return std::abs(lap(i) + p.h(i) * v(i) - p.f(i) * std::pow(v(i), 5) - p.a(i) * std::pow(v(i), -7));
  });
}

void dump_report(const SolveReport& rep, const std::string& json_path) {
  nlohmann::json j;
  j["iterations"] = rep.iterations;
  j["residual_history"] = rep.residual_history;
  j["final_residual"] = rep.final_residual;
  j["strategy"] = rep.strategy == SolveStrategy::Newton ? "newton" : "monotone";
  j["positivity_floor"] = rep.positivity_floor_used;
  std::ofstream os(json_path);
  os << j.dump(2) << "\n";
}

}  // namespace lichlab
