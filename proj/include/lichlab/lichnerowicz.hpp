#pragma once

#include "lichlab/operators.hpp"

namespace lichlab {

/// Exact entire solution of Delta_xi B = f B^5:
/// B(x) = sqrt(2) mu^{1/2} (mu^2 + (4f/3)|x - center|^2)^{-1/2}.
struct Bubble {
  double mu = 1.0;
  Vec3 center{0, 0, 0};
  double f_at_center = 0.75;
};

double bubble_eval(const Bubble& b, const Vec3& x);

/// min over t>0 of f t^5 + b t^-7 = (12b/5)(7b/(5f))^{-7/12}; 0 when b = 0.
double pointwise_floor(double f, double b);

enum class RootKind { Simple, Tangent };

struct ConstantRoot {
  double c = 0;
  RootKind kind = RootKind::Simple;
  double derivative = 0;   // g'(c) with g(c) = f c^5 + a c^-7 - h c
};

/// All positive roots of f0 c^5 + a0 c^-7 - h0 c = 0, by sign-change
/// bracketing on a log grid plus bisection; touching (double) roots found by
/// minimizing g and flagged Tangent when |g'| < 1e-6 * scale.
std::vector<ConstantRoot> constant_branches(double h0, double f0, double a0);

enum class ScalarGauge {
  Flat,             // Delta_xi v + h v = f v^5 + a v^-7 with Dirichlet/Robin closure
  ConformalSphere,  // -div(U^2 grad w) + U^6(h w - f w^5 - a w^-7) = 0, zero-flux closure
};

struct ScalarProblem {
  ScalarField h, f, a;
  ScalarBc bc = ScalarBc::Robin;
  ScalarField bc_values;        // Dirichlet only
  ScalarGauge gauge = ScalarGauge::Flat;

  GridPtr grid() const { return h.grid; }
  void validate() const;
};

enum class SolveStrategy { Newton, Monotone };

struct SolveReport {
  int iterations = 0;
  std::vector<double> residual_history;
  double final_residual = 0;
  SolveStrategy strategy = SolveStrategy::Newton;
  double positivity_floor_used = 0;
};

struct SolveConfig {
  double tol = 1e-10;           // relative residual
  int max_iter = 60;
  LinearSolverConfig linear;
};

/// Damped Newton (residual Armijo, factor 0.5, max 30 halvings, iterates kept
/// above the positivity floor) or the monotone shifted fixed point from a
/// sub-/super-solution.
std::pair<ScalarField, SolveReport> lichnerowicz_solve(const ScalarProblem& p, const ScalarField& init,
                                                       SolveStrategy strategy, const SolveConfig& cfg);

/// Max interior residual |Delta v + h v - f v^5 - a v^-7| (flat gauge) or the
/// sphere-side equivalent (conformal gauge, U^6-normalized).
double residual_eval(const ScalarProblem& p, const ScalarField& v);

void dump_report(const SolveReport& rep, const std::string& json_path);

}  // namespace lichlab
