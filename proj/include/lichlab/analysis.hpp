#pragma once

#include "lichlab/constraint.hpp"

namespace lichlab {

struct ConcentrationPoint {
  std::size_t node = 0;
  Vec3 x{0, 0, 0};
  double height = 0;
  double mu = 0;   // 2/height^2, inverting B(center) = sqrt(2) mu^{-1/2}
};

struct ConcentrationReport {
  std::vector<ConcentrationPoint> points;
  bool separation_ok = false;
  double min_separation_value = 0;   // min over pairs of d^(1/2) u(x_i)
  double bound_constant = 0;         // max of (min_i d(x_i,x))^3 (u^6 + |L W|)
};

ScalarField synthesize_blowup_field(const std::vector<Bubble>& bubbles, const ScalarField& background);

/// Greedy extraction of concentration points: discrete local maxima with
/// small gradient, height-sorted, separation-filtered by d^(1/2) u >= 1.
ConcentrationReport concentration_detect(const ScalarField& u, const SymTensorField* Lw,
                                         double threshold);

/// sup over B(0, inner) / inf over B(0, inner); u must be positive on the
/// outer ball.
double harnack_ratio(const ScalarField& u, double inner_radius, double outer_radius);

/// |LHS - RHS| of the Pohozaev identity on B(0, delta):
/// int (x.grad v + v/2) Delta_xi v = int_dB ((d/2)|grad v|^2 - v d_nu v / 2
/// - d (d_nu v)^2). Volume by midpoint with fractional boundary cells,
/// sphere quadrature with trilinear interpolation.
double pohozaev_residual(const ScalarField& v, double delta);

struct BubbleVectorResult {
  std::vector<Vec3> values;      // V at the evaluation points
  Mat3 rescaled_LV{};            // L_xi V at the first eval point (FD of the quadrature)
  Mat3 P_limit{};                // the asymptotic profile at that point
  double rel_error = 0;          // on the requested entry
};

/// V_i(x) = X0^j int B^6(y) H_ij(x,y) dy by substituted spherical product
/// quadrature; compares (1/|X0|) L_xi V against the explicit limit profile
/// P(x) at eval_points[0] on entry (entry_i, entry_j).
BubbleVectorResult bubble_vector_field(const Vec3& X0, const Bubble& b,
                                       const std::vector<Vec3>& eval_points, int entry_i, int entry_j);

/// The explicit limit profile of the rescaled L_xi V.
Mat3 bubble_vector_limit_profile(const Vec3& zeta, double f0, const Vec3& x);

struct StabilityRow {
  double delta = 0;
  double data_distance = 0;
  double solution_distance = 0;
  int outer_iters = 0;
  std::string status = "ok";
};

struct PotentialPerturbation {
  double delta = 0;
  Potential potential;   // V_delta, dV_delta
};

struct StabilityResult {
  std::vector<StabilityRow> rows;
  SolutionPair base_solution;
};

/// Theorem-1 experiment at desk scale: solves the base problem, then each
/// perturbed problem warm-started from the base solution, recording the data
/// distance (F-norm difference + C^1 potential distance on the psi-range)
/// and the solution distance (C^1 of phi difference + C^0 of L W difference).
StabilityResult stability_experiment(const ProblemInputs& base,
                                     const std::vector<PotentialPerturbation>& family,
                                     const CoupledConfig& cfg);

}  // namespace lichlab
