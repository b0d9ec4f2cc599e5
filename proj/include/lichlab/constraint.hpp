#pragma once

#include "lichlab/killing.hpp"
#include "lichlab/lichnerowicz.hpp"

namespace lichlab {

/// The physics tuple F = (tau, psi, pi, U). Scalars are sphere functions
/// sampled through the chart (tau[P] etc.); U holds the chart covariant
/// components of the transverse-traceless tensor.
struct PhysicsData {
  ScalarField tau, psi, pi;
  SymTensorField U;

  GridPtr grid() const { return tau.grid; }
  /// Max |flat trace| of U per node (proportional to the sphere trace).
  double trace_defect() const;
  /// Reported, not enforced: max |div_xi(U^2 U_chart)|, the flat-TT proxy.
  double divergence_defect() const;
};

struct Potential {
  std::function<double(double)> V, dV;
  /// dV must match finite differences of V within 1e-6 on the sampled range.
  void validate(double lo, double hi, int samples = 1000) const;
};

double fnorm(const PhysicsData& F);

/// Coefficient assembly of the conformal constraint system:
/// R_psi = (1/8)(6 - |grad psi|_h^2), B = (1/8)(2V(psi) - (2/3) tau^2),
/// a(W) = (1/8)(|U + L_h W|_h^2 + pi^2), rhs = -(2/3) phi^6 d tau - pi d psi.
struct CoefficientAssembly {
  ScalarField R_psi, B;
  const PhysicsData* F = nullptr;
  const Potential* V = nullptr;

  ScalarField a_field(const OneFormField& What) const;
  OneFormField vector_rhs(const ScalarField& phi) const;
};

CoefficientAssembly assemble_coefficients(const PhysicsData& F, const Potential& V);

struct GeneralizedCoefficients {
  ScalarField h, f, b;   // sphere-side scalar coefficients, chart-sampled
  SymTensorField U;      // chart components
  OneFormField X, Y;     // chart covariant components
  bool b_nonzero = false;

  GridPtr grid() const { return h.grid; }
  /// a(W) = (|U^{-4} U_chart + L_xi What|^2 + b)/8, the sphere-side magnitude.
  ScalarField a_field(const OneFormField& What) const;
};

/// Maps (cc) to the generalized system: X = -(2/3) d tau, Y = -pi d psi,
/// b = pi^2, f = B, h = R_psi. Throws NonPositiveF outside the positive case.
GeneralizedCoefficients to_generalized(const PhysicsData& F, const Potential& V);

struct HypothesisReport {
  bool coercive = false;
  double lambda_min = 0;
  double lambda_min_alt = 0;   // sub-ball restriction, truncation sensitivity
  bool f_positive = false;
  bool b_nonzero = false;
  bool ok() const { return coercive && f_positive && b_nonzero; }
};

HypothesisReport hypothesis_check(const GeneralizedCoefficients& G,
                                  const LinearSolverConfig& cfg = {});

/// phi is the sphere-side conformal factor (chart-sampled); W the chart-gauge
/// vector unknown, kept orthogonal to the conformal Killing fields.
struct SolutionPair {
  ScalarField phi;
  OneFormField W;
};

struct CoupledConfig {
  double tol = 1e-8;         // relative outer update
  int max_outer = 30;
  SolveConfig scalar;
  LinearSolverConfig linear;
};

std::pair<SolutionPair, SolveReport> coupled_solve(const GeneralizedCoefficients& G,
                                                   const SolutionPair& init, const CoupledConfig& cfg);

/// Physical initial data reconstructed per the conformal parametrization:
/// metric factor phi^4, K = (tau/3) phi^4 g + phi^-2 (U + L_g W), psi0 = psi,
/// psi1 = phi^-6 pi. All fields chart-represented.
struct PhysicalData {
  ScalarField metric_factor4;   // phi^4, sphere-side
  SymTensorField K;             // chart covariant components
  ScalarField psi0, psi1;
};

PhysicalData dataparam_map(const PhysicsData& F, const SolutionPair& sol);

/// tr_{phi^4 g} K per node; equals tau identically.
ScalarField trace_of_K(const PhysicsData& F, const SolutionPair& sol);

struct ConstraintResiduals {
  double hamiltonian = 0, momentum = 0;
  double hamiltonian_scale = 1, momentum_scale = 1;
};

ConstraintResiduals physical_constraint_residual(const PhysicsData& F, const Potential& V,
                                                 const SolutionPair& sol);

/// Closed-form problem inputs (chart expressions); the bridge between parsed
/// configuration files and the physics layer.
struct ProblemInputs {
  double R_trunc = 2.0, h = 0.1;
  Vec4 pole{0, 0, 0, 1};
  std::function<double(const Vec3&)> tau, psi, pi;
  std::function<Sym3(const Vec3&)> Uchart;   // may be null (zero tensor)
  Potential potential;
  std::string strategy = "newton";
  double tol = 1e-8;
  int max_outer = 30;
};

PhysicsData build_physics(const ProblemInputs& in, const GridPtr& grid);

}  // namespace lichlab
