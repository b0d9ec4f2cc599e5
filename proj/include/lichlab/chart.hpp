#pragma once

#include <functional>

#include "lichlab/grid.hpp"

namespace lichlab {

/// Conformal factor of the stereographic chart, U(x) = sqrt(2/(1+|x|^2)).
inline double conf_factor(const Vec3& x) { return std::sqrt(2.0 / (1.0 + norm2(x))); }
inline Vec3 conf_factor_grad(const Vec3& x) {
  const double u3 = std::pow(conf_factor(x), 3);
  return {-0.5 * u3 * x[0], -0.5 * u3 * x[1], -0.5 * u3 * x[2]};
}

/// Stereographic chart of pole -P: maps S^3 \ {-P} to R^3 with P at the origin.
///
/// The chart frame (e1,e2,e3,Q) with Q = -P is built deterministically from P,
/// so identical poles give identical charts.
class ChartPole {
 public:
  explicit ChartPole(const Vec4& P, double eps_pole = 1e-8);

  const Vec4& P() const { return P_; }
  double eps_pole() const { return eps_; }

  Vec3 forward(const Vec4& y) const;   // throws PoleSingularity near -P
  Vec4 inverse(const Vec3& x) const;

  /// Jacobian of the inverse map, d(pi^-1)/dx: 4x3 (ambient rows).
  std::array<Vec4, 3> inverse_jacobian(const Vec3& x) const;  // columns
  /// Jacobian of the forward map at y on the sphere: 3x4 (chart rows).
  std::array<Vec4, 3> forward_jacobian(const Vec4& y) const;  // rows

  ScalarField pull_back_scalar(const GridPtr& g, const std::function<double(const Vec4&)>& u) const;
  /// Chart representative W[P] of a sphere 1-form given by ambient covector
  /// components: (W[P])_i = W_a d(pi^-1)^a/dx^i.
  OneFormField pull_back_one_form(const GridPtr& g, const std::function<Vec4(const Vec4&)>& w) const;
  /// Chart representative of a sphere symmetric 2-tensor (two Jacobian factors).
  SymTensorField pull_back_sym_tensor(
      const GridPtr& g, const std::function<std::array<Vec4, 4>(const Vec4&)>& t) const;

 private:
  Vec4 P_, Q_;              // Q = -P
  std::array<Vec4, 3> e_;   // orthonormal frame of Q^perp
  double eps_;
};

enum class ChartIdentity { ScalarLaplacian, Cko, VectorLaplacian };

/// Max-norm residual of the cited conformal identity over nodes with full
/// stencil support. Discrete differential operators on the chart side are
/// compared against the supplied sphere-side values:
///  - ScalarLaplacian:  Delta_xi(v) = U^5 * s        with v = u[P]*U sampled,
///    s = (Delta_h u + (3/4) u)[P] sampled.
///  - Cko:              U^4 L_xi(What) = T           with T = (L_h W)[P].
///  - VectorLaplacian:  Dvec(What) - 6 U^{-1} (L_xi What) dU = A,
///    A = (Dvec_h W)[P], What = U^{-4} W[P].
double chart_identity_residual(ChartIdentity kind, const ScalarField& chart_scalar,
                               const ScalarField& sphere_side);
double chart_identity_residual(ChartIdentity kind, const OneFormField& chart_what,
                               const SymTensorField& sphere_side);
double chart_identity_residual(ChartIdentity kind, const OneFormField& chart_what,
                               const OneFormField& sphere_side);

}  // namespace lichlab
