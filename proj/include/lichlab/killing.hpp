#pragma once

#include "lichlab/operators.hpp"

namespace lichlab {

/// Parameters of a conformal Killing field on R^3:
/// L(x) = 2<b,x>x - |x|^2 b + lambda x + c + omega x x  (10 parameters,
/// the skew matrix stored as the rotation vector omega).
struct CKVParams {
  double lambda = 0;
  Vec3 b{0, 0, 0};
  Vec3 c{0, 0, 0};
  Vec3 omega{0, 0, 0};
};

Vec3 ckv_eval(const CKVParams& p, const Vec3& x);
/// Full gradient dL_i/dx_j of the closed form (used to evaluate the analytic
/// conformal Killing residual, which cancels to zero).
Mat3 ckv_gradient(const CKVParams& p, const Vec3& x);

/// L^2-orthonormal basis of the 10-dimensional conformal Killing space,
/// sampled on the grid. `weight` scales the h^3 inner product per node
/// (U^10 for the sphere-transported product); empty means flat.
struct KillingBasis {
  GridPtr grid;
  double R = 0;
  std::vector<OneFormField> fields;
  std::vector<CKVParams> params;      // analytic combination per basis field
  std::vector<double> node_weight;    // inner-product weight per node
  std::array<double, 100> gram{};

  double inner(const OneFormField& a, const OneFormField& b) const;
};

KillingBasis make_killing_basis(const GridPtr& grid, double R,
                                const std::function<double(const Vec3&)>& weight = nullptr);

OneFormField killing_project(const KillingBasis& basis, const OneFormField& X);

/// Fundamental solution of the Lame-type operator:
/// H_ij(z) = (1/32pi)(7 delta_ij/|z| + z_i z_j/|z|^3).
Sym3 kernel_eval(const Vec3& x, const Vec3& y);

/// nu^k L_y(H_i(x-.))_kl at y, one row per i (analytic derivatives).
Mat3 kernel_traction(const Vec3& x, const Vec3& y, const Vec3& nu);

/// Ball-average replacement value for the cell containing the singularity:
/// <1/|z|> over the equal-volume ball is 3/(2 r_cell).
double kernel_singular_cell_value(double h);

/// W = H * Y by midpoint quadrature; the singular cell takes the analytic
/// ball average and near-field weights (offsets |k|_inf <= 2) carry a
/// calibration that makes the discrete vector Laplacian of the discrete
/// kernel reproduce the lattice delta. Y must vanish outside |x| <= R/2.
OneFormField kernel_convolve(const OneFormField& Y);

struct GreenForm {
  Vec3 x{0, 0, 0};
  int i = 0;
  double R = 0;
  OneFormField field;
  bool killing_free = false;
};

/// Assembles G_{i,R}(x,.) = H_i(x-.) + U - pi_R(H_i(x-.)) by one traction
/// BVP solve; the result is orthogonal to the sampled Killing space.
GreenForm neumann_green_assemble(const KillingBasis& basis, const Vec3& x, int i,
                                 const LinearSolverConfig& cfg);

/// Both sides of the reproduction identity (ipp form): returns
/// {volume integral + traction integral, (X - pi X)_i(x)}.
std::array<double, 2> green_reproduction(const GreenForm& green, const KillingBasis& basis,
                                         const OneFormField& X);

struct GreenVerifyReport {
  double max_r_G = 0;        // max |x-y| |G|
  double max_r2_dG = 0;      // max |x-y|^2 |grad G| (finite differences)
  double near_ratio_lo = 0;  // |G| / |H_i(x-y)| over the nearest shell
  double near_ratio_hi = 0;
  std::vector<double> killing_inner;  // <G, K_j>
};

GreenVerifyReport green_verify(const GreenForm& green, const KillingBasis& basis, double margin);

void dump_green(const GreenForm& green, const std::string& field_path, const std::string& json_path);

}  // namespace lichlab
