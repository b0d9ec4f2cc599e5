#pragma once

#include <optional>

#include "lichlab/grid.hpp"

namespace lichlab {

// All operators use the geometer sign convention: Delta = -div grad has
// nonnegative spectrum, and Dvec = -div(L.) is the Lame-type operator.

/// D_d f_c at node i: centered where both axis neighbors exist, one-sided
/// second order with two same-side nodes, first order with one, else 0.
template <int A>
double diff1(const Field<A>& f, std::size_t i, int c, int d);

ScalarField laplacian(const ScalarField& f);          // interior nodes, 0 elsewhere
OneFormField gradient_of(const ScalarField& f);       // adaptive derivatives, all nodes
SymTensorField cko(const OneFormField& w);            // traceless by construction, all nodes
OneFormField tensor_div(const SymTensorField& t);     // adaptive derivatives
OneFormField vec_laplacian(const OneFormField& w);    // compact stencil where available,
                                                      // div(cko) fallback on other interior nodes

enum class OpKind { Gradient, Laplacian, Cko, VecLaplacian, TensorDiv };

/// Checked single-node evaluations; throw StencilOutOfDomain where the
/// centered stencil is unavailable.
double laplacian_at(const ScalarField& f, std::size_t i);
Vec3 vec_laplacian_at(const OneFormField& w, std::size_t i);

/// |<Dvec W, Z> - 1/2 <L W, L Z>| / (1 + |<L W, L Z>|), h^3-weighted sums.
/// Intended for fields supported away from the boundary.
double adjointness_residual(const OneFormField& w, const OneFormField& z);

/// Principal symbol of Dvec applied to eta: |xi|^2 eta + (1/3)(xi.eta) xi.
Vec3 symbol_apply(const Vec3& xi, const Vec3& eta);
inline double symbol_quadratic_form(const Vec3& xi, const Vec3& eta) {
  return dot(symbol_apply(xi, eta), eta);
}

// ---- linear solvers (matrix-free Krylov) ----

enum class KrylovMethod { Auto, Cg, BiCgStab };

struct LinearSolverConfig {
  double tol_rel = 1e-10;
  int max_iter = 20000;
  KrylovMethod method = KrylovMethod::Auto;

  void validate() const {
    if (!(tol_rel > 0) || tol_rel > 1e-2) throw std::invalid_argument("tol_rel must be in (0, 1e-2]");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  }
};

using LinOp = std::function<void(const std::vector<double>&, std::vector<double>&)>;

struct KrylovResult {
  int iterations = 0;
  double rel_residual = 0.0;
};

/// Conjugate gradients; throws SingularOperator on an indefinite pivot and
/// SolverDiverged when max_iter is reached.
KrylovResult cg_solve(const LinOp& A, const std::vector<double>& b, std::vector<double>& x,
                      const LinearSolverConfig& cfg, const std::vector<double>* jacobi_diag = nullptr);

KrylovResult bicgstab_solve(const LinOp& A, const std::vector<double>& b, std::vector<double>& x,
                            const LinearSolverConfig& cfg, const std::vector<double>* jacobi_diag = nullptr);

// ---- scalar boundary value problem ----

enum class ScalarBc { Dirichlet, Robin };

/// Solves Delta_xi v + c v = rhs.
/// Dirichlet: boundary values taken from `bc_values` (field sampled on the
/// same grid). Robin: the far-field decay closure d_nu v + v/|x| = 0.
ScalarField scalar_bvp_solve(const ScalarField& c, const ScalarField& rhs, ScalarBc bc,
                             const ScalarField* bc_values, const LinearSolverConfig& cfg,
                             KrylovResult* stats = nullptr);

// ---- vector (Lame) Neumann-traction problem ----

struct VectorBvpResult {
  OneFormField Z;
  int iterations = 0;
  double rel_residual = 0.0;
  std::vector<double> multipliers;   // Killing components of the consistency defect
};

/// Solves Dvec Z = rhs in the ball with traction nu^k (L Z)_kl = G_l on the
/// staircase boundary, constrained to be orthogonal to the given conformal
/// Killing fields (orthonormal w.r.t. the h^3 inner product, or the
/// U^10-weighted one in sphere gauge).
///
/// sphere_gauge adds the chart term -6 U^{-1} (L Z) dU to the operator and
/// switches the orthogonality weight; this is the chart form of Dvec_h on S^3.
VectorBvpResult vector_bvp_solve(const OneFormField& rhs, const OneFormField& traction,
                                 const std::vector<OneFormField>& killing, const LinearSolverConfig& cfg,
                                 bool sphere_gauge = false, double compat_tol = 0.1);

/// Discrete compatibility defect <rhs, K>_vol + <G, K>_surf per basis field.
std::vector<double> compatibility_defect(const OneFormField& rhs, const OneFormField& traction,
                                         const std::vector<OneFormField>& killing);

// ---- conformal (sphere-gauge) scalar operator ----

/// -div(U^2 grad w) with zero-flux closure at the staircase boundary: the
/// chart expression of U^6 Delta_h for sphere functions w = u o pi^-1.
/// Exact on constants. apply() adds U^6 c w when c is given.
class ConformalScalarOperator {
 public:
  explicit ConformalScalarOperator(GridPtr g);

  const GridPtr& grid() const { return grid_; }
  void apply(const std::vector<double>& w, std::vector<double>& out,
             const std::vector<double>* zero_order_u6c = nullptr) const;
  /// U^6 at node (the mass weight of the transported L^2(S^3) product).
  double mass(std::size_t i) const { return mass_[i]; }
  const std::vector<double>& mass_vector() const { return mass_; }
  double diag(std::size_t i) const { return diag_[i]; }

 private:
  GridPtr grid_;
  std::vector<double> face_;   // 6 per node, U^2 at face midpoints (0 if absent)
  std::vector<double> mass_;
  std::vector<double> diag_;
};

/// Smallest eigenvalue of (-div(U^2 grad) + U^6 hs, U^6) by inverse power
/// iteration with shift; the transported form of lambda_min(Delta_h + hs).
double conformal_lambda_min(const ConformalScalarOperator& op, const ScalarField& hs,
                            const LinearSolverConfig& cfg, int power_iters = 60);

}  // namespace lichlab
