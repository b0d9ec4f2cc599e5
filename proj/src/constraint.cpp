#include "lichlab/constraint.hpp"

#include <cmath>

#include "lichlab/chart.hpp"

namespace lichlab {

double PhysicsData::trace_defect() const {
  return det_max(U.size(), [&](std::size_t i) {
    const Sym3 s = U.sym(i);
    return std::abs(s.trace());
  });
}

double PhysicsData::divergence_defect() const {
  const BallGrid& g = *U.grid;
  SymTensorField flat(U.grid);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double u2 = std::pow(conf_factor(g.node(i)), 2);
    flat.set(i, u2 * U.sym(i));
  }
  const OneFormField div = tensor_div(flat);
  return det_max(g.size(), [&](std::size_t i) -> double {
    if (!g.is_interior(i)) return 0.0;
    return norm(div.vec(i));
  });
}

void Potential::validate(double lo, double hi, int samples) const {
  if (!(hi > lo)) hi = lo + 1.0;
  double scale = 1e-12;
  for (int k = 0; k <= samples; ++k) {
    const double s = lo + (hi - lo) * k / samples;
    scale = std::max(scale, std::abs(dV(s)));
  }
  const double step = std::sqrt(1e-12) * (1 + hi - lo);
  for (int k = 0; k <= samples; ++k) {
    const double s = lo + (hi - lo) * k / samples;
    const double fd = (V(s + step) - V(s - step)) / (2 * step);
    if (std::abs(fd - dV(s)) > 1e-6 * (1 + scale))
      throw std::invalid_argument("potential derivative does not match finite differences of V");
  }
}

double fnorm(const PhysicsData& F) {
  return field_norm(F.tau, NormOrder::C2) + field_norm(F.psi, NormOrder::C1) +
         field_norm(F.pi, NormOrder::C0) + field_norm(F.U, NormOrder::C0);
}

CoefficientAssembly assemble_coefficients(const PhysicsData& F, const Potential& V) {
  const GridPtr grid = F.grid();
  const BallGrid& g = *grid;
  CoefficientAssembly out;
  out.F = &F;
  out.V = &V;
  const OneFormField dpsi = gradient_of(F.psi);
  out.R_psi = ScalarField(grid);
  out.B = ScalarField(grid);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double u4 = std::pow(conf_factor(g.node(i)), 4);
    const double grad2_h = norm2(dpsi.vec(i)) / u4;   // |grad psi|^2 in the round metric
    out.R_psi(i) = (6.0 - grad2_h) / 8.0;
    out.B(i) = (2.0 * V.V(F.psi(i)) - (2.0 / 3.0) * F.tau(i) * F.tau(i)) / 8.0;
  }
  return out;
}

namespace {

ScalarField a_field_impl(const GridPtr& grid, const SymTensorField& Uchart, const ScalarField& b,
                         const OneFormField& What) {
  const BallGrid& g = *grid;
  const SymTensorField LW = cko(What);
  ScalarField a(grid);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double u4 = std::pow(conf_factor(g.node(i)), 4);
    Sym3 T = (1.0 / u4) * Uchart.sym(i);
    T += LW.sym(i);
    a(i) = (T.frob2() + b(i)) / 8.0;
  }
  return a;
}

}  // namespace

ScalarField CoefficientAssembly::a_field(const OneFormField& What) const {
  ScalarField b(F->grid());
  for (std::size_t i = 0; i < b.size(); ++i) b(i) = F->pi(i) * F->pi(i);
  return a_field_impl(F->grid(), F->U, b, What);
}

OneFormField CoefficientAssembly::vector_rhs(const ScalarField& phi) const {
  const GridPtr grid = F->grid();
  const OneFormField dtau = gradient_of(F->tau), dpsi = gradient_of(F->psi);
  OneFormField rhs(grid);
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const double p6 = std::pow(phi(i), 6);
    for (int c = 0; c < 3; ++c)
      rhs.v[3 * i + c] = -(2.0 / 3.0) * p6 * dtau.v[3 * i + c] - F->pi(i) * dpsi.v[3 * i + c];
  }
  return rhs;
}

ScalarField GeneralizedCoefficients::a_field(const OneFormField& What) const {
  return a_field_impl(grid(), U, b, What);
}

GeneralizedCoefficients to_generalized(const PhysicsData& F, const Potential& V) {
  const CoefficientAssembly A = assemble_coefficients(F, V);
  const GridPtr grid = F.grid();
  GeneralizedCoefficients G;
  G.h = A.R_psi;
  G.f = A.B;
  for (std::size_t i = 0; i < grid->size(); ++i)
    if (!(G.f(i) > 0)) throw NonPositiveF("B_{tau,psi,V} must be positive (the paper's positive case)");
  G.b = ScalarField(grid);
  double bmax = 0;
  for (std::size_t i = 0; i < grid->size(); ++i) {
    G.b(i) = F.pi(i) * F.pi(i);
    bmax = std::max(bmax, G.b(i));
  }
  G.b_nonzero = bmax > 1e-12;
  if (!G.b_nonzero) std::fprintf(stderr, "warning: ZeroB — pi vanishes identically\n");
  G.U = F.U;
  const OneFormField dtau = gradient_of(F.tau), dpsi = gradient_of(F.psi);
  G.X = OneFormField(grid);
  G.Y = OneFormField(grid);
  for (std::size_t i = 0; i < grid->size(); ++i)
    for (int c = 0; c < 3; ++c) {
      G.X.v[3 * i + c] = -(2.0 / 3.0) * dtau.v[3 * i + c];
      G.Y.v[3 * i + c] = -F.pi(i) * dpsi.v[3 * i + c];
    }
  return G;
}

HypothesisReport hypothesis_check(const GeneralizedCoefficients& G, const LinearSolverConfig& cfg) {
  HypothesisReport rep;
  rep.f_positive = true;
  for (double v : G.f.v)
    if (!(v > 0)) rep.f_positive = false;
  double bmax = 0;
  for (double v : G.b.v) bmax = std::max(bmax, v);
  rep.b_nonzero = bmax > 1e-12;

  const ConformalScalarOperator op(G.grid());
  rep.lambda_min = conformal_lambda_min(op, G.h, cfg);
  rep.coercive = rep.lambda_min > 0;

  // truncation sensitivity: same lattice restricted to 0.8 R
  const BallGrid& g = *G.grid();
  const double Ralt = 0.8 * g.radius();
  if (Ralt >= 4 * g.spacing()) {
    GridPtr sub = make_ball_grid(Ralt, g.spacing());
    ScalarField hs(sub);
    for (std::size_t i = 0; i < sub->size(); ++i) {
      const auto& l = sub->lattice(i);
      const int id = g.find_lattice(l[0], l[1], l[2]);
      hs(i) = G.h(id);
    }
    const ConformalScalarOperator op2(sub);
    rep.lambda_min_alt = conformal_lambda_min(op2, hs, cfg);
  } else {
    rep.lambda_min_alt = rep.lambda_min;
  }
  return rep;
}

std::pair<SolutionPair, SolveReport> coupled_solve(const GeneralizedCoefficients& G,
                                                   const SolutionPair& init, const CoupledConfig& cfg) {
  const HypothesisReport hyp = hypothesis_check(G, cfg.linear);
  if (!hyp.ok()) throw NonPositiveF("hypothesis_check failed (coercivity / f > 0 / b nonzero)");
  const GridPtr grid = G.grid();
  const BallGrid& g = *grid;
  for (double v : init.phi.v)
    if (!(v > 0)) throw NonPositiveField("coupled_solve needs init.phi > 0");

  const bool vector_active = det_max(3 * g.size(), [&](std::size_t i) {
                               return std::max(std::abs(G.X.v[i]), std::abs(G.Y.v[i]));
                             }) > 0;
  KillingBasis basis = make_killing_basis(grid, g.radius(), [](const Vec3& x) {
    return std::pow(conf_factor(x), 10);
  });

  SolutionPair cur = init;
  {
    const OneFormField proj = killing_project(basis, cur.W);
    for (std::size_t i = 0; i < 3 * g.size(); ++i) cur.W.v[i] -= proj.v[i];
  }

  SolveReport rep;
  rep.strategy = SolveStrategy::Newton;
  double best_update = 1e300;
  int stalled = 0;
  for (int outer = 1; outer <= cfg.max_outer; ++outer) {
    ScalarProblem sp;
    sp.h = G.h;
    sp.f = G.f;
    sp.a = G.a_field(cur.W);
    sp.gauge = ScalarGauge::ConformalSphere;
    auto [phi_new, srep] = lichnerowicz_solve(sp, cur.phi, SolveStrategy::Newton, cfg.scalar);

    OneFormField W_new = cur.W;
    if (vector_active) {
      OneFormField rhs(grid);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double p6 = std::pow(phi_new(i), 6);
        for (int c = 0; c < 3; ++c)
          rhs.v[3 * i + c] = p6 * G.X.v[3 * i + c] + G.Y.v[3 * i + c];
      }
      OneFormField traction(grid);
      VectorBvpResult vres =
          vector_bvp_solve(rhs, traction, basis.fields, cfg.linear, /*sphere_gauge=*/true);
      W_new = vres.Z;
    }

    double phimax = det_max(g.size(), [&](std::size_t i) { return std::abs(phi_new(i)); });
    const double dphi = det_max(g.size(), [&](std::size_t i) { return std::abs(phi_new(i) - cur.phi(i)); });
    const SymTensorField Lo = cko(cur.W), Ln = cko(W_new);
    const double dLW = det_max(6 * g.size(), [&](std::size_t i) { return std::abs(Ln.v[i] - Lo.v[i]); });
    const double update = dphi / std::max(1.0, phimax) + dLW;

    cur.phi = phi_new;
    cur.W = W_new;
    rep.iterations = outer;
    rep.residual_history.push_back(update);
    rep.final_residual = update;
    if (update <= cfg.tol) break;
    if (update < 0.9 * best_update) {
      best_update = update;
      stalled = 0;
    } else if (++stalled >= 10) {
      throw OuterStalled("outer alternation plateaued above tol");
    }
    if (outer == cfg.max_outer) throw SolverDiverged("coupled_solve reached max_outer");
  }
  return {cur, rep};
}

PhysicalData dataparam_map(const PhysicsData& F, const SolutionPair& sol) {
  const GridPtr grid = F.grid();
  const BallGrid& g = *grid;
  for (double v : sol.phi.v)
    if (!(v > 0)) throw NonPositiveField("dataparam_map needs phi > 0");
  PhysicalData out;
  out.metric_factor4 = ScalarField(grid);
  out.K = SymTensorField(grid);
  out.psi0 = F.psi;
  out.psi1 = ScalarField(grid);
  const SymTensorField LW = cko(sol.W);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = sol.phi(i);
    const double u4 = std::pow(conf_factor(g.node(i)), 4);
    out.metric_factor4(i) = std::pow(w, 4);
    Sym3 K = (1.0 / (w * w)) * (F.U.sym(i) + u4 * LW.sym(i));
    const double iso = (F.tau(i) / 3.0) * std::pow(w, 4) * u4;
    K.at(0, 0) += iso;
    K.at(1, 1) += iso;
    K.at(2, 2) += iso;
    out.K.set(i, K);
    out.psi1(i) = F.pi(i) / std::pow(w, 6);
  }
  return out;
}

ScalarField trace_of_K(const PhysicsData& F, const SolutionPair& sol) {
  const PhysicalData P = dataparam_map(F, sol);
  const GridPtr grid = F.grid();
  ScalarField tr(grid);
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const double v = sol.phi(i) * conf_factor(grid->node(i));  // chart factor of phi^4 g
    tr(i) = P.K.sym(i).trace() / std::pow(v, 4);
  }
  return tr;
}

ConstraintResiduals physical_constraint_residual(const PhysicsData& F, const Potential& V,
                                                 const SolutionPair& sol) {
  const GridPtr grid = F.grid();
  const BallGrid& g = *grid;
  const PhysicalData P = dataparam_map(F, sol);

  // v = phi * U, the flat conformal factor of the physical metric v^4 xi
  ScalarField v(grid);
  for (std::size_t i = 0; i < g.size(); ++i) v(i) = sol.phi(i) * conf_factor(g.node(i));
  const ScalarField lap_v = laplacian(v);
  const OneFormField dpsi = gradient_of(F.psi);

  ScalarField trK(grid);
  for (std::size_t i = 0; i < g.size(); ++i) trK(i) = P.K.sym(i).trace() / std::pow(v(i), 4);

  ConstraintResiduals out;
  double hres = 0, hscale = 1;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.is_interior(i)) continue;
    const double Rhat = 8.0 * lap_v(i) / std::pow(v(i), 5);   // R(v^4 xi), geometer Laplacian
    const double K2 = P.K.sym(i).frob2() / std::pow(v(i), 8);
    const double grad_psi2 = norm2(dpsi.vec(i)) / std::pow(v(i), 4);
    const double lhs = Rhat + trK(i) * trK(i) - K2;
    const double rhs = P.psi1(i) * P.psi1(i) + grad_psi2 + 2.0 * V.V(P.psi0(i));
    hres = std::max(hres, std::abs(lhs - rhs));
    hscale = std::max(hscale, std::abs(Rhat) + trK(i) * trK(i) + K2 + std::abs(rhs));
  }
  out.hamiltonian = hres;
  out.hamiltonian_scale = hscale;

  // momentum: covariant divergence in the conformally flat physical metric
  ScalarField lnv(grid);
  for (std::size_t i = 0; i < g.size(); ++i) lnv(i) = std::log(v(i));
  const OneFormField dlnv = gradient_of(lnv);
  double mres = 0, mscale = 1;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.has_full_stencil(i)) continue;
    Vec3 omega = 2.0 * dlnv.vec(i);   // h_phys = e^{2 omega} xi, omega = 2 ln v
    const Sym3 K = P.K.sym(i);
    // dK[l](a,b) = d_l K_ab by centered differences
    double dK[3][3][3];
    for (int l = 0; l < 3; ++l)
      for (int a2 = 0; a2 < 3; ++a2)
        for (int b2 = a2; b2 < 3; ++b2) {
          const double d = diff1(P.K, i, Sym3::idx(a2, b2), l);
          dK[l][a2][b2] = dK[l][b2][a2] = d;
        }
    auto Gamma = [&](int k, int a2, int b2) {
      return (k == a2 ? omega[b2] : 0.0) + (k == b2 ? omega[a2] : 0.0) - (a2 == b2 ? omega[k] : 0.0);
    };
    const double vinv4 = 1.0 / std::pow(v(i), 4);
    Vec3 divK{0, 0, 0};
    for (int a2 = 0; a2 < 3; ++a2) {
      double s = 0;
      for (int l = 0; l < 3; ++l) {
        double cov = dK[l][l][a2];
        for (int m = 0; m < 3; ++m) cov -= Gamma(m, l, l) * K(m, a2) + Gamma(m, l, a2) * K(l, m);
        s += cov;
      }
      divK[a2] = vinv4 * s;
    }
    Vec3 resid;
    for (int a2 = 0; a2 < 3; ++a2)
      resid[a2] = divK[a2] - diff1(trK, i, 0, a2) - P.psi1(i) * dpsi.vec(i)[a2];
    mres = std::max(mres, std::max({std::abs(resid[0]), std::abs(resid[1]), std::abs(resid[2])}));
    mscale = std::max(mscale, norm(divK) + norm(dpsi.vec(i)) * std::abs(P.psi1(i)) + 1.0);
  }
  out.momentum = mres;
  out.momentum_scale = mscale;
  return out;
}

PhysicsData build_physics(const ProblemInputs& in, const GridPtr& grid) {
  PhysicsData F;
  F.tau = sample_scalar(grid, in.tau);
  F.psi = sample_scalar(grid, in.psi);
  F.pi = sample_scalar(grid, in.pi);
  if (in.Uchart)
    F.U = sample_sym_tensor(grid, in.Uchart);
  else
    F.U = SymTensorField(grid);
  F.U.traceless_flag = true;
  return F;
}

}  // namespace lichlab
