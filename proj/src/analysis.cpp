#include "lichlab/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "lichlab/chart.hpp"

namespace lichlab {

ScalarField synthesize_blowup_field(const std::vector<Bubble>& bubbles, const ScalarField& background) {
  const BallGrid& g = *background.grid;
  for (const auto& b : bubbles)
    if (norm(b.center) >= g.radius()) throw std::invalid_argument("bubble center outside the grid");
  for (double v : background.v)
    if (v < 0) throw std::invalid_argument("background must be nonnegative");
  ScalarField out = background;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)g.size(); ++i)
    for (const auto& b : bubbles) out.v[i] += bubble_eval(b, g.node(i));
  return out;
}

ConcentrationReport concentration_detect(const ScalarField& u, const SymTensorField* Lw,
                                         double threshold) {
  const BallGrid& g = *u.grid;
  for (double v : u.v)
    if (!(v > 0)) throw NonPositiveField("concentration_detect needs u > 0");

  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.is_interior(i)) continue;
    bool is_max = true, strict = false;
    for (int d = 0; d < 3 && is_max; ++d)
      for (int s = -1; s <= 1; s += 2) {
        const double un = u(g.neighbor(i, d, s));
        if (u(i) < un) { is_max = false; break; }
        if (u(i) > un) strict = true;
      }
    if (!is_max || !strict) continue;
    double g2 = 0;
    for (int d = 0; d < 3; ++d) {
      const double dv = (u(g.neighbor(i, d, +1)) - u(g.neighbor(i, d, -1))) / (2 * g.spacing());
      g2 += dv * dv;
    }
    if (std::sqrt(g2) < threshold) cand.push_back(i);
  }
  if (cand.empty()) throw NoCriticalPoints("no discrete critical point below the gradient threshold");

  std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return u(a) > u(b); });
  ConcentrationReport rep;
  for (std::size_t c : cand) {
    bool ok = true;
    for (const auto& p : rep.points)
      if (std::sqrt(norm(g.node(c) - p.x)) * u(c) < 1.0 - 1e-6) { ok = false; break; }
    if (!ok) continue;
    ConcentrationPoint pt;
    pt.node = c;
    pt.x = g.node(c);
    pt.height = u(c);
    pt.mu = 2.0 / (u(c) * u(c));
    rep.points.push_back(pt);
  }

  rep.min_separation_value = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < rep.points.size(); ++a)
    for (std::size_t b = 0; b < rep.points.size(); ++b) {
      if (a == b) continue;
      const double d = norm(rep.points[a].x - rep.points[b].x);
      rep.min_separation_value =
          std::min(rep.min_separation_value, std::sqrt(d) * rep.points[a].height);
    }
  rep.separation_ok = rep.min_separation_value >= 1.0 - 1e-6;

  rep.bound_constant = det_max(g.size(), [&](std::size_t i) {
    double dmin = 1e300;
    for (const auto& p : rep.points) dmin = std::min(dmin, norm(g.node(i) - p.x));
    const double lw = Lw ? std::sqrt(Lw->sym(i).frob2()) : 0.0;
    return dmin * dmin * dmin * (std::pow(u(i), 6) + lw);
  });
  return rep;
}

double harnack_ratio(const ScalarField& u, double inner_radius, double outer_radius) {
  const BallGrid& g = *u.grid;
  double sup = 0, inf = 1e300;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = norm(g.node(i));
    if (r > outer_radius) continue;
    if (!(u(i) > 0)) throw NonPositiveField("harnack_ratio needs u > 0 on the outer ball");
    if (r <= inner_radius) {
      sup = std::max(sup, u(i));
      inf = std::min(inf, u(i));
    }
  }
  if (inf >= 1e300) throw DomainTooSmall("no nodes inside the inner radius");
  return sup / inf;
}

namespace {

// trilinear interpolation of a scalar lattice function
template <class F>
double trilinear(const BallGrid& g, const F& value_at, const Vec3& p) {
  const double h = g.spacing();
  const int i0 = (int)std::floor(p[0] / h), j0 = (int)std::floor(p[1] / h), k0 = (int)std::floor(p[2] / h);
  const double fx = p[0] / h - i0, fy = p[1] / h - j0, fz = p[2] / h - k0;
  double acc = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        const int id = g.find_lattice(i0 + a, j0 + b, k0 + c);
        if (id < 0) throw DomainTooSmall("interpolation stencil leaves the grid");
        const double w = (a ? fx : 1 - fx) * (b ? fy : 1 - fy) * (c ? fz : 1 - fz);
        acc += w * value_at(id);
      }
  return acc;
}

}  // namespace

double pohozaev_residual(const ScalarField& v, double delta) {
  const BallGrid& g = *v.grid;
  const double h = g.spacing();
  if (delta < 8 * h) throw DomainTooSmall("pohozaev needs delta >= 8h");
  if (delta > g.radius() - 3 * h) throw DomainTooSmall("pohozaev ball must sit inside the grid");

  const ScalarField lap = laplacian(v);
  const OneFormField grad = gradient_of(v);

  // volume: midpoint with fractional boundary-cell coverage
  const double vol = det_sum(g.size(), [&](std::size_t i) -> double {
    const double r = norm(g.node(i));
    double w = (delta - r) / h + 0.5;
    if (w <= 0) return 0.0;
    if (w > 1) w = 1;
    if (!g.is_interior(i)) return 0.0;
    const Vec3 x = g.node(i);
    const Vec3 gr = grad.vec(i);
    return w * (dot(x, gr) + 0.5 * v(i)) * lap(i) * g.cell_volume();
  });

  // sphere quadrature: Gauss-Legendre in cos(theta) x uniform phi
  const int nt = 24, np = 48;
  static const auto gl = [] {
    std::array<std::array<double, 24>, 2> out{};
    // Newton iteration for Legendre nodes
    for (int k = 0; k < 24; ++k) {
      double x = std::cos(M_PI * (k + 0.75) / (24 + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1, p1 = x;
        for (int n2 = 2; n2 <= 24; ++n2) {
          const double p2 = ((2 * n2 - 1) * x * p1 - (n2 - 1) * p0) / n2;
          p0 = p1;
          p1 = p2;
        }
        const double dp = 24 * (x * p1 - p0) / (x * x - 1);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      double p0 = 1, p1 = x;
      for (int n2 = 2; n2 <= 24; ++n2) {
        const double p2 = ((2 * n2 - 1) * x * p1 - (n2 - 1) * p0) / n2;
        p0 = p1;
        p1 = p2;
      }
      const double dp = 24 * (x * p1 - p0) / (x * x - 1);
      out[0][k] = x;
      out[1][k] = 2 / ((1 - x * x) * dp * dp);
    }
    return out;
  }();

  double bnd = 0;
  for (int a = 0; a < nt; ++a) {
    const double ct = gl[0][a], st = std::sqrt(1 - ct * ct), wt = gl[1][a];
    for (int b = 0; b < np; ++b) {
      const double ph = 2 * M_PI * b / np;
      const Vec3 nu{st * std::cos(ph), st * std::sin(ph), ct};
      const Vec3 p = delta * nu;
      const double vv = trilinear(g, [&](int id) { return v.v[id]; }, p);
      Vec3 gr;
      for (int c = 0; c < 3; ++c) gr[c] = trilinear(g, [&](int id) { return grad.v[3 * id + c]; }, p);
      const double dn = dot(gr, nu);
      const double integrand = 0.5 * delta * norm2(gr) - 0.5 * vv * dn - delta * dn * dn;
      bnd += integrand * wt * (2 * M_PI / np) * delta * delta;
    }
  }
  return std::abs(vol - bnd);
}

Mat3 bubble_vector_limit_profile(const Vec3& zeta, double f0, const Vec3& x) {
  const double r = norm(x);
  const double pref = (3 * M_PI / 8) * std::pow(3.0 / (4.0 * f0), 1.5) / (r * r * r);
  const double zx = dot(zeta, x);
  Mat3 P{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      P[i][j] = pref * (zx * ((i == j) - x[i] * x[j] / (r * r)) - x[i] * zeta[j] - x[j] * zeta[i]);
  return P;
}

namespace {

struct SphericalQuadrature {
  std::vector<Vec3> dirs;
  std::vector<double> wdir;
  std::vector<double> s, ws;   // radial nodes/weights, graded toward 0

  SphericalQuadrature(int nr, int nt, int np, double smax) {
    std::vector<double> xgl(nt), wgl(nt);
    for (int k = 0; k < nt; ++k) {
      double x = std::cos(M_PI * (k + 0.75) / (nt + 0.5));
      double p1 = 0, dp = 0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1;
        p1 = x;
        for (int n2 = 2; n2 <= nt; ++n2) {
          const double p2 = ((2 * n2 - 1) * x * p1 - (n2 - 1) * p0) / n2;
          p0 = p1;
          p1 = p2;
        }
        dp = nt * (x * p1 - p0) / (x * x - 1);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      xgl[k] = x;
      wgl[k] = 2 / ((1 - x * x) * dp * dp);
    }
    for (int a = 0; a < nt; ++a) {
      const double ct = xgl[a], st = std::sqrt(1 - ct * ct);
      for (int b = 0; b < np; ++b) {
        const double ph = 2 * M_PI * b / np;
        dirs.push_back({st * std::cos(ph), st * std::sin(ph), ct});
        wdir.push_back(wgl[a] * 2 * M_PI / np);
      }
    }
    // radial substitution s = smax t^2 on GL(0,1)
    for (int k = 0; k < nr; ++k) {
      double x = std::cos(M_PI * (k + 0.75) / (nr + 0.5));
      double p1 = 0, dp = 0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1;
        p1 = x;
        for (int n2 = 2; n2 <= nr; ++n2) {
          const double p2 = ((2 * n2 - 1) * x * p1 - (n2 - 1) * p0) / n2;
          p0 = p1;
          p1 = p2;
        }
        dp = nr * (x * p1 - p0) / (x * x - 1);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      const double t = 0.5 * (x + 1), w = 1.0 / ((1 - x * x) * dp * dp);
      s.push_back(smax * t * t);
      ws.push_back(w * smax * 2 * t);
    }
  }
};

}  // namespace

BubbleVectorResult bubble_vector_field(const Vec3& X0, const Bubble& b,
                                       const std::vector<Vec3>& eval_points, int entry_i, int entry_j) {
  BubbleVectorResult out;
  const double eps = norm(X0);
  const double k = 4.0 * b.f_at_center / 3.0;
  static const SphericalQuadrature Q(96, 32, 64, 60.0);

  auto V_at = [&](const Vec3& x) -> Vec3 {
    if (eps == 0) return {0, 0, 0};
    Vec3 acc{0, 0, 0};
    const std::size_t nd = Q.dirs.size();
    std::vector<Vec3> partial(Q.s.size(), Vec3{0, 0, 0});
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ir = 0; ir < (std::ptrdiff_t)Q.s.size(); ++ir) {
      const double s = Q.s[ir];
      const double radw = Q.ws[ir] * s * s * std::pow(1.0 + k * s * s, -3.0);
      Vec3 loc{0, 0, 0};
      for (std::size_t idg = 0; idg < nd; ++idg) {
        const Vec3 z = s * Q.dirs[idg];
        const Vec3 d = x - b.mu * z;
        const double r = norm(d);
        if (r < 1e-12) continue;
        const double r3 = r * r * r;
        // H(d) . X0
        for (int i2 = 0; i2 < 3; ++i2)
          loc[i2] += Q.wdir[idg] * (7.0 * X0[i2] / r + d[i2] * dot(d, X0) / r3) / (32 * M_PI);
      }
      partial[ir] = radw * loc;
    }
    for (const auto& p : partial) acc = acc + p;
    return 8.0 * acc;
  };

  for (const auto& p : eval_points) out.values.push_back(V_at(p));
  if (eval_points.empty() || eps == 0) return out;

  const Vec3 x0 = eval_points[0];
  const double fd = 1e-3;
  Mat3 grad{};
  for (int d = 0; d < 3; ++d) {
    Vec3 xp = x0, xm = x0;
    xp[d] += fd;
    xm[d] -= fd;
    const Vec3 Vp = V_at(xp), Vm = V_at(xm);
    for (int c = 0; c < 3; ++c) grad[c][d] = (Vp[c] - Vm[c]) / (2 * fd);
  }
  const double div = grad[0][0] + grad[1][1] + grad[2][2];
  for (int i2 = 0; i2 < 3; ++i2)
    for (int j2 = 0; j2 < 3; ++j2)
      out.rescaled_LV[i2][j2] = (grad[i2][j2] + grad[j2][i2] - (i2 == j2 ? 2.0 / 3.0 * div : 0.0)) / eps;
  out.P_limit = bubble_vector_limit_profile((1.0 / eps) * X0, b.f_at_center, x0);
  const double target = out.P_limit[entry_i][entry_j];
  out.rel_error = std::abs(out.rescaled_LV[entry_i][entry_j] - target) / (std::abs(target) + 1e-300);
  return out;
}

StabilityResult stability_experiment(const ProblemInputs& base,
                                     const std::vector<PotentialPerturbation>& family,
                                     const CoupledConfig& cfg) {
  GridPtr grid = make_ball_grid(base.R_trunc, base.h);
  const PhysicsData F0 = build_physics(base, grid);
  double psi_lo = F0.psi.v[0], psi_hi = F0.psi.v[0];
  for (double v : F0.psi.v) {
    psi_lo = std::min(psi_lo, v);
    psi_hi = std::max(psi_hi, v);
  }
  psi_lo -= 0.5;
  psi_hi += 0.5;
  base.potential.validate(psi_lo, psi_hi);

  const GeneralizedCoefficients G0 = to_generalized(F0, base.potential);
  SolutionPair init;
  init.phi = ScalarField(grid, 1.0);
  init.W = OneFormField(grid);
  auto [sol0, rep0] = coupled_solve(G0, init, cfg);

  StabilityResult out;
  out.base_solution = sol0;
  const SymTensorField LW0 = cko(sol0.W);

  std::vector<PotentialPerturbation> rows = family;
  PotentialPerturbation zero;
  zero.delta = 0;
  zero.potential = base.potential;
  rows.insert(rows.begin(), zero);
  std::sort(rows.begin(), rows.end(),
            [](const PotentialPerturbation& a, const PotentialPerturbation& b) { return a.delta < b.delta; });

  for (const auto& pert : rows) {
    StabilityRow row;
    row.delta = pert.delta;
    try {
      double dpot = 0;
      for (int k = 0; k <= 1000; ++k) {
        const double s = psi_lo + (psi_hi - psi_lo) * k / 1000.0;
        dpot = std::max(dpot, std::abs(pert.potential.V(s) - base.potential.V(s)) +
                                  std::abs(pert.potential.dV(s) - base.potential.dV(s)));
      }
      row.data_distance = dpot;   // F is unchanged by a potential-only perturbation
      const GeneralizedCoefficients Gd = to_generalized(F0, pert.potential);
      auto [sold, repd] = coupled_solve(Gd, sol0, cfg);
      row.outer_iters = repd.iterations;
      ScalarField dphi(grid);
      for (std::size_t i = 0; i < grid->size(); ++i) dphi(i) = sold.phi(i) - sol0.phi(i);
      const SymTensorField LWd = cko(sold.W);
      const double dLW = det_max(6 * grid->size(), [&](std::size_t i) {
        return std::abs(LWd.v[i] - LW0.v[i]);
      });
      row.solution_distance = field_norm(dphi, NormOrder::C1) + dLW;
    } catch (const std::exception& e) {
      row.status = std::string("failed: ") + e.what();
    }
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace lichlab
