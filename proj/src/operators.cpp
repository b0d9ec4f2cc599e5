#include "lichlab/operators.hpp"

#include <cmath>

#include "lichlab/chart.hpp"

namespace lichlab {

template <int A>
double diff1(const Field<A>& f, std::size_t i, int c, int d) {
  const BallGrid& g = *f.grid;
  const double h = g.spacing();
  const int ip = g.neighbor(i, d, +1), im = g.neighbor(i, d, -1);
  if (ip >= 0 && im >= 0) return (f.v[A * ip + c] - f.v[A * im + c]) / (2 * h);
  if (ip >= 0) {
    int o[3] = {0, 0, 0};
    o[d] = 2;
    const int ip2 = g.offset(i, o[0], o[1], o[2]);
    if (ip2 >= 0)
      return (-3 * f.v[A * i + c] + 4 * f.v[A * ip + c] - f.v[A * ip2 + c]) / (2 * h);
    return (f.v[A * ip + c] - f.v[A * i + c]) / h;
  }
  if (im >= 0) {
    int o[3] = {0, 0, 0};
    o[d] = -2;
    const int im2 = g.offset(i, o[0], o[1], o[2]);
    if (im2 >= 0)
      return (3 * f.v[A * i + c] - 4 * f.v[A * im + c] + f.v[A * im2 + c]) / (2 * h);
    return (f.v[A * i + c] - f.v[A * im + c]) / h;
  }
  return 0.0;
}

template double diff1<1>(const Field<1>&, std::size_t, int, int);
template double diff1<3>(const Field<3>&, std::size_t, int, int);
template double diff1<6>(const Field<6>&, std::size_t, int, int);

ScalarField laplacian(const ScalarField& f) {
  const BallGrid& g = *f.grid;
  const double h2 = g.spacing() * g.spacing();
  ScalarField out(f.grid);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)g.size(); ++i) {
    if (!g.is_interior(i)) continue;
    double s = 0;
    for (int d = 0; d < 3; ++d)
      s += 2 * f.v[i] - f.v[g.neighbor(i, d, +1)] - f.v[g.neighbor(i, d, -1)];
    out.v[i] = s / h2;
  }
  return out;
}

double laplacian_at(const ScalarField& f, std::size_t i) {
  const BallGrid& g = *f.grid;
  if (!g.is_interior(i)) throw StencilOutOfDomain("laplacian needs all 6 axis neighbors");
  const double h2 = g.spacing() * g.spacing();
  double s = 0;
  for (int d = 0; d < 3; ++d)
    s += 2 * f.v[i] - f.v[g.neighbor(i, d, +1)] - f.v[g.neighbor(i, d, -1)];
  return s / h2;
}

OneFormField gradient_of(const ScalarField& f) {
  OneFormField out(f.grid);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)f.size(); ++i)
    for (int d = 0; d < 3; ++d) out.v[3 * i + d] = diff1(f, i, 0, d);
  return out;
}

SymTensorField cko(const OneFormField& w) {
  SymTensorField out(w.grid);
  out.traceless_flag = true;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)w.size(); ++i) {
    double grad[3][3];
    for (int c = 0; c < 3; ++c)
      for (int d = 0; d < 3; ++d) grad[c][d] = diff1(w, i, c, d);
    const double div = grad[0][0] + grad[1][1] + grad[2][2];
    Sym3 t;
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b)
        t.at(a, b) = grad[a][b] + grad[b][a] - (a == b ? 2.0 / 3.0 * div : 0.0);
    out.set(i, t);
  }
  return out;
}

OneFormField tensor_div(const SymTensorField& t) {
  OneFormField out(t.grid);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)t.size(); ++i)
    for (int a = 0; a < 3; ++a) {
      double s = 0;
      for (int d = 0; d < 3; ++d) s += diff1(t, i, Sym3::idx(a, d), d);
      out.v[3 * i + a] = s;
    }
  return out;
}

namespace {

inline Vec3 vec_laplacian_compact(const BallGrid& g, const OneFormField& w, std::size_t i) {
  const double h2 = g.spacing() * g.spacing();
  Vec3 out{0, 0, 0};
  // -Delta7 per component
  for (int c = 0; c < 3; ++c) {
    double s = 0;
    for (int d = 0; d < 3; ++d)
      s += 2 * w.v[3 * i + c] - w.v[3 * g.neighbor(i, d, +1) + c] - w.v[3 * g.neighbor(i, d, -1) + c];
    out[c] = s / h2;
  }
  // -(1/3) grad div, mixed terms by the 4-point cross stencil
  for (int a = 0; a < 3; ++a) {
    double gd = 0;
    for (int j = 0; j < 3; ++j) {
      if (a == j) {
        gd += (w.v[3 * g.neighbor(i, a, +1) + j] - 2 * w.v[3 * i + j] + w.v[3 * g.neighbor(i, a, -1) + j]) / h2;
      } else {
        int o[3];
        auto at = [&](int sa, int sj) {
          o[0] = o[1] = o[2] = 0;
          o[a] = sa;
          o[j] = sj;
          return g.offset(i, o[0], o[1], o[2]);
        };
        gd += (w.v[3 * at(1, 1) + j] - w.v[3 * at(1, -1) + j] - w.v[3 * at(-1, 1) + j] +
               w.v[3 * at(-1, -1) + j]) /
              (4 * h2);
      }
    }
    out[a] -= gd / 3.0;
  }
  return out;
}

}  // namespace

OneFormField vec_laplacian(const OneFormField& w) {
  const BallGrid& g = *w.grid;
  OneFormField out(w.grid);
  // fallback for interior nodes missing diagonals: divergence of the cko field
  SymTensorField L;
  bool need_fallback = false;
  for (std::size_t i = 0; i < g.size() && !need_fallback; ++i)
    if (g.is_interior(i) && !g.has_full_stencil(i)) need_fallback = true;
  if (need_fallback) L = cko(w);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)g.size(); ++i) {
    if (g.has_full_stencil(i)) {
      const Vec3 v = vec_laplacian_compact(g, w, i);
      out.set(i, v);
    } else if (g.is_interior(i)) {
      for (int a = 0; a < 3; ++a) {
        double s = 0;
        for (int d = 0; d < 3; ++d) s += diff1(L, i, Sym3::idx(a, d), d);
        out.v[3 * i + a] = -s;
      }
    }
  }
  return out;
}

Vec3 vec_laplacian_at(const OneFormField& w, std::size_t i) {
  if (!w.grid->has_full_stencil(i))
    throw StencilOutOfDomain("vec-laplacian needs the full compact stencil");
  return vec_laplacian_compact(*w.grid, w, i);
}

double adjointness_residual(const OneFormField& w, const OneFormField& z) {
  const BallGrid& g = *w.grid;
  const double vol = g.cell_volume();
  const OneFormField Dw = vec_laplacian(w);
  const SymTensorField Lw = cko(w), Lz = cko(z);
  const double lhs = vol * det_sum(g.size(), [&](std::size_t i) {
    return Dw.v[3 * i] * z.v[3 * i] + Dw.v[3 * i + 1] * z.v[3 * i + 1] + Dw.v[3 * i + 2] * z.v[3 * i + 2];
  });
  const double rhs = 0.5 * vol * det_sum(g.size(), [&](std::size_t i) {
    double s = 0;
    const Sym3 a = Lw.sym(i), b = Lz.sym(i);
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) s += a(p, q) * b(p, q);
    return s;
  });
  return std::abs(lhs - rhs) / (1.0 + std::abs(rhs));
}

Vec3 symbol_apply(const Vec3& xi, const Vec3& eta) {
  const double x2 = norm2(xi), xe = dot(xi, eta);
  return {x2 * eta[0] + xe * xi[0] / 3.0, x2 * eta[1] + xe * xi[1] / 3.0, x2 * eta[2] + xe * xi[2] / 3.0};
}

// ---- Krylov ----

namespace {

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
  return det_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

void vaxpy(std::vector<double>& y, double a, const std::vector<double>& x) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

KrylovResult cg_solve(const LinOp& A, const std::vector<double>& b, std::vector<double>& x,
                      const LinearSolverConfig& cfg, const std::vector<double>* diag) {
  cfg.validate();
  const std::size_t n = b.size();
  x.assign(n, 0.0);
  const double bnorm = std::sqrt(vdot(b, b));
  if (bnorm == 0.0) return {0, 0.0};
  std::vector<double> r = b, z(n), p(n), Ap(n);
  auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
    if (!diag) { out = in; return; }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)n; ++i) out[i] = in[i] / (*diag)[i];
  };
  precond(r, z);
  p = z;
  double rz = vdot(r, z);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    A(p, Ap);
    const double pAp = vdot(p, Ap);
    if (!(pAp > 0)) throw SingularOperator("nonpositive curvature in CG");
    const double alpha = rz / pAp;
    vaxpy(x, alpha, p);
    vaxpy(r, -alpha, Ap);
    const double rn = std::sqrt(vdot(r, r));
    if (rn <= cfg.tol_rel * bnorm) return {it, rn / bnorm};
    precond(r, z);
    const double rz2 = vdot(r, z);
    const double beta = rz2 / rz;
    rz = rz2;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw SolverDiverged("CG reached max_iter");
}

KrylovResult bicgstab_solve(const LinOp& A, const std::vector<double>& b, std::vector<double>& x,
                            const LinearSolverConfig& cfg, const std::vector<double>* diag) {
  cfg.validate();
  const std::size_t n = b.size();
  x.assign(n, 0.0);
  const double bnorm = std::sqrt(vdot(b, b));
  if (bnorm == 0.0) return {0, 0.0};
  std::vector<double> r = b, r0 = b, p(n, 0.0), v(n, 0.0), s(n), t(n), ph(n), sh(n);
  double rho = 1, alpha = 1, omega = 1;
  auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
    if (!diag) { out = in; return; }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)n; ++i) out[i] = in[i] / (*diag)[i];
  };
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const double rho1 = vdot(r0, r);
    if (std::abs(rho1) < 1e-300) throw SingularOperator("BiCGStab breakdown (rho)");
    if (it == 1) {
      p = r;
    } else {
      const double beta = (rho1 / rho) * (alpha / omega);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    }
    rho = rho1;
    precond(p, ph);
    A(ph, v);
    const double r0v = vdot(r0, v);
    if (std::abs(r0v) < 1e-300) throw SingularOperator("BiCGStab breakdown (r0.v)");
    alpha = rho / r0v;
    s = r;
    vaxpy(s, -alpha, v);
    if (std::sqrt(vdot(s, s)) <= cfg.tol_rel * bnorm) {
      vaxpy(x, alpha, ph);
      return {it, std::sqrt(vdot(s, s)) / bnorm};
    }
    precond(s, sh);
    A(sh, t);
    const double tt = vdot(t, t);
    if (tt == 0.0) throw SingularOperator("BiCGStab breakdown (t)");
    omega = vdot(t, s) / tt;
    vaxpy(x, alpha, ph);
    vaxpy(x, omega, sh);
    r = s;
    vaxpy(r, -omega, t);
    const double rn = std::sqrt(vdot(r, r));
    if (rn <= cfg.tol_rel * bnorm) return {it, rn / bnorm};
    if (std::abs(omega) < 1e-300) throw SingularOperator("BiCGStab breakdown (omega)");
  }
  throw SolverDiverged("BiCGStab reached max_iter");
}

// ---- scalar BVP ----

ScalarField scalar_bvp_solve(const ScalarField& c, const ScalarField& rhs, ScalarBc bc,
                             const ScalarField* bc_values, const LinearSolverConfig& cfg,
                             KrylovResult* stats) {
  const GridPtr grid = c.grid;
  const BallGrid& g = *grid;
  const double h = g.spacing(), h2 = h * h;

  if (bc == ScalarBc::Dirichlet) {
    if (!bc_values) throw std::invalid_argument("Dirichlet needs bc_values");
    std::vector<int> unk(g.size(), -1);
    std::vector<std::size_t> nodes;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.is_interior(i)) {
        unk[i] = (int)nodes.size();
        nodes.push_back(i);
      }
    const std::size_t n = nodes.size();
    std::vector<double> b(n), diag(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = nodes[k];
      double bi = rhs(i);
      for (int d = 0; d < 3; ++d)
        for (int s = -1; s <= 1; s += 2) {
          const int nb = g.neighbor(i, d, s);
          if (unk[nb] < 0) bi += bc_values->v[nb] / h2;
        }
      b[k] = bi;
      diag[k] = 6.0 / h2 + c(i);
    }
    LinOp A = [&](const std::vector<double>& xin, std::vector<double>& out) {
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t k = 0; k < (std::ptrdiff_t)n; ++k) {
        const std::size_t i = nodes[k];
        double s = (6.0 / h2 + c(i)) * xin[k];
        for (int d = 0; d < 3; ++d)
          for (int sg = -1; sg <= 1; sg += 2) {
            const int nb = g.neighbor(i, d, sg);
            if (unk[nb] >= 0) s -= xin[unk[nb]] / h2;
          }
        out[k] = s;
      }
    };
    std::vector<double> x;
    KrylovResult res = (cfg.method == KrylovMethod::BiCgStab)
                           ? bicgstab_solve(A, b, x, cfg, &diag)
                           : cg_solve(A, b, x, cfg, &diag);
    if (stats) *stats = res;
    ScalarField out = *bc_values;
    for (std::size_t k = 0; k < n; ++k) out.v[nodes[k]] = x[k];
    return out;
  }

  // Robin: rows for every node; boundary rows scaled by 1/h for balance
  const std::size_t n = g.size();
  std::vector<double> b(n), diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (g.is_interior(i)) {
      b[i] = rhs(i);
      diag[i] = 6.0 / h2 + c(i);
    } else {
      b[i] = 0.0;
      // self-coefficients of the adaptive one-sided derivatives
      double dg = 1.0 / norm(g.node(i));
      const Vec3 nu = g.boundary_normal(i);
      for (int d = 0; d < 3; ++d) {
        const int ip = g.neighbor(i, d, +1), im = g.neighbor(i, d, -1);
        double selfc = 0;
        if (ip >= 0 && im >= 0) selfc = 0;
        else if (ip >= 0) {
          int o[3] = {0, 0, 0};
          o[d] = 2;
          selfc = g.offset(i, o[0], o[1], o[2]) >= 0 ? -3.0 / (2 * h) : -1.0 / h;
        } else if (im >= 0) {
          int o[3] = {0, 0, 0};
          o[d] = -2;
          selfc = g.offset(i, o[0], o[1], o[2]) >= 0 ? 3.0 / (2 * h) : 1.0 / h;
        }
        dg += nu[d] * selfc;
      }
      diag[i] = dg / h;
      if (std::abs(diag[i]) < 1e-12) diag[i] = 1.0;
    }
  }
  ScalarField tmp(grid);
  LinOp A = [&, grid](const std::vector<double>& xin, std::vector<double>& out) {
    ScalarField xf(grid);
    xf.v = xin;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)n; ++i) {
      if (g.is_interior(i)) {
        double s = (6.0 / h2 + c(i)) * xin[i];
        for (int d = 0; d < 3; ++d)
          s -= (xin[g.neighbor(i, d, +1)] + xin[g.neighbor(i, d, -1)]) / h2;
        out[i] = s;
      } else {
        const Vec3 nu = g.boundary_normal(i);
        double s = xin[i] / norm(g.node(i));
        for (int d = 0; d < 3; ++d) s += nu[d] * diff1(xf, i, 0, d);
        out[i] = s / h;
      }
    }
  };
  std::vector<double> x;
  KrylovResult res = bicgstab_solve(A, b, x, cfg, &diag);
  if (stats) *stats = res;
  ScalarField out(grid);
  out.v = x;
  return out;
}

// ---- vector BVP ----

std::vector<double> compatibility_defect(const OneFormField& rhs, const OneFormField& traction,
                                         const std::vector<OneFormField>& killing) {
  const BallGrid& g = *rhs.grid;
  const double vol = g.cell_volume();
  std::vector<double> out;
  for (const auto& K : killing) {
    double s = vol * det_sum(g.size(), [&](std::size_t i) {
      return rhs.v[3 * i] * K.v[3 * i] + rhs.v[3 * i + 1] * K.v[3 * i + 1] + rhs.v[3 * i + 2] * K.v[3 * i + 2];
    });
    for (std::size_t bnode : g.boundary_nodes())
      s += g.surface_weight(bnode) * dot(traction.vec(bnode), K.vec(bnode));
    out.push_back(s);
  }
  return out;
}

VectorBvpResult vector_bvp_solve(const OneFormField& rhs, const OneFormField& traction,
                                 const std::vector<OneFormField>& killing, const LinearSolverConfig& cfg,
                                 bool sphere_gauge, double compat_tol) {
  const GridPtr grid = rhs.grid;
  const BallGrid& g = *grid;
  const std::size_t N = g.size();
  const double h = g.spacing();
  const double vol = g.cell_volume();

  // orthogonality weights: h^3 flat, U^10 h^3 in sphere gauge
  std::vector<double> w(N);
  for (std::size_t i = 0; i < N; ++i)
    w[i] = vol * (sphere_gauge ? std::pow(conf_factor(g.node(i)), 10) : 1.0);

  // compatibility (flat-gauge contract; sphere-gauge callers pass compatible data)
  if (!sphere_gauge && !killing.empty()) {
    const auto defect = compatibility_defect(rhs, traction, killing);
    double dn = 0, scale = 0;
    for (double d : defect) dn = std::max(dn, std::abs(d));
    const double rn = std::sqrt(vol * det_sum(3 * N, [&](std::size_t i) { return rhs.v[i] * rhs.v[i]; }));
    double tn = 0;
    for (std::size_t bnode : g.boundary_nodes()) tn += g.surface_weight(bnode) * norm(traction.vec(bnode));
    scale = rn + tn + 1e-300;
    if (dn > compat_tol * scale)
      throw IncompatibleData("rhs/traction violate the Killing compatibility condition");
  }

  auto project = [&](std::vector<double>& x) {
    for (const auto& K : killing) {
      const double c = det_sum(N, [&](std::size_t i) {
        return w[i] * (K.v[3 * i] * x[3 * i] + K.v[3 * i + 1] * x[3 * i + 1] + K.v[3 * i + 2] * x[3 * i + 2]);
      });
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)(3 * N); ++i) x[i] -= c * K.v[i];
    }
  };

  // row weights: volume (x U^6) on interior rows, surface on traction rows
  std::vector<double> rw(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double u6 = sphere_gauge ? std::pow(conf_factor(g.node(i)), 6) : 1.0;
    rw[i] = g.is_interior(i) ? vol * u6 : g.surface_weight(i) * u6 / h;
  }

  OneFormField xf(grid);
  auto apply_rows = [&](const std::vector<double>& xin, std::vector<double>& out) {
    xf.v = xin;
    const OneFormField D = vec_laplacian(xf);
    const SymTensorField L = cko(xf);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)N; ++i) {
      if (g.is_interior(i)) {
        Vec3 v = D.vec(i);
        if (sphere_gauge) {
          const Vec3 x = g.node(i);
          const Vec3 LdU = L.sym(i).apply(conf_factor_grad(x));
          const double Uinv = 1.0 / conf_factor(x);
          for (int c = 0; c < 3; ++c) v[c] -= 6.0 * Uinv * LdU[c];
        }
        for (int c = 0; c < 3; ++c) out[3 * i + c] = rw[i] * v[c];
      } else {
        const Vec3 nu = g.boundary_normal(i);
        const Vec3 tr = L.sym(i).apply(nu);
        for (int c = 0; c < 3; ++c) out[3 * i + c] = rw[i] * tr[c];
      }
    }
  };

  std::vector<double> b(3 * N);
  for (std::size_t i = 0; i < N; ++i)
    for (int c = 0; c < 3; ++c)
      b[3 * i + c] = rw[i] * (g.is_interior(i) ? rhs.v[3 * i + c] : traction.v[3 * i + c]);
  project(b);

  const double gamma = h;
  LinOp A = [&](const std::vector<double>& xin, std::vector<double>& out) {
    std::vector<double> xp = xin;
    project(xp);
    apply_rows(xp, out);
    project(out);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)(3 * N); ++i) out[i] += gamma * (xin[i] - xp[i]);
  };

  std::vector<double> x;
  KrylovResult res = bicgstab_solve(A, b, x, cfg);
  project(x);

  VectorBvpResult out;
  out.Z = OneFormField(grid);
  out.Z.v = x;
  out.iterations = res.iterations;
  out.rel_residual = res.rel_residual;
  // Killing components of the raw defect, the saddle multipliers
  std::vector<double> raw(3 * N);
  apply_rows(x, raw);
  for (const auto& K : killing) {
    out.multipliers.push_back(det_sum(N, [&](std::size_t i) {
      return w[i] * (K.v[3 * i] * (raw[3 * i] - b[3 * i]) + K.v[3 * i + 1] * (raw[3 * i + 1] - b[3 * i + 1]) +
                     K.v[3 * i + 2] * (raw[3 * i + 2] - b[3 * i + 2]));
    }));
  }
  return out;
}

// ---- conformal scalar operator ----

ConformalScalarOperator::ConformalScalarOperator(GridPtr g) : grid_(std::move(g)) {
  const BallGrid& gr = *grid_;
  const std::size_t N = gr.size();
  const double h = gr.spacing();
  face_.assign(6 * N, 0.0);
  mass_.resize(N);
  diag_.assign(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const Vec3 x = gr.node(i);
    mass_[i] = std::pow(conf_factor(x), 6);
    for (int d = 0; d < 3; ++d)
      for (int s = 0; s < 2; ++s) {
        const int nb = gr.neighbor(i, d, s == 0 ? +1 : -1);
        if (nb < 0) continue;
        Vec3 mid = x;
        mid[d] += (s == 0 ? 0.5 : -0.5) * h;
        const double u2 = conf_factor(mid);
        face_[6 * i + 2 * d + s] = u2 * u2;
        diag_[i] += u2 * u2 / (h * h);
      }
  }
}

void ConformalScalarOperator::apply(const std::vector<double>& w, std::vector<double>& out,
                                    const std::vector<double>* u6c) const {
  const BallGrid& g = *grid_;
  const double h2 = g.spacing() * g.spacing();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)g.size(); ++i) {
    double s = 0;
    for (int d = 0; d < 3; ++d)
      for (int sg = 0; sg < 2; ++sg) {
        const double f = face_[6 * i + 2 * d + sg];
        if (f == 0.0) continue;
        const int nb = g.neighbor(i, d, sg == 0 ? +1 : -1);
        s += f * (w[i] - w[nb]) / h2;
      }
    if (u6c) s += (*u6c)[i] * w[i];
    out[i] = s;
  }
}

double conformal_lambda_min(const ConformalScalarOperator& op, const ScalarField& hs,
                            const LinearSolverConfig& cfg, int power_iters) {
  const BallGrid& g = *op.grid();
  const std::size_t N = g.size();
  double hmin = hs.v[0];
  for (double v : hs.v) hmin = std::min(hmin, v);
  const double shift = std::max(0.0, 1.0 - hmin);

  std::vector<double> u6c(N), diag(N);
  for (std::size_t i = 0; i < N; ++i) {
    u6c[i] = op.mass(i) * (hs(i) + shift);
    diag[i] = op.diag(i) + std::abs(u6c[i]) + 1e-30;
  }
  LinOp A = [&](const std::vector<double>& x, std::vector<double>& y) { op.apply(x, y, &u6c); };

  std::vector<double> y(N), x(N);
  for (std::size_t i = 0; i < N; ++i) y[i] = 1.0 + 0.01 * std::sin((double)i);
  double lam = 0;
  LinearSolverConfig inner = cfg;
  inner.tol_rel = std::min(cfg.tol_rel * 100, 1e-8);
  for (int it = 0; it < power_iters; ++it) {
    std::vector<double> My(N);
    for (std::size_t i = 0; i < N; ++i) My[i] = op.mass(i) * y[i];
    cg_solve(A, My, x, inner, &diag);
    const double xMx = det_sum(N, [&](std::size_t i) { return op.mass(i) * x[i] * x[i]; });
    const double nrm = std::sqrt(xMx);
    for (std::size_t i = 0; i < N; ++i) y[i] = x[i] / nrm;
    std::vector<double> Ay(N);
    A(y, Ay);
    const double num = det_sum(N, [&](std::size_t i) { return y[i] * Ay[i]; });
    const double den = det_sum(N, [&](std::size_t i) { return op.mass(i) * y[i] * y[i]; });
    const double lam_new = num / den - shift;
    if (it > 3 && std::abs(lam_new - lam) < 1e-10 * (1 + std::abs(lam_new))) {
      lam = lam_new;
      break;
    }
    lam = lam_new;
  }
  return lam;
}

}  // namespace lichlab
