#include "lichlab/killing.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>

#include "json.hpp"

namespace lichlab {

Vec3 ckv_eval(const CKVParams& p, const Vec3& x) {
  const double bx = dot(p.b, x), s = norm2(x);
  Vec3 out;
  for (int i = 0; i < 3; ++i) out[i] = 2 * bx * x[i] - s * p.b[i] + p.lambda * x[i] + p.c[i];
  out[0] += p.omega[1] * x[2] - p.omega[2] * x[1];
  out[1] += p.omega[2] * x[0] - p.omega[0] * x[2];
  out[2] += p.omega[0] * x[1] - p.omega[1] * x[0];
  return out;
}

Mat3 ckv_gradient(const CKVParams& p, const Vec3& x) {
  const double bx = dot(p.b, x);
  Mat3 g{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      g[i][j] = 2 * p.b[j] * x[i] + 2 * bx * (i == j) - 2 * x[j] * p.b[i] + p.lambda * (i == j);
  g[0][1] += -p.omega[2]; g[0][2] += p.omega[1];
  g[1][0] += p.omega[2];  g[1][2] += -p.omega[0];
  g[2][0] += -p.omega[1]; g[2][1] += p.omega[0];
  return g;
}

double KillingBasis::inner(const OneFormField& a, const OneFormField& b) const {
  return det_sum(grid->size(), [&](std::size_t i) {
    return node_weight[i] *
           (a.v[3 * i] * b.v[3 * i] + a.v[3 * i + 1] * b.v[3 * i + 1] + a.v[3 * i + 2] * b.v[3 * i + 2]);
  });
}

KillingBasis make_killing_basis(const GridPtr& grid, double R,
                                const std::function<double(const Vec3&)>& weight) {
  if (std::abs(grid->radius() - R) > 1e-12) throw std::invalid_argument("grid radius must equal R");
  KillingBasis B;
  B.grid = grid;
  B.R = R;
  const std::size_t N = grid->size();
  B.node_weight.resize(N);
  const double vol = grid->cell_volume();
  for (std::size_t i = 0; i < N; ++i)
    B.node_weight[i] = vol * (weight ? weight(grid->node(i)) : 1.0);

  std::vector<CKVParams> raw(10);
  for (int d = 0; d < 3; ++d) raw[d].c[d] = 1.0;
  for (int d = 0; d < 3; ++d) raw[3 + d].omega[d] = 1.0;
  raw[6].lambda = 1.0;
  for (int d = 0; d < 3; ++d) raw[7 + d].b[d] = 1.0;

  std::vector<OneFormField> rawf;
  for (const auto& p : raw)
    rawf.push_back(sample_one_form(grid, [&](const Vec3& x) { return ckv_eval(p, x); }));

  Eigen::MatrixXd G(10, 10);
  for (int a = 0; a < 10; ++a)
    for (int b = a; b < 10; ++b) {
      const double s = det_sum(N, [&](std::size_t i) {
        return B.node_weight[i] * (rawf[a].v[3 * i] * rawf[b].v[3 * i] +
                                   rawf[a].v[3 * i + 1] * rawf[b].v[3 * i + 1] +
                                   rawf[a].v[3 * i + 2] * rawf[b].v[3 * i + 2]);
      });
      G(a, b) = G(b, a) = s;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0) || lmax / lmin > 1e8) throw DegenerateBasis("Killing Gram matrix too ill-conditioned");

  Eigen::LLT<Eigen::MatrixXd> llt(G);
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(10, 10);
  C = llt.matrixL().solve(C).transpose();  // C = L^{-T}, columns give combos

  for (int a = 0; a < 10; ++a) {
    OneFormField f(grid);
    CKVParams pa;
    for (int k = 0; k < 10; ++k) {
      const double ck = C(k, a);
      if (ck == 0.0) continue;
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)(3 * N); ++i) f.v[i] += ck * rawf[k].v[i];
      pa.lambda += ck * raw[k].lambda;
      for (int d = 0; d < 3; ++d) {
        pa.b[d] += ck * raw[k].b[d];
        pa.c[d] += ck * raw[k].c[d];
        pa.omega[d] += ck * raw[k].omega[d];
      }
    }
    B.fields.push_back(std::move(f));
    B.params.push_back(pa);
  }
  for (int a = 0; a < 10; ++a)
    for (int b = 0; b < 10; ++b) B.gram[10 * a + b] = B.inner(B.fields[a], B.fields[b]);
  return B;
}

OneFormField killing_project(const KillingBasis& basis, const OneFormField& X) {
  OneFormField out(X.grid);
  const std::size_t N = X.grid->size();
  for (const auto& K : basis.fields) {
    const double c = basis.inner(K, X);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)(3 * N); ++i) out.v[i] += c * K.v[i];
  }
  return out;
}

Sym3 kernel_eval(const Vec3& x, const Vec3& y) {
  const Vec3 z = x - y;
  const double r = norm(z);
  if (r < 1e-14) throw CoincidentPoints("kernel_eval at x = y");
  const double r3 = r * r * r;
  Sym3 H;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) H.at(i, j) = (7.0 * (i == j) / r + z[i] * z[j] / r3) / (32 * M_PI);
  return H;
}

Mat3 kernel_traction(const Vec3& x, const Vec3& y, const Vec3& nu) {
  const Vec3 z = x - y;
  const double r = norm(z);
  if (r < 1e-14) throw CoincidentPoints("kernel_traction at x = y");
  const double r3 = r * r * r, r5 = r3 * r * r;
  const double cst = 1.0 / (32 * M_PI);
  Mat3 out{};
  for (int i = 0; i < 3; ++i) {
    // dyk[k][l] = d/dy_k (H_i)_l = -dH_il/dz_k
    double dyk[3][3];
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l) {
        const double dz = cst * (-7.0 * (i == l) * z[k] / r3 + ((i == k) * z[l] + (l == k) * z[i]) / r3 -
                                 3.0 * z[i] * z[l] * z[k] / r5);
        dyk[k][l] = -dz;
      }
    const double div = dyk[0][0] + dyk[1][1] + dyk[2][2];
    for (int l = 0; l < 3; ++l) {
      double t = 0;
      for (int k = 0; k < 3; ++k)
        t += nu[k] * (dyk[k][l] + dyk[l][k] - (k == l ? 2.0 / 3.0 * div : 0.0));
      out[i][l] = t;
    }
  }
  return out;
}

double kernel_singular_cell_value(double h) {
  const double r_cell = std::cbrt(3.0 / (4.0 * M_PI)) * h;
  // <H> over the equal-volume ball: (22/3) I * (1/32pi) * <1/|z|>
  return (22.0 / 3.0) * (1.0 / (32 * M_PI)) * (3.0 / (2.0 * r_cell));
}

// ---- near-field calibration on the unit lattice ----

namespace {

struct KernelCalibration {
  // chi[(k)] in R^3 for source e_x; other sources by axis permutation
  std::map<std::array<int, 3>, Vec3> chi;
};

// compact direct vec-laplacian stencil on the unit lattice: coefficient of
// input component c at relative offset d, contributing to output component i
double stencil_coef(int i, int c, const std::array<int, 3>& d) {
  const int an = std::abs(d[0]) + std::abs(d[1]) + std::abs(d[2]);
  double v = 0;
  if (i == c) {
    if (an == 0) v += 6.0;                       // -Delta7 diagonal
    else if (an == 1) v += -1.0;
    if (d[0] == 0 && d[1] == 0 && d[2] == 0) v += 2.0 / 3.0;   // -(1/3) d_i d_i
    else if (an == 1 && d[i] != 0) v += -1.0 / 3.0;
  } else {
    // -(1/3) d_i d_c cross stencil
    if (std::abs(d[i]) == 1 && std::abs(d[c]) == 1 && an == 2) v += -(d[i] * d[c]) / 12.0;
  }
  return v;
}

const KernelCalibration& kernel_calibration() {
  static KernelCalibration calib = [] {
    KernelCalibration out;
    const int mc = 2, mt = 8, box = mt + 2;
    // base kernel column for source e_x on the unit lattice
    auto Hval = [&](const std::array<int, 3>& k) -> Vec3 {
      if (k[0] == 0 && k[1] == 0 && k[2] == 0) return {kernel_singular_cell_value(1.0), 0, 0};
      const Vec3 z{(double)k[0], (double)k[1], (double)k[2]};
      const Sym3 H = kernel_eval(z, {0, 0, 0});
      return {H(0, 0), H(0, 1), H(0, 2)};
    };
    // residual of the delta reproduction on rows |k|_inf <= mt
    std::vector<std::array<int, 3>> rows;
    for (int a = -mt; a <= mt; ++a)
      for (int b = -mt; b <= mt; ++b)
        for (int c = -mt; c <= mt; ++c) rows.push_back({a, b, c});
    std::vector<std::array<int, 3>> offs;
    for (int a = -mc; a <= mc; ++a)
      for (int b = -mc; b <= mc; ++b)
        for (int c = -mc; c <= mc; ++c) offs.push_back({a, b, c});

    const std::size_t nr = rows.size() * 3, nu = offs.size() * 3;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nr, nu);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nr);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& k = rows[r];
      const double w = std::pow(1.0 + k[0] * k[0] + k[1] * k[1] + k[2] * k[2], 1.25);
      for (int i = 0; i < 3; ++i) {
        double res = 0;  // (veclap Hhat)(k)_i
        for (int da = -1; da <= 1; ++da)
          for (int db = -1; db <= 1; ++db)
            for (int dc = -1; dc <= 1; ++dc) {
              const std::array<int, 3> d{da, db, dc};
              const std::array<int, 3> kk{k[0] + da, k[1] + db, k[2] + dc};
              if (std::abs(kk[0]) > box || std::abs(kk[1]) > box || std::abs(kk[2]) > box) continue;
              const Vec3 Hc = Hval(kk);
              for (int c = 0; c < 3; ++c) res += stencil_coef(i, c, d) * Hc[c];
            }
        if (k[0] == 0 && k[1] == 0 && k[2] == 0 && i == 0) res -= 1.0;
        rhs((Eigen::Index)(3 * r + i)) = -w * res;
        for (std::size_t u = 0; u < offs.size(); ++u) {
          const std::array<int, 3> d{offs[u][0] - k[0], offs[u][1] - k[1], offs[u][2] - k[2]};
          if (std::abs(d[0]) > 1 || std::abs(d[1]) > 1 || std::abs(d[2]) > 1) continue;
          for (int c = 0; c < 3; ++c)
            A((Eigen::Index)(3 * r + i), (Eigen::Index)(3 * u + c)) = w * stencil_coef(i, c, d);
        }
      }
    }
    Eigen::MatrixXd AtA = A.transpose() * A;
    AtA.diagonal().array() += 1e-8;
    Eigen::VectorXd chi = AtA.ldlt().solve(A.transpose() * rhs);
    for (std::size_t u = 0; u < offs.size(); ++u)
      out.chi[offs[u]] = {chi((Eigen::Index)(3 * u)), chi((Eigen::Index)(3 * u + 1)),
                          chi((Eigen::Index)(3 * u + 2))};
    return out;
  }();
  return calib;
}

/// Full 3x3 correction at a lattice offset, rows generated from the e_x
/// solution by the axis swap taking e_x to e_i.
Mat3 calibration_matrix(const std::array<int, 3>& off) {
  const auto& chi = kernel_calibration().chi;
  Mat3 M{};
  for (int i = 0; i < 3; ++i) {
    int perm[3] = {0, 1, 2};
    std::swap(perm[0], perm[i]);
    const std::array<int, 3> op{off[perm[0]], off[perm[1]], off[perm[2]]};
    auto it = chi.find(op);
    if (it == chi.end()) continue;
    for (int c = 0; c < 3; ++c) M[i][c] = it->second[perm[c]];
  }
  return M;
}

}  // namespace

OneFormField kernel_convolve(const OneFormField& Y) {
  const GridPtr grid = Y.grid;
  const BallGrid& g = *grid;
  const double h = g.spacing(), vol = g.cell_volume();
  const double half = g.radius() / 2;

  std::vector<std::size_t> supp;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec3 y = Y.vec(i);
    if (y[0] != 0 || y[1] != 0 || y[2] != 0) {
      if (norm(g.node(i)) > half + 1e-12)
        throw std::invalid_argument("kernel_convolve: Y must vanish outside |x| <= R/2");
      supp.push_back(i);
    }
  }

  const double diag_avg = kernel_singular_cell_value(h);
  OneFormField W(grid);
#pragma omp parallel for schedule(dynamic, 32)
  for (std::ptrdiff_t a = 0; a < (std::ptrdiff_t)g.size(); ++a) {
    const Vec3 x = g.node(a);
    Vec3 acc{0, 0, 0};
    for (std::size_t s : supp) {
      const Vec3 yv = Y.vec(s);
      if (s == (std::size_t)a) {
        for (int c = 0; c < 3; ++c) acc[c] += diag_avg * yv[c];
      } else {
        const Sym3 H = kernel_eval(x, g.node(s));
        const Vec3 t = H.apply(yv);
        for (int c = 0; c < 3; ++c) acc[c] += t[c];
      }
    }
    // near-field calibration: offsets |k|_inf <= 2 around x
    const auto& la = g.lattice(a);
    for (int da = -2; da <= 2; ++da)
      for (int db = -2; db <= 2; ++db)
        for (int dc = -2; dc <= 2; ++dc) {
          const int nb = g.find_lattice(la[0] - da, la[1] - db, la[2] - dc);
          if (nb < 0) continue;
          const Vec3 yv = Y.vec(nb);
          if (yv[0] == 0 && yv[1] == 0 && yv[2] == 0) continue;
          const Mat3 M = calibration_matrix({da, db, dc});
          for (int i = 0; i < 3; ++i)
            acc[i] += (M[i][0] * yv[0] + M[i][1] * yv[1] + M[i][2] * yv[2]) / h;
        }
    W.set(a, vol * acc);
  }
  return W;
}

GreenForm neumann_green_assemble(const KillingBasis& basis, const Vec3& x, int i,
                                 const LinearSolverConfig& cfg) {
  const GridPtr grid = basis.grid;
  const BallGrid& g = *grid;
  const double R = basis.R, h = g.spacing();
  if (R - norm(x) < 4 * h) throw TooCloseToBoundary("need distance to the boundary >= 4h");

  OneFormField rhs(grid);
  for (int j = 0; j < 10; ++j) {
    const double cj = ckv_eval(basis.params[j], x)[i];
    const auto& K = basis.fields[j];
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t n = 0; n < (std::ptrdiff_t)(3 * g.size()); ++n) rhs.v[n] -= cj * K.v[n];
  }
  OneFormField G(grid);
  for (std::size_t b : g.boundary_nodes()) {
    const Mat3 T = kernel_traction(x, g.node(b), g.boundary_normal(b));
    G.set(b, {-T[i][0], -T[i][1], -T[i][2]});
  }
  VectorBvpResult sol = vector_bvp_solve(rhs, G, basis.fields, cfg);

  GreenForm out;
  out.x = x;
  out.i = i;
  out.R = R;
  out.field = OneFormField(grid);
  const double diag_avg = kernel_singular_cell_value(h);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < (std::ptrdiff_t)g.size(); ++n) {
    const Vec3 y = g.node(n);
    Vec3 val;
    if (norm(x - y) < 1e-12 * h) {
      val = {0, 0, 0};
      val[i] = diag_avg;
    } else {
      const Sym3 H = kernel_eval(x, y);
      val = {H(i, 0), H(i, 1), H(i, 2)};
    }
    for (int c = 0; c < 3; ++c) out.field.v[3 * n + c] = val[c] + sol.Z.v[3 * n + c];
  }
  const OneFormField proj = killing_project(basis, out.field);
  for (std::size_t n = 0; n < 3 * g.size(); ++n) out.field.v[n] -= proj.v[n];
  out.killing_free = true;
  return out;
}

std::array<double, 2> green_reproduction(const GreenForm& green, const KillingBasis& basis,
                                         const OneFormField& X) {
  const BallGrid& g = *green.field.grid;
  const double vol = g.cell_volume();
  const OneFormField DX = vec_laplacian(X);
  double lhs = vol * det_sum(g.size(), [&](std::size_t n) {
    return green.field.v[3 * n] * DX.v[3 * n] + green.field.v[3 * n + 1] * DX.v[3 * n + 1] +
           green.field.v[3 * n + 2] * DX.v[3 * n + 2];
  });
  const SymTensorField LX = cko(X);
  for (std::size_t b : g.boundary_nodes()) {
    const Vec3 tr = LX.sym(b).apply(g.boundary_normal(b));
    lhs += g.surface_weight(b) * dot(tr, green.field.vec(b));
  }
  const OneFormField piX = killing_project(basis, X);
  // (X - pi X)_i at the source point: exact only on a node; X is nodal data
  const int node = g.locate(green.x);
  if (node < 0) throw std::invalid_argument("green_reproduction: x is not on the grid");
  const double rhsv = X.v[3 * node + green.i] - piX.v[3 * node + green.i];
  return {lhs, rhsv};
}

GreenVerifyReport green_verify(const GreenForm& green, const KillingBasis& basis, double margin) {
  const BallGrid& g = *green.field.grid;
  const double h = g.spacing();
  GreenVerifyReport rep;
  double lo = 1e300, hi = 0;
  OneFormField gradmag(green.field.grid);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Vec3 y = g.node(n);
    const double r = norm(green.x - y);
    if (r < 1.5 * h) continue;
    double Gn = norm(green.field.vec(n));
    rep.max_r_G = std::max(rep.max_r_G, r * Gn);
    if (r >= 3 * h && g.is_interior(n)) {
      double d2 = 0;
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d) {
          const double dv = diff1(green.field, n, c, d);
          d2 += dv * dv;
        }
      rep.max_r2_dG = std::max(rep.max_r2_dG, r * r * std::sqrt(d2));
    }
    if (r <= 4 * h + margin * 0) {
      const Sym3 H = kernel_eval(green.x, y);
      const Vec3 Hi{H(green.i, 0), H(green.i, 1), H(green.i, 2)};
      const double ratio = Gn / (norm(Hi) + 1e-300);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  rep.near_ratio_lo = lo;
  rep.near_ratio_hi = hi;
  for (const auto& K : basis.fields) rep.killing_inner.push_back(basis.inner(K, green.field));
  return rep;
}

void dump_green(const GreenForm& green, const std::string& field_path, const std::string& json_path) {
  dump_field(green.field, field_path);
  nlohmann::json j;
  j["x"] = {green.x[0], green.x[1], green.x[2]};
  j["i"] = green.i;
  j["R"] = green.R;
  j["killing_free"] = green.killing_free;
  j["field"] = field_path;
  std::ofstream os(json_path);
  os << j.dump(2) << "\n";
}

}  // namespace lichlab
