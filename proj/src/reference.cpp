#include "lichlab/reference.hpp"

#include "lichlab/operators.hpp"

namespace lichlab::ref {

ScalarField laplacian(const ScalarField& f) {
  const BallGrid& g = *f.grid;
  const double h2 = g.spacing() * g.spacing();
  ScalarField out(f.grid);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.is_interior(i)) continue;
    double s = 0;
    for (int d = 0; d < 3; ++d)
      s += 2 * f.v[i] - f.v[g.neighbor(i, d, +1)] - f.v[g.neighbor(i, d, -1)];
    out.v[i] = s / h2;
  }
  return out;
}

SymTensorField cko(const OneFormField& w) {
  SymTensorField out(w.grid);
  out.traceless_flag = true;
  for (std::size_t i = 0; i < w.size(); ++i) {
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

OneFormField vec_laplacian(const OneFormField& w) {
  const BallGrid& g = *w.grid;
  const double h2 = g.spacing() * g.spacing();
  OneFormField out(w.grid);
  SymTensorField L = ref::cko(w);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.has_full_stencil(i)) {
      for (int c = 0; c < 3; ++c) {
        double s = 0;
        for (int d = 0; d < 3; ++d)
          s += 2 * w.v[3 * i + c] - w.v[3 * g.neighbor(i, d, +1) + c] - w.v[3 * g.neighbor(i, d, -1) + c];
        out.v[3 * i + c] = s / h2;
      }
      for (int a = 0; a < 3; ++a) {
        double gd = 0;
        for (int j = 0; j < 3; ++j) {
          if (a == j) {
            gd += (w.v[3 * g.neighbor(i, a, +1) + j] - 2 * w.v[3 * i + j] +
                   w.v[3 * g.neighbor(i, a, -1) + j]) / h2;
          } else {
            int o[3];
            auto at = [&](int sa, int sj) {
              o[0] = o[1] = o[2] = 0;
              o[a] = sa;
              o[j] = sj;
              return g.offset(i, o[0], o[1], o[2]);
            };
            gd += (w.v[3 * at(1, 1) + j] - w.v[3 * at(1, -1) + j] - w.v[3 * at(-1, 1) + j] +
                   w.v[3 * at(-1, -1) + j]) / (4 * h2);
          }
        }
        out.v[3 * i + a] -= gd / 3.0;
      }
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

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  // chunked exactly like det_sum so the parallel version is bitwise equal
  double total = 0;
  for (std::size_t lo = 0; lo < a.size(); lo += kReduceChunk) {
    const std::size_t hi = std::min(a.size(), lo + kReduceChunk);
    double s = 0;
    for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
    total += s;
  }
  return total;
}

}  // namespace lichlab::ref
