#include "lichlab/chart.hpp"

#include <cmath>

#include "lichlab/operators.hpp"

namespace lichlab {

ChartPole::ChartPole(const Vec4& P, double eps_pole) : P_(P), eps_(eps_pole) {
  const double n = norm4(P_);
  if (std::abs(n - 1.0) > 1e-12) throw std::invalid_argument("chart pole must be a unit 4-vector");
  for (auto& c : P_) c /= n;
  Q_ = {-P_[0], -P_[1], -P_[2], -P_[3]};
  // deterministic orthonormal frame of Q^perp: Gram-Schmidt on the canonical
  // basis, starting from the axis least aligned with Q
  int start = 0;
  double best = std::abs(Q_[0]);
  for (int k = 1; k < 4; ++k)
    if (std::abs(Q_[k]) < best) {
      best = std::abs(Q_[k]);
      start = k;
    }
  int m = 0;
  for (int k = 0; k < 4 && m < 3; ++k) {
    const int a = (start + k) % 4;
    Vec4 v{0, 0, 0, 0};
    v[a] = 1.0;
    double d = dot4(v, Q_);
    for (int c = 0; c < 4; ++c) v[c] -= d * Q_[c];
    for (int p = 0; p < m; ++p) {
      d = dot4(v, e_[p]);
      for (int c = 0; c < 4; ++c) v[c] -= d * e_[p][c];
    }
    const double vn = norm4(v);
    if (vn > 1e-8) {
      for (auto& c : v) c /= vn;
      e_[m++] = v;
    }
  }
}

Vec3 ChartPole::forward(const Vec4& y) const {
  Vec4 d{y[0] - Q_[0], y[1] - Q_[1], y[2] - Q_[2], y[3] - Q_[3]};
  if (norm4(d) < eps_) throw PoleSingularity("point within eps_pole of -P");
  const double den = 1.0 - dot4(y, Q_);
  return {dot4(y, e_[0]) / den, dot4(y, e_[1]) / den, dot4(y, e_[2]) / den};
}

Vec4 ChartPole::inverse(const Vec3& x) const {
  const double s = norm2(x);
  const double den = 1.0 + s;
  Vec4 y{0, 0, 0, 0};
  for (int c = 0; c < 4; ++c)
    y[c] = (2.0 * x[0] * e_[0][c] + 2.0 * x[1] * e_[1][c] + 2.0 * x[2] * e_[2][c] + (s - 1.0) * Q_[c]) / den;
  return y;
}

std::array<Vec4, 3> ChartPole::inverse_jacobian(const Vec3& x) const {
  const double s = norm2(x);
  const double den = 1.0 + s;
  std::array<Vec4, 3> J;
  for (int i = 0; i < 3; ++i) {
    // d y / d x_i in frame coords: (2 delta_ki/den - 4 x_k x_i/den^2, 4 x_i/den^2)
    for (int c = 0; c < 4; ++c) {
      double v = 0;
      for (int k = 0; k < 3; ++k) {
        const double dk = (2.0 * (k == i ? 1.0 : 0.0) / den - 4.0 * x[k] * x[i] / (den * den));
        v += dk * e_[k][c];
      }
      v += (4.0 * x[i] / (den * den)) * Q_[c];
      J[i][c] = v;
    }
  }
  return J;
}

std::array<Vec4, 3> ChartPole::forward_jacobian(const Vec4& y) const {
  const double den = 1.0 - dot4(y, Q_);
  std::array<Vec4, 3> J;
  for (int i = 0; i < 3; ++i)
    for (int a = 0; a < 4; ++a)
      J[i][a] = e_[i][a] / den + dot4(y, e_[i]) * Q_[a] / (den * den);
  return J;
}

ScalarField ChartPole::pull_back_scalar(const GridPtr& g,
                                        const std::function<double(const Vec4&)>& u) const {
  return sample_scalar(g, [&](const Vec3& x) { return u(inverse(x)); });
}

OneFormField ChartPole::pull_back_one_form(const GridPtr& g,
                                           const std::function<Vec4(const Vec4&)>& w) const {
  return sample_one_form(g, [&](const Vec3& x) {
    const Vec4 y = inverse(x);
    const Vec4 wa = w(y);
    const auto J = inverse_jacobian(x);
    return Vec3{dot4(wa, J[0]), dot4(wa, J[1]), dot4(wa, J[2])};
  });
}

SymTensorField ChartPole::pull_back_sym_tensor(
    const GridPtr& g, const std::function<std::array<Vec4, 4>(const Vec4&)>& t) const {
  return sample_sym_tensor(g, [&](const Vec3& x) {
    const Vec4 y = inverse(x);
    const auto T = t(y);
    const auto J = inverse_jacobian(x);
    Sym3 s;
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        double v = 0;
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) v += T[a][b] * J[i][a] * J[j][b];
        s.at(i, j) = v;
      }
    return s;
  });
}

double chart_identity_residual(ChartIdentity kind, const ScalarField& v, const ScalarField& s) {
  if (kind != ChartIdentity::ScalarLaplacian) throw std::invalid_argument("scalar inputs need ScalarLaplacian");
  const BallGrid& g = *v.grid;
  const ScalarField lap = laplacian(v);
  return det_max(g.size(), [&](std::size_t i) -> double {
    if (!g.is_interior(i)) return 0.0;
    const double U5 = std::pow(conf_factor(g.node(i)), 5);
    return std::abs(lap(i) - U5 * s(i));
  });
}

double chart_identity_residual(ChartIdentity kind, const OneFormField& what, const SymTensorField& T) {
  if (kind != ChartIdentity::Cko) throw std::invalid_argument("tensor sphere side needs Cko");
  const BallGrid& g = *what.grid;
  const SymTensorField L = cko(what);
  return det_max(g.size(), [&](std::size_t i) -> double {
    if (!g.is_interior(i)) return 0.0;
    const double U4 = std::pow(conf_factor(g.node(i)), 4);
    double m = 0;
    for (int c = 0; c < 6; ++c) m = std::max(m, std::abs(U4 * L.v[6 * i + c] - T.v[6 * i + c]));
    return m;
  });
}

double chart_identity_residual(ChartIdentity kind, const OneFormField& what, const OneFormField& A) {
  if (kind != ChartIdentity::VectorLaplacian) throw std::invalid_argument("one-form sphere side needs VectorLaplacian");
  const BallGrid& g = *what.grid;
  const OneFormField D = vec_laplacian(what);
  const SymTensorField L = cko(what);
  return det_max(g.size(), [&](std::size_t i) -> double {
    if (!g.has_full_stencil(i)) return 0.0;
    const Vec3 x = g.node(i);
    const double Uinv = 1.0 / conf_factor(x);
    const Vec3 dU = conf_factor_grad(x);
    const Vec3 LdU = L.sym(i).apply(dU);
    double m = 0;
    for (int c = 0; c < 3; ++c)
      m = std::max(m, std::abs(D.v[3 * i + c] - 6.0 * Uinv * LdU[c] - A.v[3 * i + c]));
    return m;
  });
}

}  // namespace lichlab
