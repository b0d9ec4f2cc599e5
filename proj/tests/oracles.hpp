// Test-side oracles, independent of the library's discrete operators:
// a second-order forward-mode jet for exact derivatives of closed forms,
// plus small helpers shared across suites.

#pragma once

#include <cmath>
#include <random>

#include "lichlab/core.hpp"

namespace oracle {

using lichlab::Vec3;

/// Value, gradient and Hessian of an expression in 3 variables.
struct Jet {
  double v = 0;
  std::array<double, 3> g{};
  std::array<std::array<double, 3>, 3> H{};

  static Jet var(int i, double x) {
    Jet j;
    j.v = x;
    j.g[i] = 1;
    return j;
  }
  static Jet cnst(double c) {
    Jet j;
    j.v = c;
    return j;
  }
};

inline Jet operator+(const Jet& a, const Jet& b) {
  Jet r;
  r.v = a.v + b.v;
  for (int i = 0; i < 3; ++i) {
    r.g[i] = a.g[i] + b.g[i];
    for (int j = 0; j < 3; ++j) r.H[i][j] = a.H[i][j] + b.H[i][j];
  }
  return r;
}
inline Jet operator-(const Jet& a, const Jet& b) {
  Jet r;
  r.v = a.v - b.v;
  for (int i = 0; i < 3; ++i) {
    r.g[i] = a.g[i] - b.g[i];
    for (int j = 0; j < 3; ++j) r.H[i][j] = a.H[i][j] - b.H[i][j];
  }
  return r;
}
inline Jet operator*(const Jet& a, const Jet& b) {
  Jet r;
  r.v = a.v * b.v;
  for (int i = 0; i < 3; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r.H[i][j] = a.H[i][j] * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] + a.v * b.H[i][j];
  return r;
}
inline Jet operator*(double s, const Jet& a) { return Jet::cnst(s) * a; }
inline Jet operator+(const Jet& a, double s) { return a + Jet::cnst(s); }
inline Jet operator+(double s, const Jet& a) { return a + Jet::cnst(s); }
inline Jet operator-(const Jet& a, double s) { return a - Jet::cnst(s); }
inline Jet operator-(double s, const Jet& a) { return Jet::cnst(s) - a; }

/// Chain rule for f(u) with f', f'' supplied.
inline Jet compose(const Jet& u, double f, double df, double ddf) {
  Jet r;
  r.v = f;
  for (int i = 0; i < 3; ++i) r.g[i] = df * u.g[i];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.H[i][j] = ddf * u.g[i] * u.g[j] + df * u.H[i][j];
  return r;
}
inline Jet exp(const Jet& u) {
  const double e = std::exp(u.v);
  return compose(u, e, e, e);
}
inline Jet sin(const Jet& u) { return compose(u, std::sin(u.v), std::cos(u.v), -std::sin(u.v)); }
inline Jet cos(const Jet& u) { return compose(u, std::cos(u.v), -std::sin(u.v), -std::cos(u.v)); }
inline Jet sqrt(const Jet& u) {
  const double s = std::sqrt(u.v);
  return compose(u, s, 0.5 / s, -0.25 / (s * s * s));
}
inline Jet pow(const Jet& u, double p) {
  return compose(u, std::pow(u.v, p), p * std::pow(u.v, p - 1), p * (p - 1) * std::pow(u.v, p - 2));
}
inline Jet inv(const Jet& u) { return pow(u, -1.0); }
inline Jet operator/(const Jet& a, const Jet& b) { return a * inv(b); }

inline std::array<Jet, 3> vars(const Vec3& x) {
  return {Jet::var(0, x[0]), Jet::var(1, x[1]), Jet::var(2, x[2])};
}

/// Geometer Laplacian (-div grad) of a scalar closed form.
template <class F>
double laplacian_geo(F&& f, const Vec3& x) {
  const Jet j = f(vars(x));
  return -(j.H[0][0] + j.H[1][1] + j.H[2][2]);
}

/// Exact conformal Killing operator of a vector closed form.
template <class F>
lichlab::Sym3 cko_exact(F&& w, const Vec3& x) {
  const std::array<Jet, 3> W = w(vars(x));
  const double div = W[0].g[0] + W[1].g[1] + W[2].g[2];
  lichlab::Sym3 s;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) s.at(i, j) = W[i].g[j] + W[j].g[i] - (i == j ? 2.0 / 3.0 * div : 0.0);
  return s;
}

/// Exact Lame-type vector Laplacian -Delta_a W - (1/3) grad div W.
template <class F>
Vec3 vec_laplacian_exact(F&& w, const Vec3& x) {
  const std::array<Jet, 3> W = w(vars(x));
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    double lap = W[i].H[0][0] + W[i].H[1][1] + W[i].H[2][2];
    double gd = 0;
    for (int j = 0; j < 3; ++j) gd += W[j].H[i][j];
    out[i] = -lap - gd / 3.0;
  }
  return out;
}

inline double urand(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (double)(rng() >> 11) * 0x1.0p-53;
}

/// Convergence order from residuals on grids h and h/2.
inline double order2(double coarse, double fine) { return std::log2(coarse / fine); }

}  // namespace oracle
