#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lichlab {

using Vec3 = std::array<double, 3>;
using Vec4 = std::array<double, 4>;
using Mat3 = std::array<Vec3, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }

inline double dot4(const Vec4& a, const Vec4& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}
inline double norm4(const Vec4& a) { return std::sqrt(dot4(a, a)); }

/// Symmetric 3x3, upper-triangular storage (xx, xy, xz, yy, yz, zz).
struct Sym3 {
  std::array<double, 6> c{};

  static constexpr int idx(int i, int j) {
    if (i > j) std::swap(i, j);
    // (0,0)=0 (0,1)=1 (0,2)=2 (1,1)=3 (1,2)=4 (2,2)=5
    return i == 0 ? j : (i == 1 ? 2 + j : 5);
  }
  double operator()(int i, int j) const { return c[idx(i, j)]; }
  double& at(int i, int j) { return c[idx(i, j)]; }
  double trace() const { return c[0] + c[3] + c[5]; }
  double frob2() const {
    return c[0] * c[0] + c[3] * c[3] + c[5] * c[5] + 2.0 * (c[1] * c[1] + c[2] * c[2] + c[4] * c[4]);
  }
  Vec3 apply(const Vec3& v) const {
    return {c[0] * v[0] + c[1] * v[1] + c[2] * v[2],
            c[1] * v[0] + c[3] * v[1] + c[4] * v[2],
            c[2] * v[0] + c[4] * v[1] + c[5] * v[2]};
  }
  Sym3& operator+=(const Sym3& o) {
    for (int k = 0; k < 6; ++k) c[k] += o.c[k];
    return *this;
  }
};

inline Sym3 operator*(double s, const Sym3& t) {
  Sym3 r;
  for (int k = 0; k < 6; ++k) r.c[k] = s * t.c[k];
  return r;
}
inline Sym3 operator+(const Sym3& a, const Sym3& b) {
  Sym3 r;
  for (int k = 0; k < 6; ++k) r.c[k] = a.c[k] + b.c[k];
  return r;
}
inline Sym3 operator-(const Sym3& a, const Sym3& b) {
  Sym3 r;
  for (int k = 0; k < 6; ++k) r.c[k] = a.c[k] - b.c[k];
  return r;
}

// ---- error types (names follow the module contracts) ----

#define LICHLAB_ERROR(Name)                                     \
  struct Name : std::runtime_error {                            \
    explicit Name(const std::string& m) : std::runtime_error(std::string(#Name) + ": " + m) {} \
  }

LICHLAB_ERROR(InvalidGrid);
LICHLAB_ERROR(NonFiniteSample);
LICHLAB_ERROR(PoleSingularity);
LICHLAB_ERROR(StencilOutOfDomain);
LICHLAB_ERROR(SolverDiverged);
LICHLAB_ERROR(SingularOperator);
LICHLAB_ERROR(IncompatibleData);
LICHLAB_ERROR(DegenerateBasis);
LICHLAB_ERROR(CoincidentPoints);
LICHLAB_ERROR(TooCloseToBoundary);
LICHLAB_ERROR(NonPositiveF);
LICHLAB_ERROR(NonPositiveField);
LICHLAB_ERROR(PositivityLost);
LICHLAB_ERROR(NotBracketing);
LICHLAB_ERROR(OuterStalled);
LICHLAB_ERROR(NoCriticalPoints);
LICHLAB_ERROR(DomainTooSmall);
LICHLAB_ERROR(UnknownSuite);

#undef LICHLAB_ERROR

// ---- deterministic reductions ----
//
// Fixed-size chunks accumulated in parallel, chunk partials summed in index
// order. Result is bitwise independent of the number of threads.

constexpr std::size_t kReduceChunk = 2048;

template <class F>
double det_sum(std::size_t n, F&& term) {
  const std::size_t nchunks = (n + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partial(nchunks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < (std::ptrdiff_t)nchunks; ++c) {
    const std::size_t lo = (std::size_t)c * kReduceChunk;
    const std::size_t hi = std::min(n, lo + kReduceChunk);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[c] = s;
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

template <class F>
double det_max(std::size_t n, F&& term) {
  const std::size_t nchunks = (n + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partial(nchunks, -std::numeric_limits<double>::infinity());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < (std::ptrdiff_t)nchunks; ++c) {
    const std::size_t lo = (std::size_t)c * kReduceChunk;
    const std::size_t hi = std::min(n, lo + kReduceChunk);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = lo; i < hi; ++i) m = std::max(m, term(i));
    partial[c] = m;
  }
  double m = -std::numeric_limits<double>::infinity();
  for (double p : partial) m = std::max(m, p);
  return m;
}

/// Golden-section minimization of a unimodal f on [a,b].
template <class F>
std::pair<double, double> golden_min(F&& f, double a, double b, double tol = 1e-14, int max_iter = 400) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < max_iter && (b - a) > tol * (std::abs(a) + std::abs(b) + 1.0); ++it) {
    if (f1 < f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - invphi * (b - a); f1 = f(x1);
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + invphi * (b - a); f2 = f(x2);
    }
  }
  const double xm = 0.5 * (a + b);
  return {xm, f(xm)};
}

}  // namespace lichlab
