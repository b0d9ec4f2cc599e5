#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "lichlab/chart.hpp"
#include "lichlab/killing.hpp"
#include "oracles.hpp"

using namespace lichlab;
using oracle::Jet;

namespace {

Vec4 random_unit4(std::mt19937_64& rng) {
  Vec4 p;
  double n = 0;
  do {
    for (auto& c : p) c = oracle::urand(rng, -1, 1);
    n = norm4(p);
  } while (n < 1e-3);
  for (auto& c : p) c /= n;
  return p;
}

// conformal factor as a jet expression
Jet conf_jet(const std::array<Jet, 3>& x) {
  return oracle::sqrt(2.0 * oracle::inv(1.0 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
}

}  // namespace

TEST_CASE("conf_factor values") {
  CHECK(conf_factor({0, 0, 0}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(conf_factor({1, 0, 0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(conf_factor({3, 0, 0}) == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-15));
}

TEST_CASE("stereographic round trips and pole handling") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const ChartPole P(random_unit4(rng));
    CHECK(norm(P.forward(P.P())) <= 1e-12);
    for (int k = 0; k < 10; ++k) {
      const Vec3 x{oracle::urand(rng, -3, 3), oracle::urand(rng, -3, 3), oracle::urand(rng, -3, 3)};
      const Vec3 back = P.forward(P.inverse(x));
      CHECK(norm(back - x) <= 1e-12 * (1 + norm(x)));
    }
    const Vec4 minusP{-P.P()[0], -P.P()[1], -P.P()[2], -P.P()[3]};
    CHECK_THROWS_AS(P.forward(minusP), PoleSingularity);
  }
}

TEST_CASE("pulled-back metric is U^4 times Euclidean (finite-difference Jacobians)") {
  std::mt19937_64 rng(17);
  const ChartPole P(random_unit4(rng));
  for (int rep = 0; rep < 5; ++rep) {
    const Vec3 x{oracle::urand(rng, -2, 2), oracle::urand(rng, -2, 2), oracle::urand(rng, -2, 2)};
    const double eps = 1e-6;
    std::array<Vec4, 3> J;
    for (int d = 0; d < 3; ++d) {
      Vec3 xp = x, xm = x;
      xp[d] += eps;
      xm[d] -= eps;
      const Vec4 yp = P.inverse(xp), ym = P.inverse(xm);
      for (int c = 0; c < 4; ++c) J[d][c] = (yp[c] - ym[c]) / (2 * eps);
    }
    const double U4 = std::pow(conf_factor(x), 4);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        CHECK(dot4(J[a], J[b]) == doctest::Approx(U4 * (a == b ? 1.0 : 0.0)).epsilon(1e-8));
    // the analytic Jacobian matches the finite-difference one
    const auto Ja = P.inverse_jacobian(x);
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < 4; ++c) CHECK(std::abs(Ja[a][c] - J[a][c]) <= 1e-8);
  }
}

TEST_CASE("pull_back of scalars and the conformal weight") {
  GridPtr g = make_ball_grid(1.0, 0.25);
  const ChartPole P({0, 0, 0, 1});
  ScalarField one = P.pull_back_scalar(g, [](const Vec4&) { return 1.0; });
  for (double v : one.v) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t i = 0; i < g->size(); ++i)
    CHECK(one.v[i] * conf_factor(g->node(i)) ==
          doctest::Approx(conf_factor(g->node(i))).epsilon(1e-14));
}

TEST_CASE("sphere Killing form pulls back to the flat family") {
  std::mt19937_64 rng(23);
  const ChartPole P(random_unit4(rng));
  GridPtr g = make_ball_grid(1.0, 0.25);
  CKVParams p;
  p.lambda = 0.4;
  p.b = {0.2, -0.1, 0.3};
  p.c = {1.0, 0.5, -0.2};
  p.omega = {0.3, 0.1, -0.2};
  // Z = pi_P^*(U^4 L) evaluated through the forward Jacobian
  auto Z = [&](const Vec4& y) -> Vec4 {
    const Vec3 x = P.forward(y);
    const Vec3 omega_chart = std::pow(conf_factor(x), 4) * ckv_eval(p, x);
    const auto Jf = P.forward_jacobian(y);
    Vec4 out{0, 0, 0, 0};
    for (int a = 0; a < 4; ++a)
      for (int i = 0; i < 3; ++i) out[a] += omega_chart[i] * Jf[i][a];
    return out;
  };
  OneFormField back = P.pull_back_one_form(g, Z);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const Vec3 L = ckv_eval(p, g->node(i));
    const double U4 = std::pow(conf_factor(g->node(i)), 4);
    const Vec3 got = (1.0 / U4) * back.vec(i);
    CHECK(norm(got - L) <= 1e-10 * (1 + norm(L)));
  }
}

TEST_CASE("chart identities converge at second order against the jet oracle") {
  auto w_scalar = [](const std::array<Jet, 3>& x) {
    return 1.0 + 0.3 * oracle::exp(0.0 - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])) *
                     (1.0 + x[0] * x[1]) + 0.1 * oracle::sin(x[2]);
  };
  auto w_vec = [](const std::array<Jet, 3>& x) -> std::array<Jet, 3> {
    const Jet E = oracle::exp(0.0 - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
    return {E * (1.0 + 0.2 * x[1]), 0.5 * E * x[0], 0.3 * oracle::cos(x[1]) - 0.1 * x[2] * E};
  };

  std::vector<double> r1, r2, r3;
  for (double h : {0.2, 0.1, 0.05}) {
    GridPtr g = make_ball_grid(1.0, h);

    // scalar: v = w U sampled, sphere side s = (Delta_h u + 3/4 u)[P]
    ScalarField v(g), s(g);
    for (std::size_t i = 0; i < g->size(); ++i) {
      const Vec3 x = g->node(i);
      const auto xj = oracle::vars(x);
      const Jet wj = w_scalar(xj);
      const Jet Uj = conf_jet(xj);
      const Jet prod = wj * Uj;
      v(i) = prod.v;
      const double lap_w = -(wj.H[0][0] + wj.H[1][1] + wj.H[2][2]);
      double drift = 0;
      for (int d = 0; d < 3; ++d) drift += Uj.g[d] * wj.g[d];
      const double U = Uj.v;
      const double sphere_lap = (lap_w - 2.0 * drift / U) / std::pow(U, 4);
      s(i) = sphere_lap + 0.75 * wj.v;
    }
    r1.push_back(chart_identity_residual(ChartIdentity::ScalarLaplacian, v, s));

    OneFormField what(g);
    SymTensorField T(g);
    OneFormField A(g);
    for (std::size_t i = 0; i < g->size(); ++i) {
      const Vec3 x = g->node(i);
      const auto Wj = w_vec(oracle::vars(x));
      what.set(i, {Wj[0].v, Wj[1].v, Wj[2].v});
      const Sym3 L = oracle::cko_exact(w_vec, x);
      T.set(i, std::pow(conf_factor(x), 4) * L);
      const Vec3 D = oracle::vec_laplacian_exact(w_vec, x);
      const Vec3 dU = conf_factor_grad(x);
      const Vec3 LdU = L.apply(dU);
      Vec3 a;
      for (int c = 0; c < 3; ++c) a[c] = D[c] - 6.0 / conf_factor(x) * LdU[c];
      A.set(i, a);
    }
    r2.push_back(chart_identity_residual(ChartIdentity::Cko, what, T));
    r3.push_back(chart_identity_residual(ChartIdentity::VectorLaplacian, what, A));
  }
  for (auto* r : {&r1, &r2, &r3})
    for (std::size_t k = 0; k + 1 < r->size(); ++k) CHECK(oracle::order2((*r)[k], (*r)[k + 1]) >= 1.9);
}

TEST_CASE("Killing chart form is a discrete cko kernel element") {
  GridPtr g = make_ball_grid(1.0, 0.1);
  CKVParams p;
  p.b = {0.3, -0.2, 0.1};
  p.lambda = 0.5;
  OneFormField L = sample_one_form(g, [&](const Vec3& x) { return ckv_eval(p, x); });
  SymTensorField zero(g);
  CHECK(chart_identity_residual(ChartIdentity::Cko, L, zero) <= 10 * 0.1 * 0.1);
}
