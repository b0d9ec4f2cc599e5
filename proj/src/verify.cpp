#include "lichlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lichlab/analysis.hpp"
#include "lichlab/chart.hpp"
#include "lichlab/killing.hpp"
#include "lichlab/lichnerowicz.hpp"

namespace lichlab {

namespace {

const std::vector<std::string> kAllSuites = {"chart", "kernel", "green",  "pohozaev",
                                             "adjoint", "bubble", "floor"};

double urand(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (double)(rng() >> 11) * 0x1.0p-53;
}

void check(std::vector<SuiteCheck>& out, const std::string& suite, const std::string& name,
           double value, double threshold, bool lower_bound = false) {
  SuiteCheck c;
  c.suite = suite;
  c.name = name;
  c.value = value;
  c.threshold = threshold;
  c.lower_bound = lower_bound;
  c.pass = lower_bound ? value >= threshold : value <= threshold;
  out.push_back(c);
}

// smooth non-polynomial chart one-form with hand-derived sphere-side values
Vec3 test_what(const Vec3& x) { return {std::exp(-norm2(x)), 0, 0}; }

Vec3 test_what_veclap_chart(const Vec3& x) {
  // A = Dvec W - 6 U^{-1} (L W) dU for W = (exp(-|x|^2), 0, 0)
  const double s = norm2(x), E = std::exp(-s);
  const double U2 = conf_factor(x) * conf_factor(x);
  return {E * (20.0 / 3.0 - 4 * s - (4.0 / 3.0) * x[0] * x[0] -
               3 * U2 * ((8.0 / 3.0) * x[0] * x[0] + 2 * x[1] * x[1] + 2 * x[2] * x[2])),
          -x[0] * x[1] * E * (4.0 / 3.0 + 2 * U2), -x[0] * x[2] * E * (4.0 / 3.0 + 2 * U2)};
}

Sym3 test_what_cko(const Vec3& x) {
  const double E = std::exp(-norm2(x));
  Sym3 L;
  L.at(0, 0) = -(8.0 / 3.0) * x[0] * E;
  L.at(0, 1) = -2 * x[1] * E;
  L.at(0, 2) = -2 * x[2] * E;
  L.at(1, 1) = (4.0 / 3.0) * x[0] * E;
  L.at(2, 2) = (4.0 / 3.0) * x[0] * E;
  L.at(1, 2) = 0;
  return L;
}

std::vector<SuiteCheck> suite_chart(uint64_t) {
  std::vector<SuiteCheck> out;
  const std::vector<double> hs = {0.4, 0.2, 0.1};
  std::vector<double> r_scalar, r_cko, r_vec;
  for (double h : hs) {
    GridPtr g = make_ball_grid(1.0, h);
    // scalar identity for u == 1: Delta_xi U = (3/4) U^5
    ScalarField v = sample_scalar(g, [](const Vec3& x) { return conf_factor(x); });
    ScalarField s(g, 0.75);
    r_scalar.push_back(chart_identity_residual(ChartIdentity::ScalarLaplacian, v, s));
    // cko identity against the analytic sphere-side tensor
    OneFormField what = sample_one_form(g, test_what);
    SymTensorField T = sample_sym_tensor(g, [](const Vec3& x) {
      return std::pow(conf_factor(x), 4) * test_what_cko(x);
    });
    r_cko.push_back(chart_identity_residual(ChartIdentity::Cko, what, T));
    OneFormField A = sample_one_form(g, test_what_veclap_chart);
    r_vec.push_back(chart_identity_residual(ChartIdentity::VectorLaplacian, what, A));
  }
  auto orders = [&](const std::vector<double>& r, const char* name) {
    double omin = 1e300;
    for (std::size_t k = 0; k + 1 < r.size(); ++k)
      omin = std::min(omin, std::log2(r[k] / r[k + 1]));
    check(out, "chart", std::string(name) + "_order", omin, 1.9, /*lower_bound=*/true);
  };
  orders(r_scalar, "scalar_laplacian");
  orders(r_cko, "cko");
  orders(r_vec, "vector_laplacian");
  // Killing one-forms are exact kernel elements of the discrete cko
  GridPtr g = make_ball_grid(1.0, 0.1);
  CKVParams p;
  p.b = {0.3, -0.2, 0.1};
  p.lambda = 0.5;
  p.omega = {0.1, 0.2, -0.3};
  p.c = {1, 0, 0};
  OneFormField L = sample_one_form(g, [&](const Vec3& x) { return ckv_eval(p, x); });
  SymTensorField zero(g);
  check(out, "chart", "killing_cko_residual",
        chart_identity_residual(ChartIdentity::Cko, L, zero), 10 * 0.1 * 0.1);
  return out;
}

std::vector<SuiteCheck> suite_kernel(uint64_t seed) {
  std::vector<SuiteCheck> out;
  const Sym3 H = kernel_eval({1, 0, 0}, {0, 0, 0});
  check(out, "kernel", "H11_at_e1", std::abs(H(0, 0) - 1.0 / (4 * M_PI)), 1e-15);
  check(out, "kernel", "H22_at_e1", std::abs(H(1, 1) - 7.0 / (32 * M_PI)), 1e-15);
  check(out, "kernel", "H12_at_e1", std::abs(H(0, 1)), 1e-15);
  std::mt19937_64 rng(seed);
  double sym = 0;
  for (int k = 0; k < 20; ++k) {
    Vec3 x{urand(rng, -1, 1), urand(rng, -1, 1), urand(rng, -1, 1)};
    Vec3 y{urand(rng, -1, 1), urand(rng, -1, 1), urand(rng, -1, 1)};
    if (norm(x - y) < 1e-3) continue;
    const Sym3 Hs = kernel_eval(x, y);
    sym = std::max(sym, std::abs(Hs(0, 1) - Hs(1, 0)));
    sym = std::max(sym, std::abs(Hs(0, 2) - Hs(2, 0)));
  }
  check(out, "kernel", "H_symmetry", sym, 1e-15);

  double prev = 1e300, last = 0, maxY = 0;
  bool monotone = true;
  for (double h : {0.2, 0.1}) {
    GridPtr g = make_ball_grid(1.0, h);
    OneFormField Y = sample_one_form(g, [](const Vec3& x) {
      const double m = std::pow(std::max(0.0, 0.25 - norm2(x)) / 0.25, 3);
      return Vec3{m, 0.5 * m, -0.25 * m};
    });
    const OneFormField W = kernel_convolve(Y);
    const OneFormField DW = vec_laplacian(W);
    maxY = det_max(3 * g->size(), [&](std::size_t i) { return std::abs(Y.v[i]); });
    const double res = det_max(g->size(), [&](std::size_t i) -> double {
      if (norm(Y.vec(i)) == 0 || !g->has_full_stencil(i)) return 0.0;
      double m = 0;
      for (int c = 0; c < 3; ++c) m = std::max(m, std::abs(DW.v[3 * i + c] - Y.v[3 * i + c]));
      return m;
    });
    if (res >= prev) monotone = false;
    prev = res;
    last = res;
  }
  check(out, "kernel", "convolution_monotone", monotone ? 1 : 0, 1, /*lower_bound=*/true);
  check(out, "kernel", "convolution_final_residual", last, 0.05 * maxY);
  return out;
}

std::vector<SuiteCheck> suite_green(uint64_t) {
  std::vector<SuiteCheck> out;
  GridPtr g = make_ball_grid(1.0, 0.125);
  KillingBasis basis = make_killing_basis(g, 1.0);
  LinearSolverConfig cfg;
  cfg.tol_rel = 1e-9;
  const Vec3 x{0.25, 0.125, 0.0};
  const GreenForm G = neumann_green_assemble(basis, x, 0, cfg);
  double kmax = 0;
  for (const auto& K : basis.fields) kmax = std::max(kmax, std::abs(basis.inner(K, G.field)));
  check(out, "green", "killing_free", kmax, 1e-8);
  for (int form = 0; form < 2; ++form) {
    const Vec3 c = form == 0 ? Vec3{0.25, 0.125, 0.0} : Vec3{0.0, -0.125, 0.25};
    OneFormField X = sample_one_form(g, [&](const Vec3& y) {
      const double m = std::pow(std::max(0.0, 0.2 - norm2(y - c)) / 0.2, 3);
      return Vec3{m, 0.4 * m, 0.1 * m};
    });
    const auto [lhs, rhs] = green_reproduction(G, basis, X);
    check(out, "green", "reproduction_" + std::to_string(form),
          std::abs(lhs - rhs) / (std::abs(rhs) + 1e-12), 0.1);
  }
  return out;
}

std::vector<SuiteCheck> suite_pohozaev(uint64_t) {
  std::vector<SuiteCheck> out;
  {
    GridPtr g = make_ball_grid(1.5, 0.1);
    ScalarField c(g, 3.7);
    check(out, "pohozaev", "constant", pohozaev_residual(c, 1.0), 1e-10);
    ScalarField x1 = sample_scalar(g, [](const Vec3& x) { return x[0]; });
    check(out, "pohozaev", "linear", pohozaev_residual(x1, 1.0), 10 * 0.1 * 0.1);
  }
  std::vector<double> rb;
  for (double h : {0.125, 0.0625}) {
    GridPtr g = make_ball_grid(1.5, h);
    Bubble b;
    b.mu = 1.0;
    b.f_at_center = 0.75;
    ScalarField v = sample_scalar(g, [&](const Vec3& x) { return bubble_eval(b, x); });
    rb.push_back(pohozaev_residual(v, 1.0));
  }
  check(out, "pohozaev", "bubble_order", std::log2(rb[0] / rb[1]), 1.9, /*lower_bound=*/true);
  return out;
}

std::vector<SuiteCheck> suite_adjoint(uint64_t seed) {
  std::vector<SuiteCheck> out;
  std::mt19937_64 rng(seed);
  GridPtr g = make_ball_grid(1.0, 0.1);
  auto bump = [&](const Vec3& c, const Vec3& amp) {
    return sample_one_form(g, [&](const Vec3& x) {
      const double m = std::pow(std::max(0.0, 0.09 - norm2(x - c)) / 0.09, 3);
      return amp[0] * m * Vec3{1.0, 0.0, 0.0} + amp[1] * m * Vec3{0.0, 1.0, 0.0} +
             amp[2] * m * Vec3{0.0, 0.0, 1.0};
    });
  };
  double worst = 0;
  for (int k = 0; k < 3; ++k) {
    const Vec3 c1{urand(rng, -0.3, 0.3), urand(rng, -0.3, 0.3), urand(rng, -0.3, 0.3)};
    const Vec3 c2{urand(rng, -0.3, 0.3), urand(rng, -0.3, 0.3), urand(rng, -0.3, 0.3)};
    const Vec3 a1{urand(rng, -1, 1), urand(rng, -1, 1), urand(rng, -1, 1)};
    const Vec3 a2{urand(rng, -1, 1), urand(rng, -1, 1), urand(rng, -1, 1)};
    worst = std::max(worst, adjointness_residual(bump(c1, a1), bump(c2, a2)));
  }
  check(out, "adjoint", "summation_by_parts", worst, 10 * 0.1);
  const OneFormField W = bump({0.1, 0, 0}, {1, -0.5, 0.25});
  check(out, "adjoint", "self_pairing", adjointness_residual(W, W), 10 * 0.1);
  return out;
}

std::vector<SuiteCheck> suite_bubble(uint64_t) {
  std::vector<SuiteCheck> out;
  for (double mu : {1.0, 0.5}) {
    Bubble b;
    b.mu = mu;
    b.f_at_center = 0.75;
    check(out, "bubble", "center_value_mu" + std::to_string(mu),
          std::abs(bubble_eval(b, {0, 0, 0}) - std::sqrt(2.0 / mu)), 1e-14);
    std::vector<double> res;
    for (double h : {0.2, 0.1, 0.05}) {
      GridPtr g = make_ball_grid(1.0, h);
      ScalarField v = sample_scalar(g, [&](const Vec3& x) { return bubble_eval(b, x); });
      const ScalarField lap = laplacian(v);
      res.push_back(det_max(g->size(), [&](std::size_t i) -> double {
        if (!g->is_interior(i)) return 0.0;
        return std::abs(lap(i) - b.f_at_center * std::pow(v(i), 5));
      }));
    }
    const double order = std::log2(res[0] / res[2]) / 2.0;
    check(out, "bubble", "residual_order_mu" + std::to_string(mu), std::abs(order - 2.0), 0.15);
  }
  return out;
}

std::vector<SuiteCheck> suite_floor(uint64_t seed) {
  std::vector<SuiteCheck> out;
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    const double f = urand(rng, 0.1, 10), b = urand(rng, 0.1, 10);
    const auto [tmin, vmin] = golden_min(
        [&](double t) { return f * std::pow(t, 5) + b * std::pow(t, -7); }, 1e-2, 1e2);
    worst = std::max(worst, std::abs(pointwise_floor(f, b) - vmin) / (1 + std::abs(vmin)));
  }
  check(out, "floor", "oracle_match_100", worst, 1e-12);
  check(out, "floor", "value_f1_b1", std::abs(pointwise_floor(1, 1) - 1.97228), 1e-5);
  check(out, "floor", "b_zero", pointwise_floor(2.0, 0.0), 0.0);
  return out;
}

}  // namespace

std::vector<std::string> verify_suite_select(const std::vector<std::string>& names) {
  if (names.empty()) return kAllSuites;
  std::vector<std::string> plan;
  for (const auto& canonical : kAllSuites)
    for (const auto& n : names)
      if (n == canonical) {
        if (std::find(plan.begin(), plan.end(), n) == plan.end()) plan.push_back(n);
        break;
      }
  for (const auto& n : names)
    if (std::find(kAllSuites.begin(), kAllSuites.end(), n) == kAllSuites.end())
      throw UnknownSuite("no verification suite named '" + n + "'");
  return plan;
}

std::vector<SuiteCheck> run_verify_suite(const std::string& name, uint64_t seed) {
  if (name == "chart") return suite_chart(seed);
  if (name == "kernel") return suite_kernel(seed);
  if (name == "green") return suite_green(seed);
  if (name == "pohozaev") return suite_pohozaev(seed);
  if (name == "adjoint") return suite_adjoint(seed);
  if (name == "bubble") return suite_bubble(seed);
  if (name == "floor") return suite_floor(seed);
  throw UnknownSuite("no verification suite named '" + name + "'");
}

}  // namespace lichlab
