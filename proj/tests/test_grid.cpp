#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <random>

#include "lichlab/grid.hpp"
#include "oracles.hpp"

using namespace lichlab;

namespace {

// brute-force lattice enumeration, independent of BallGrid internals
std::vector<std::array<int, 3>> enumerate_ball(double R, double h) {
  std::vector<std::array<int, 3>> out;
  const int n = (int)std::floor(R / h) + 2;
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      for (int k = -n; k <= n; ++k)
        if ((i * i + j * j + k * k) * h * h < R * R) out.push_back({i, j, k});
  return out;
}

}  // namespace

TEST_CASE("ball grid matches brute-force enumeration") {
  for (auto [R, h] : {std::pair{1.0, 0.5}, std::pair{2.0, 0.25}}) {
    GridPtr g = make_ball_grid(R, h);
    const auto oracle_nodes = enumerate_ball(R, h);
    REQUIRE(g->size() == oracle_nodes.size());
    // interior nodes are exactly those whose 6 axis neighbors stay inside
    for (std::size_t a = 0; a < g->size(); ++a) {
      const auto& l = g->lattice(a);
      bool all_in = true;
      for (int d = 0; d < 3 && all_in; ++d)
        for (int s = -1; s <= 1; s += 2) {
          std::array<int, 3> nb = l;
          nb[d] += s;
          if ((nb[0] * nb[0] + nb[1] * nb[1] + nb[2] * nb[2]) * h * h >= R * R) all_in = false;
        }
      CHECK(g->is_interior(a) == all_in);
      if (g->is_interior(a))
        for (int d = 0; d < 3; ++d) {
          CHECK(g->neighbor(a, d, +1) >= 0);
          CHECK(g->neighbor(a, d, -1) >= 0);
        }
    }
  }
}

TEST_CASE("grid preconditions") {
  CHECK_THROWS_AS(make_ball_grid(1.0, 2.0), InvalidGrid);
  CHECK_THROWS_AS(make_ball_grid(1.0, 0.0), InvalidGrid);
  CHECK_THROWS_AS(make_ball_grid(1.0, -0.1), InvalidGrid);
}

TEST_CASE("deterministic node ordering") {
  GridPtr a = make_ball_grid(1.3, 0.17), b = make_ball_grid(1.3, 0.17);
  REQUIRE(a->size() == b->size());
  for (std::size_t i = 0; i < a->size(); ++i) CHECK(a->lattice(i) == b->lattice(i));
  // lexicographic by integer lattice index
  for (std::size_t i = 0; i + 1 < a->size(); ++i) CHECK(a->lattice(i) < a->lattice(i + 1));
}

TEST_CASE("boundary normals and surface weights") {
  GridPtr g = make_ball_grid(1.0, 0.1);
  double area = 0;
  for (std::size_t b : g->boundary_nodes()) {
    CHECK(norm(g->boundary_normal(b)) == doctest::Approx(1.0).epsilon(1e-12));
    area += g->surface_weight(b);
  }
  // staircase faces projected on the true normal approximate the sphere area
  CHECK(area == doctest::Approx(4 * M_PI).epsilon(0.05));
}

TEST_CASE("sample_field") {
  GridPtr g = make_ball_grid(1.0, 0.25);
  ScalarField one = sample_scalar(g, [](const Vec3&) { return 1.0; });
  for (double v : one.v) CHECK(v == 1.0);

  ScalarField u = sample_scalar(g, [](const Vec3& x) { return std::sqrt(2.0 / (1.0 + norm2(x))); });
  const int origin = g->locate({0, 0, 0});
  REQUIRE(origin >= 0);
  CHECK(u.v[origin] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  CHECK_THROWS_AS(sample_scalar(g, [&](const Vec3& x) { return 1.0 / norm(x); }), NonFiniteSample);
}

TEST_CASE("field_norm basics and linear field") {
  GridPtr g = make_ball_grid(1.0, 0.1);
  ScalarField c(g, -2.5);
  CHECK(field_norm(c, NormOrder::C0) == 2.5);
  CHECK(field_norm(c, NormOrder::C2) == 2.5);

  ScalarField lin = sample_scalar(g, [](const Vec3& x) { return x[0]; });
  double maxx = 0;
  for (std::size_t i = 0; i < g->size(); ++i) maxx = std::max(maxx, std::abs(g->node(i)[0]));
  CHECK(field_norm(lin, NormOrder::C1) == doctest::Approx(1.0 + maxx).epsilon(1e-12));
}

TEST_CASE("field_norm is a norm") {
  GridPtr g = make_ball_grid(1.0, 0.2);
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    ScalarField f(g), q(g);
    for (auto& v : f.v) v = oracle::urand(rng, -1, 1);
    for (auto& v : q.v) v = oracle::urand(rng, -1, 1);
    const double s = oracle::urand(rng, -3, 3);
    for (NormOrder ord : {NormOrder::C0, NormOrder::C1, NormOrder::C2}) {
      ScalarField sf = f, fp = f;
      for (auto& v : sf.v) v *= s;
      for (std::size_t i = 0; i < fp.v.size(); ++i) fp.v[i] += q.v[i];
      CHECK(field_norm(sf, ord) == doctest::Approx(std::abs(s) * field_norm(f, ord)).epsilon(1e-12));
      CHECK(field_norm(fp, ord) <= field_norm(f, ord) + field_norm(q, ord) + 1e-12);
    }
  }
}

TEST_CASE("C0 norm of a sampled closed form is the max over nodes") {
  GridPtr g = make_ball_grid(1.0, 0.2);
  auto fn = [](const Vec3& x) { return std::sin(3 * x[0]) * std::exp(x[1]) - 0.3 * x[2]; };
  ScalarField f = sample_scalar(g, fn);
  double m = 0;
  for (std::size_t i = 0; i < g->size(); ++i) m = std::max(m, std::abs(fn(g->node(i))));
  CHECK(field_norm(f, NormOrder::C0) == m);
}

TEST_CASE("binary dump round trip and CSV export") {
  GridPtr g = make_ball_grid(1.0, 0.25);
  std::mt19937_64 rng(3);
  OneFormField w(g);
  for (auto& v : w.v) v = oracle::urand(rng, -5, 5);
  const std::string path = "/tmp/lichlab_test_field.elfg";
  dump_field(w, path);
  const auto hdr = peek_field(path);
  CHECK(hdr[0] == 3);
  CHECK(hdr[1] == (double)g->size());
  CHECK(hdr[2] == 1.0);
  OneFormField r{load_field<3>(path)};
  REQUIRE(r.v.size() == w.v.size());
  for (std::size_t i = 0; i < w.v.size(); ++i) CHECK(r.v[i] == w.v[i]);

  export_csv(w, "/tmp/lichlab_test_field.csv");
  std::FILE* fp = std::fopen("/tmp/lichlab_test_field.csv", "r");
  REQUIRE(fp != nullptr);
  char line[256];
  REQUIRE(std::fgets(line, sizeof line, fp) != nullptr);
  CHECK(std::string(line) == "x,y,z,v0,v1,v2\n");
  std::fclose(fp);
}
