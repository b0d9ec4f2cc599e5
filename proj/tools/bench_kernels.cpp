// Timing comparison of the OpenMP kernels against the serial reference.

#include <chrono>
#include <cstdio>
#include <random>

#include <omp.h>

#include "lichlab/operators.hpp"
#include "lichlab/reference.hpp"

using namespace lichlab;

namespace {

template <class F>
double time_ms(F&& fn, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  double h = 0.05;
  if (argc > 1) h = std::atof(argv[1]);
  GridPtr g = make_ball_grid(2.0, h);
  std::printf("grid R=2 h=%g: %zu nodes, %d OpenMP threads\n", h, g->size(), omp_get_max_threads());

  std::mt19937_64 rng(7);
  ScalarField s(g);
  OneFormField w(g);
  for (auto& v : s.v) v = (double)(rng() >> 11) * 0x1.0p-53;
  for (auto& v : w.v) v = (double)(rng() >> 11) * 0x1.0p-53;

  struct Row {
    const char* name;
    double serial, parallel;
  };
  std::vector<Row> rows;

  rows.push_back({"laplacian", time_ms([&] { ref::laplacian(s); }, 5), time_ms([&] { laplacian(s); }, 5)});
  rows.push_back({"cko", time_ms([&] { ref::cko(w); }, 5), time_ms([&] { cko(w); }, 5)});
  rows.push_back({"vec_laplacian", time_ms([&] { ref::vec_laplacian(w); }, 5),
                  time_ms([&] { vec_laplacian(w); }, 5)});
  rows.push_back({"dot", time_ms([&] { ref::dot(w.v, w.v); }, 20),
                  time_ms([&] { det_sum(w.v.size(), [&](std::size_t i) { return w.v[i] * w.v[i]; }); }, 20)});

  std::printf("%-16s %12s %12s %9s\n", "kernel", "serial [ms]", "openmp [ms]", "speedup");
  for (const auto& r : rows)
    std::printf("%-16s %12.3f %12.3f %8.2fx\n", r.name, r.serial, r.parallel, r.serial / r.parallel);

  // the parallel kernels must agree with the reference bitwise
  const ScalarField a = laplacian(s), b = ref::laplacian(s);
  double diff = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) diff = std::max(diff, std::abs(a.v[i] - b.v[i]));
  std::printf("laplacian parallel-vs-serial max diff: %.3e\n", diff);
  return diff == 0.0 ? 0 : 1;
}
