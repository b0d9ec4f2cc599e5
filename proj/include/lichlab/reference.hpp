#pragma once

#include "lichlab/grid.hpp"

namespace lichlab::ref {

// Serial reference implementations of the hot kernels. Plain loops, no
// OpenMP, kept for testing the parallel versions and for the benchmark.

ScalarField laplacian(const ScalarField& f);
SymTensorField cko(const OneFormField& w);
OneFormField vec_laplacian(const OneFormField& w);
double dot(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace lichlab::ref
