#pragma once

#include <string>
#include <vector>

#include "lichlab/core.hpp"

namespace lichlab {

struct SuiteCheck {
  std::string suite, name;
  double value = 0, threshold = 0;
  bool pass = false;        // value <= threshold unless flipped
  bool lower_bound = false; // pass means value >= threshold
};

/// Validates and orders the requested suites; empty input selects the full
/// default plan. Unknown names are rejected.
std::vector<std::string> verify_suite_select(const std::vector<std::string>& names);

std::vector<SuiteCheck> run_verify_suite(const std::string& name, uint64_t seed);

}  // namespace lichlab
