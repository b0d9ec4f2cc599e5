#pragma once

#include <optional>

#include "lichlab/analysis.hpp"
#include "lichlab/expr.hpp"

namespace lichlab {

struct ConfigParseError : std::runtime_error {
  int line = 0, col = 0;
  ConfigParseError(const std::string& m, int l, int c)
      : std::runtime_error("config:" + std::to_string(l) + ":" + std::to_string(c) + ": " + m),
        line(l), col(c) {}
};

struct StabilitySpec {
  std::vector<double> deltas;
  std::string V_src, dV_src;   // expressions over x1 (= psi) and the constant `delta`
};

/// Parsed problem definition file. Sections: [grid]{R_trunc,h}, [pole]{P},
/// [data]{tau,psi,pi,U}, [potential]{V,dV}, [solver]{strategy,tol,max_outer},
/// optional [stability]{deltas,V,dV}.
struct ProblemConfig {
  double R_trunc = 2.0, h = 0.1;
  Vec4 pole{0, 0, 0, 1};
  std::string tau_src = "0", psi_src = "0", pi_src = "0";  // expression or "file PATH"
  std::string U_kind = "zero";                             // zero | const | file
  std::array<double, 6> U_const{};
  std::string U_file;
  std::string V_src = "1", dV_src = "0";
  std::string strategy = "newton";
  double tol = 1e-8;
  int max_outer = 30;
  std::optional<StabilitySpec> stability;

  /// Whitespace-insensitive canonical serialization; basis of the hash.
  std::string canonical() const;
  uint64_t hash() const;
};

ProblemConfig parse_problem_config(const std::string& text);
ProblemConfig load_problem_config(const std::string& path);

ProblemInputs make_inputs(const ProblemConfig& cfg);
std::vector<PotentialPerturbation> make_perturbations(const ProblemConfig& cfg);

uint64_t fnv1a(const std::string& bytes);

void write_stability_csv(const std::vector<StabilityRow>& rows, const std::string& path);
void write_stability_plot_csv(const std::vector<StabilityRow>& rows, const std::string& path);

}  // namespace lichlab
