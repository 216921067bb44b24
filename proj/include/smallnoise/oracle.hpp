#pragma once

#include <string>
#include <vector>

namespace smallnoise {

struct OracleCheck {
  std::string name;
  double computed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  /// Relative error, or for inequality checks the signed slack.
  double error = 0.0;
  bool passed = false;
};

/// CIR at alpha = beta = x0 = T = 1: Phi, S_k, D_k, I_b, I_Delta, J_Delta and I_sigma
/// against their closed forms (relative tolerance 1e-6), plus J_Delta <= I_Delta
/// for Delta in {0.01, 0.02, 0.05, 0.1, 0.2, 0.25, 0.5}.
[[nodiscard]] std::vector<OracleCheck> cir_oracle_suite();

/// OU at alpha = -0.5, beta = 0.8, x0 = 2, T = 1: Phi, S_k, I_b and I_sigma.
[[nodiscard]] std::vector<OracleCheck> ou_oracle_suite();

}  // namespace smallnoise
