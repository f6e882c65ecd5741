#pragma once

// Verification grids over the discrete oracles. Every cell yields one JSON
// record carrying a "passed" flag; a grid passes when all its cells do.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srcl/config.hpp"

namespace srcl {

struct SuiteResult {
  std::vector<nlohmann::json> records;
  /// Labels of the cells that failed.
  std::vector<std::string> failures;

  bool passed() const { return failures.empty(); }
  void append(SuiteResult other);
};

/// Classic bound on every (BSC, N) cell with marginal negatives, plus the
/// deterministic k-symbol joint at N = k with distinct in-batch symbols,
/// where the bound is tight and must hold with equality to 1e-9.
SuiteResult run_eq2_grid(const VerifyConfig& cfg);

/// Dependent-negative bound on the BSC over (eta, N), plus the deterministic
/// joint at the configured dependence rate. Cells failing the premise are
/// reported inapplicable; applicable cells must satisfy the bound.
SuiteResult run_eq3_grid(const VerifyConfig& cfg);

/// Jensen step on the BSC grid and deterministic joints, including the
/// constant-ratio constructions (independent joint, fully dependent
/// deterministic negatives) where equality is required.
SuiteResult run_jensen_grid(const VerifyConfig& cfg);

/// Controllability of the negative-process expectation on two- and
/// four-symbol joints for every weight rule. The sign-flipped rule passes
/// only when the condition guard rejects it; the inverse negative-ratio rule
/// must reach a residual below kControllabilityResidualTol.
SuiteResult run_controllability_grid(const VerifyConfig& cfg);

inline constexpr double kControllabilityResidualTol = 0.05;

/// All four grids in order.
SuiteResult run_bound_suite(const VerifyConfig& cfg);

}  // namespace srcl
