#pragma once

// Finite-difference verification of the analytic loss gradients over random
// batches, for every loss, direction and temperature.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srcl/losses.hpp"

namespace srcl {

struct GradcheckOptions {
  /// Random instances per (loss, temperature) cell; directions cycle
  /// through a->b, b->a and the symmetric sum.
  std::size_t instances = 100;
  std::vector<double> temperatures = {0.05, 0.1, 0.5, 1.0};
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
  /// Test hook: perturbs one analytic gradient coordinate so the check
  /// must fail.
  bool corrupt_gradient = false;
};

struct GradcheckCell {
  std::string loss;  // "infonce" or "srcl"
  double temperature = 0.0;
  std::size_t instances = 0;
  double max_rel_error = 0.0;
  /// Shape and direction of the instance with the largest error.
  std::size_t worst_n = 0;
  std::size_t worst_d = 0;
  Direction worst_direction = Direction::a_to_b;
  bool passed = true;
};

nlohmann::json to_json(const GradcheckCell& cell);

struct GradcheckReport {
  std::vector<GradcheckCell> cells;
  double max_rel_error = 0.0;
  bool passed() const;
};

/// Batches have N in {4, 8, 16} and D in {8, 32}; SRCL weights come from
/// random positive similarities through the regulator's weight rule.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace srcl
