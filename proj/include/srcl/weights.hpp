#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "srcl/numerics.hpp"

namespace srcl {

/// Per-anchor regulation weights over in-batch negatives. Row i holds the
/// weights of anchor i; the diagonal (the positive) is unused. `active`
/// optionally removes negatives altogether (empty means every off-diagonal
/// slot takes part). Valid matrices have positive active entries with
/// per-row mean 1; this type does not enforce that so that checks can
/// report violations.
struct WeightMatrix {
  Mat64 w;
  std::vector<std::uint8_t> active;

  static WeightMatrix uniform(std::size_t n);

  std::size_t size() const { return w.rows(); }
  bool is_active(std::size_t i, std::size_t j) const {
    if (i == j) return false;
    return active.empty() || active[i * w.cols() + j] != 0;
  }
  std::size_t active_count(std::size_t i) const;
  /// Mean of the active entries of row i (0 when none survive).
  double row_mean(std::size_t i) const;
};

}  // namespace srcl
