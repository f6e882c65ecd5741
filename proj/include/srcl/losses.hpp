#pragma once

// InfoNCE and similarity-regulated (weighted-negative) contrastive losses
// over cosine similarities, with analytic gradients with respect to the raw
// (unnormalised) embeddings.

#include <cstddef>
#include <string_view>
#include <vector>

#include "srcl/numerics.hpp"
#include "srcl/weights.hpp"

namespace srcl {

enum class Direction { a_to_b, b_to_a, symmetric_sum };

std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view s);

struct LossConfig {
  double temperature = 0.1;
  Direction direction = Direction::symmetric_sum;

  void validate() const;
};

struct LossOutput {
  double value = 0.0;
  Mat64 grad_a;
  Mat64 grad_b;
  /// Per-anchor terms; for symmetric_sum entry i is the sum of the a->b and
  /// b->a terms of pair i, so value is always their mean.
  std::vector<double> per_anchor_values;
  /// Anchors left without any negative after masking (contribute zero).
  std::size_t skipped_anchors = 0;
};

/// -log softmax of the positive over cosine logits s_ij / tau, averaged over
/// anchors, in the direction(s) given by cfg.
LossOutput info_nce(const Mat64& emb_a, const Mat64& emb_b, const LossConfig& cfg);

/// Weighted-negative loss: the denominator of anchor i is
/// exp(s_ii / tau) + sum_{j != i} w_ij exp(s_ij / tau). Weights enter as
/// logit offsets log w_ij and are constants for differentiation. The
/// weights used for a->b rows are taken from `weights`; for b->a rows the
/// same matrix is read with anchors b_i (row i). Use srcl_symmetric for
/// distinct per-direction weights.
LossOutput srcl(const Mat64& emb_a, const Mat64& emb_b, const WeightMatrix& weights,
                const LossConfig& cfg);

/// Sum of the a->b loss with weights_ab and the b->a loss with weights_ba.
LossOutput srcl_symmetric(const Mat64& emb_a, const Mat64& emb_b, const WeightMatrix& weights_ab,
                          const WeightMatrix& weights_ba, const LossConfig& cfg);

/// Like srcl_symmetric but honouring WeightMatrix::active: removed negatives
/// leave the denominator entirely; anchors with no surviving negative are
/// skipped and counted. Survivors must be positive with row mean 1.
LossOutput srcl_masked(const Mat64& emb_a, const Mat64& emb_b, const WeightMatrix& weights_ab,
                       const WeightMatrix& weights_ba, const LossConfig& cfg);

}  // namespace srcl
