#pragma once

// Contrastive regulation weights: teacher/student similarity blending under
// an alpha schedule, inverse-similarity weights normalised to mean one per
// anchor, and the two weight conditions (negative covariance with the
// density ratio, unit mean over negatives).

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "srcl/model.hpp"
#include "srcl/numerics.hpp"
#include "srcl/weights.hpp"

namespace srcl {

/// Raised when a weight matrix breaks Condition 1 or Condition 2.
class ConditionViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Piecewise-linear alpha(progress) over knots (progress in [0, 1], alpha).
/// Standard schedules start at 1, end at 0 and never increase; `pinned`
/// holds a constant and exists for ablations.
class AlphaSchedule {
 public:
  static AlphaSchedule linear();
  static AlphaSchedule piecewise(std::vector<std::pair<double, double>> knots);
  static AlphaSchedule pinned(double alpha);

  /// "linear", "pinned:<a>" or "piecewise:<t>:<a>,<t>:<a>,..."
  static AlphaSchedule parse(const std::string& text);
  std::string to_string() const;

  double at_progress(double progress) const;
  bool is_pinned() const { return pinned_; }
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }

  bool operator==(const AlphaSchedule&) const = default;

 private:
  AlphaSchedule(std::vector<std::pair<double, double>> knots, bool pinned);

  std::vector<std::pair<double, double>> knots_;
  bool pinned_ = false;
};

/// alpha at `step` of `total_steps`; step must lie in [0, total_steps].
double alpha_at(const AlphaSchedule& schedule, std::size_t step, std::size_t total_steps);

struct RegulatorConfig {
  double delta = 1.0;
  AlphaSchedule alpha_schedule = AlphaSchedule::linear();
  /// Lower clamp on blended similarities before inversion.
  double weight_floor = 1e-6;
  /// Divide cosine by the loss temperature inside exp() when forming
  /// similarities for the weights.
  bool use_temperature_in_weights = false;
  /// Multiplies the cosine inside exp() (after any temperature division).
  /// Values above 1 sharpen the weights.
  double similarity_scale = 1.0;

  void validate() const;
  bool operator==(const RegulatorConfig&) const = default;
};

/// Frozen encoder pair used as the early similarity source.
class TeacherHandle {
 public:
  explicit TeacherHandle(EncoderPair frozen)
      : model_(std::make_shared<const EncoderPair>(std::move(frozen))) {}

  const EncoderPair& model() const { return *model_; }
  std::uint64_t checksum() const { return srcl::checksum(*model_); }

 private:
  std::shared_ptr<const EncoderPair> model_;
};

/// exp(cos / scale) elementwise; scale is 1 unless temperature is used.
Mat64 exp_similarity(const Mat64& cosines, double scale = 1.0);

/// alpha * teacher + (1 - alpha) * student, elementwise.
Mat64 blended_similarity(const Mat64& teacher_sims, const Mat64& student_sims, double alpha);

/// Row i over negatives j != i: raw = delta / max(s_ij, floor),
/// w_ij = raw_ij / mean_k raw_ik. Requires square s with positive entries.
WeightMatrix weights_from_similarity(const Mat64& s, double delta, double floor);

/// The same rule for a single anchor given only its negatives' similarities.
std::vector<double> weights_from_similarity_row(std::span<const double> negatives, double delta, double floor);

/// Population covariance (1/K) sum (w - mean w)(f - mean f).
double check_condition1(std::span<const double> w_row, std::span<const double> f_row);

/// Per-row Condition 1 covariance of a weight matrix against the
/// similarities it was built from (active negatives only).
std::vector<double> condition1_by_row(const WeightMatrix& weights, const Mat64& s);

/// max_i |mean_j w_ij - 1| over active negatives.
double check_condition2(const WeightMatrix& weights);

/// Removes negatives with weight below `threshold` and renormalises the
/// survivors of each row to mean 1. Rows may end up empty.
WeightMatrix mask_below(const WeightMatrix& weights, double threshold);

/// Weights for both directions from teacher and student cosine matrices
/// (rows: a anchors, columns: b candidates).
struct RegulatedWeights {
  WeightMatrix a_to_b;
  WeightMatrix b_to_a;
  Mat64 blended;  // a-anchored blended similarities
};

RegulatedWeights regulate(const Mat64& teacher_cos, const Mat64& student_cos, double alpha,
                          const RegulatorConfig& cfg, double temperature);

}  // namespace srcl
