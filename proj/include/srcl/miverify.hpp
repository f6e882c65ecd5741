#pragma once

// Exact mutual-information oracles on discrete worlds and numerical checks of
// the InfoNCE bounds: the classic bound with marginal negatives, the general
// bound with dependent negatives, the Jensen step relating them, and the
// controllability identity for weighted negatives.
//
// Throughout, x is the anchor symbol, y the candidate symbol, and the
// scoring function is the oracle density ratio r(x, y) = p(y | x) / p(y).
// Negatives for anchor x follow q(y | x) = eta p(y | x) + (1 - eta) p(y).

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "srcl/numerics.hpp"
#include "srcl/synth.hpp"

namespace srcl {

/// Sum over cells with p(x, y) > 0 of p(x, y) log[p(x, y) / (p(x) p(y))], in nats.
double exact_mi(const DiscreteJoint& joint);

class DensityRatioOracle {
 public:
  explicit DensityRatioOracle(DiscreteJoint joint);

  const DiscreteJoint& joint() const { return joint_; }
  double ratio(std::size_t x, std::size_t y) const { return ratio_(x, y); }
  const Mat64& table() const { return ratio_; }
  /// max_x |sum_y p(y) r(x, y) - 1|.
  double normalization_error() const;
  /// Density ratio of the negative process, q(y | x) / p(y) = eta r + 1 - eta.
  double negative_ratio(std::size_t x, std::size_t y, double eta) const;

 private:
  DiscreteJoint joint_;
  Mat64 ratio_;
};

/// Expected pointwise log density ratio of the negative process:
/// sum_x p(x) KL(q(. | x) || p(y)). Zero at eta = 0, equal to exact_mi at eta = 1.
double mi_negative_expectation(const DiscreteJoint& joint, double eta);

/// sum_x p(x) log E_{q(. | x)} r(x, y): the term the dependent-negative bound
/// subtracts before the Jensen step.
double log_mean_negative_ratio(const DensityRatioOracle& oracle, double eta);

/// How negatives are drawn in the classic-bound check.
enum class NegativeSampling {
  /// iid from the candidate marginal.
  marginal,
  /// From the candidate marginal without replacement, excluding the
  /// positive's symbol: every batch holds N distinct candidates.
  distinct_symbols,
};

struct BoundReport {
  std::string check;  // "eq2" or "eq3"
  std::string joint_label;
  std::size_t n = 0;
  double eta = 0.0;
  std::size_t n_batches = 0;
  double loss_estimate = 0.0;
  double loss_stderr = 0.0;
  double mi_pos = 0.0;
  double mi_neg_expect = 0.0;
  /// sum_x p(x) log E_q r; reported alongside the main inequality.
  double log_mean_ratio = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  /// lhs - rhs.
  double gap = 0.0;
  /// Smallest per-anchor margin of the positive-versus-negative ratio premise
  /// (eq3 only; +inf for eq2).
  double premise_margin = 0.0;
  bool applicable = true;
  bool holds = true;
};

nlohmann::json to_json(const BoundReport& report);

/// Monte Carlo estimate of the InfoNCE loss with oracle scores and marginal
/// negatives. lhs = I, rhs = log N - L; holds iff rhs <= lhs + 3 stderr
/// (+1e-9 when the estimate has zero variance).
BoundReport verify_eq2(const DiscreteJoint& joint, std::size_t n, std::size_t n_batches, Rng& rng,
                       NegativeSampling sampling = NegativeSampling::marginal,
                       std::string joint_label = {});

/// Per anchor x, the premise E_{p(y|x)} log r(x, y) >= log E_{q(y|x)} r(x, y)
/// (the positive ratio dominates the mean negative ratio, in log form).
/// Returns the smallest margin over anchors; negative means violated.
double eq3_premise_margin(const DensityRatioOracle& oracle, double eta);

/// Dependent-negative bound: lhs = mi_pos - mi_neg_expect, rhs = log N - L.
/// Cells whose premise fails are marked inapplicable (holds stays true).
BoundReport verify_eq3(const DiscreteJoint& joint, std::size_t n, double eta, std::size_t n_batches,
                       Rng& rng, std::string joint_label = {});

struct JensenReport {
  /// sum_x p(x) E_{q(.|x)} log r (may be -inf when q reaches zero-ratio cells).
  double lhs = 0.0;
  /// sum_x p(x) log E_{q(.|x)} r.
  double rhs = 0.0;
  /// Monte Carlo counterparts from n_samples anchor/negative draws.
  double lhs_mc = 0.0;
  double rhs_mc = 0.0;
  std::size_t n_samples = 0;
  /// r is constant on the support of q(. | x) for every anchor.
  bool constant_ratio = false;
  bool holds = true;
};

nlohmann::json to_json(const JensenReport& report);

/// Exact sides by direct summation; holds iff lhs <= rhs + 1e-12, with
/// |lhs - rhs| <= 1e-12 required on constant-ratio constructions and
/// lhs < rhs - 1e-12 required otherwise.
JensenReport verify_jensen_step(const DiscreteJoint& joint, double eta, std::size_t n_samples, Rng& rng);

enum class WeightsRule {
  /// w = 1.
  uniform,
  /// w proportional to 1 / r, normalised to mean one under q.
  inverse_ratio,
  /// w proportional to p(y) / q(y | x): the inverse density ratio of the
  /// negative process, for which E log(w * q / p) vanishes identically.
  inverse_negative_ratio,
  /// w proportional to r (breaks the negative-covariance condition).
  sign_flipped,
};

std::string_view to_string(WeightsRule rule);
WeightsRule weights_rule_from_string(std::string_view s);

struct ControllabilityReport {
  std::string rule;
  std::string joint_label;
  double eta = 0.0;
  /// E_x E_q log(1 / w), exact enumeration.
  double predicted_mi_neg = 0.0;
  /// mi_negative_expectation(joint, eta).
  double target_expectation = 0.0;
  /// predicted - target.
  double residual = 0.0;
  /// E_x E_q log(w * q / p): the cross term driven to zero at the optimum.
  double cross_term = 0.0;
  /// Same prediction from n_samples sampled rows of n_negatives negatives,
  /// weights built by weights_from_similarity on the sampled row.
  double predicted_mc = 0.0;
  double predicted_mc_stderr = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_negatives = 0;
  /// max_x (E_q[w r] - E_q[r]); <= 0 means the weighted premise holds.
  double weighted_premise_excess = 0.0;
  /// max_x Cov_q(w, r) and max_x |E_q w - 1|.
  double condition1_max_cov = 0.0;
  double condition2_max_dev = 0.0;
  /// The optimum identity is enforced by construction for this rule.
  bool optimum_by_design = false;
  bool premise_holds = true;
};

nlohmann::json to_json(const ControllabilityReport& report);

/// Population weights w(x, y) for a rule, normalised to E_{q(.|x)} w = 1.
Mat64 population_weights(const DensityRatioOracle& oracle, double eta, WeightsRule rule);

/// Checks both weight conditions on the population weights (throws
/// ConditionViolation when either fails), then computes the report.
ControllabilityReport verify_controllability(const DiscreteJoint& joint, double eta, WeightsRule rule,
                                             std::size_t n_samples, Rng& rng, std::size_t n_negatives = 32,
                                             std::string joint_label = {});

}  // namespace srcl
