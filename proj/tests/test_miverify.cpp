#include <gtest/gtest.h>

#include <cmath>

#include "srcl/miverify.hpp"
#include "srcl/regulator.hpp"
#include "srcl/suite.hpp"

namespace srcl {
namespace {

double bsc_mi(double p) { return std::log(2.0) + p * std::log(p) + (1 - p) * std::log(1 - p); }

TEST(ExactMi, BinarySymmetricChannel) {
  EXPECT_NEAR(exact_mi(make_bsc_joint(0.8)), 0.192745, 1e-6);
  for (double p : {0.55, 0.6, 0.8, 0.95, 0.999}) EXPECT_NEAR(exact_mi(make_bsc_joint(p)), bsc_mi(p), 1e-14);
}

TEST(ExactMi, DeterministicAndIndependent) {
  for (std::size_t k : {2u, 4u, 8u, 37u}) {
    EXPECT_NEAR(exact_mi(make_deterministic_joint(k)), std::log(static_cast<double>(k)), 1e-14);
  }
  const std::vector<double> px = {0.1, 0.2, 0.3, 0.4}, py = {0.25, 0.25, 0.5};
  EXPECT_NEAR(exact_mi(make_independent_joint(px, py)), 0.0, 1e-15);
}

TEST(DensityRatioOracle, NormalisedUnderTheMarginal) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const DensityRatioOracle o(make_random_joint(3 + t % 5, 2 + t % 7, rng));
    EXPECT_LT(o.normalization_error(), 1e-12);
  }
  const DensityRatioOracle bsc(make_bsc_joint(0.8));
  EXPECT_NEAR(bsc.ratio(0, 0), 1.6, 1e-15);
  EXPECT_NEAR(bsc.ratio(0, 1), 0.4, 1e-15);
  EXPECT_NEAR(bsc.negative_ratio(0, 0, 0.3), 0.3 * 1.6 + 0.7, 1e-15);
}

TEST(NegativeExpectation, MixtureDivergenceOnBsc) {
  const DiscreteJoint j = make_bsc_joint(0.8);
  // q(. | x) = (0.59, 0.41) against the uniform marginal.
  const double kl = 0.59 * std::log(0.59 / 0.5) + 0.41 * std::log(0.41 / 0.5);
  EXPECT_NEAR(mi_negative_expectation(j, 0.3), kl, 1e-14);
  EXPECT_NEAR(mi_negative_expectation(j, 0.3), 0.016288, 1e-6);
  EXPECT_EQ(mi_negative_expectation(j, 0.0), 0.0);
  EXPECT_NEAR(mi_negative_expectation(j, 1.0), exact_mi(j), 1e-14);
  double prev = 0.0;
  for (int k = 1; k <= 20; ++k) {
    const double v = mi_negative_expectation(j, k / 20.0);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(NegativeExpectation, LogMeanRatioAndPremise) {
  const DensityRatioOracle o(make_bsc_joint(0.8));
  // E_{p(y|x)} r = 0.8 * 1.6 + 0.2 * 0.4 = 1.36.
  EXPECT_NEAR(log_mean_negative_ratio(o, 0.3), std::log(0.3 * 1.36 + 0.7), 1e-14);
  EXPECT_NEAR(eq3_premise_margin(o, 0.3), bsc_mi(0.8) - std::log(1.108), 1e-14);
  EXPECT_LT(eq3_premise_margin(o, 1.0), 0.0);
  const DensityRatioOracle det(make_deterministic_joint(4));
  EXPECT_NEAR(eq3_premise_margin(det, 0.9), std::log(4.0) - std::log(0.9 * 4 + 0.1), 1e-14);
}

TEST(VerifyEq2, HoldsOnBscAndReportsSides) {
  Rng rng(2);
  const BoundReport r = verify_eq2(make_bsc_joint(0.8), 8, 20000, rng);
  EXPECT_EQ(r.check, "eq2");
  EXPECT_NEAR(r.lhs, bsc_mi(0.8), 1e-14);
  EXPECT_NEAR(r.rhs, std::log(8.0) - r.loss_estimate, 1e-12);
  EXPECT_NEAR(r.gap, r.lhs - r.rhs, 1e-15);
  EXPECT_GT(r.loss_stderr, 0.0);
  EXPECT_TRUE(r.holds);
}

TEST(VerifyEq2, DeterministicDistinctBatchIsTight) {
  Rng rng(3);
  const BoundReport r = verify_eq2(make_deterministic_joint(4), 4, 1000, rng, NegativeSampling::distinct_symbols);
  EXPECT_NEAR(r.loss_estimate, 0.0, 1e-12);
  EXPECT_NEAR(r.rhs, std::log(4.0), 1e-12);
  EXPECT_NEAR(r.lhs - r.rhs, 0.0, 1e-9);
  EXPECT_TRUE(r.holds);
  EXPECT_THROW(verify_eq2(make_deterministic_joint(4), 5, 10, rng, NegativeSampling::distinct_symbols),
               std::invalid_argument);
  EXPECT_THROW(verify_eq2(make_deterministic_joint(4), 1, 10, rng), std::invalid_argument);
}

TEST(VerifyEq3, ZeroDependenceMatchesTheClassicLhs) {
  Rng rng(4);
  const BoundReport r = verify_eq3(make_bsc_joint(0.8), 8, 0.0, 20000, rng);
  EXPECT_EQ(r.mi_neg_expect, 0.0);
  EXPECT_NEAR(r.lhs, bsc_mi(0.8), 1e-14);
  EXPECT_TRUE(r.applicable);
  EXPECT_TRUE(r.holds);
}

TEST(VerifyEq3, ApplicableCellsHoldAndFailingPremiseIsFlagged) {
  Rng rng(5);
  const BoundReport a = verify_eq3(make_bsc_joint(0.8), 32, 0.3, 20000, rng);
  EXPECT_NEAR(a.lhs, bsc_mi(0.8) - mi_negative_expectation(make_bsc_joint(0.8), 0.3), 1e-14);
  EXPECT_TRUE(a.applicable);
  EXPECT_TRUE(a.holds);
  const BoundReport b = verify_eq3(make_bsc_joint(0.8), 8, 1.0, 2000, rng);
  EXPECT_FALSE(b.applicable);
  EXPECT_LT(b.premise_margin, 0.0);
}

TEST(JensenStep, StrictOnBscAndEqualOnConstantRatio) {
  Rng rng(6);
  const JensenReport bsc = verify_jensen_step(make_bsc_joint(0.8), 0.3, 20000, rng);
  EXPECT_LT(bsc.lhs, bsc.rhs - 1e-12);
  EXPECT_FALSE(bsc.constant_ratio);
  EXPECT_TRUE(bsc.holds);
  EXPECT_NEAR(bsc.rhs, log_mean_negative_ratio(DensityRatioOracle(make_bsc_joint(0.8)), 0.3), 1e-14);
  EXPECT_NEAR(bsc.lhs_mc, bsc.lhs, 0.02);

  const std::vector<double> px = {0.1, 0.2, 0.3, 0.4}, py = {0.25, 0.25, 0.5};
  const JensenReport ind = verify_jensen_step(make_independent_joint(px, py), 0.5, 1000, rng);
  EXPECT_TRUE(ind.constant_ratio);
  EXPECT_NEAR(ind.lhs, ind.rhs, 1e-12);
  EXPECT_TRUE(ind.holds);

  const JensenReport det = verify_jensen_step(make_deterministic_joint(4), 1.0, 1000, rng);
  EXPECT_TRUE(det.constant_ratio);
  EXPECT_NEAR(det.lhs, std::log(4.0), 1e-12);
  EXPECT_TRUE(det.holds);
}

TEST(Controllability, PopulationWeightsHaveUnitMeanUnderQ) {
  const DensityRatioOracle o(make_bsc_joint(0.8));
  for (WeightsRule rule : {WeightsRule::uniform, WeightsRule::inverse_ratio, WeightsRule::inverse_negative_ratio}) {
    const Mat64 w = population_weights(o, 0.3, rule);
    for (std::size_t x = 0; x < 2; ++x) {
      const auto q = negative_conditional(o.joint(), 0.3, x);
      double mean = 0;
      for (std::size_t y = 0; y < 2; ++y) mean += q[y] * w(x, y);
      EXPECT_NEAR(mean, 1.0, 1e-12) << to_string(rule);
    }
  }
}

TEST(Controllability, InverseNegativeRatioHitsTheTarget) {
  Rng rng(7);
  const ControllabilityReport r =
      verify_controllability(make_bsc_joint(0.8), 0.3, WeightsRule::inverse_negative_ratio, 2000, rng);
  EXPECT_TRUE(r.optimum_by_design);
  EXPECT_NEAR(r.target_expectation, 0.016288, 1e-6);
  EXPECT_NEAR(r.cross_term, 0.0, 1e-12);
  EXPECT_LT(std::abs(r.residual), kControllabilityResidualTol);
  EXPECT_LE(r.condition1_max_cov, 0.0);
  EXPECT_LT(r.condition2_max_dev, 1e-12);
  EXPECT_TRUE(r.premise_holds);
}

TEST(Controllability, UniformWeightsPredictNothing) {
  Rng rng(8);
  const ControllabilityReport r = verify_controllability(make_bsc_joint(0.8), 0.3, WeightsRule::uniform, 500, rng);
  EXPECT_EQ(r.predicted_mi_neg, 0.0);
  EXPECT_NEAR(r.residual, -r.target_expectation, 1e-15);
}

TEST(Controllability, SignFlippedRuleIsRejected) {
  Rng rng(9);
  EXPECT_THROW(verify_controllability(make_bsc_joint(0.8), 0.3, WeightsRule::sign_flipped, 100, rng),
               ConditionViolation);
}

TEST(Controllability, RuleNamesRoundTrip) {
  for (WeightsRule rule : {WeightsRule::uniform, WeightsRule::inverse_ratio, WeightsRule::inverse_negative_ratio,
                           WeightsRule::sign_flipped}) {
    EXPECT_EQ(weights_rule_from_string(to_string(rule)), rule);
  }
  EXPECT_THROW(weights_rule_from_string("nope"), std::invalid_argument);
}

VerifyConfig small_grid() {
  VerifyConfig v;
  v.n_batches = 4000;
  v.jensen_samples = 4000;
  v.controllability_samples = 1000;
  return v;
}

TEST(Suite, GridsEmitOneRecordPerCell) {
  const VerifyConfig v = small_grid();
  const SuiteResult eq2 = run_eq2_grid(v);
  EXPECT_EQ(eq2.records.size(), v.bsc_agree.size() * v.eq2_batch_sizes.size() + 1);
  EXPECT_TRUE(eq2.passed());
  for (const auto& rec : eq2.records) {
    EXPECT_TRUE(rec.contains("cell"));
    EXPECT_TRUE(rec.at("passed").get<bool>());
  }
  const SuiteResult eq3 = run_eq3_grid(v);
  EXPECT_EQ(eq3.records.size(), (v.eq3_etas.size() + 1) * v.eq3_batch_sizes.size());
  const SuiteResult jensen = run_jensen_grid(v);
  EXPECT_TRUE(jensen.passed());
  const SuiteResult ctrl = run_controllability_grid(v);
  EXPECT_TRUE(ctrl.passed());
}

TEST(Suite, DeterministicInTheSeed) {
  const VerifyConfig v = small_grid();
  EXPECT_EQ(run_eq2_grid(v).records, run_eq2_grid(v).records);
}

}  // namespace
}  // namespace srcl
