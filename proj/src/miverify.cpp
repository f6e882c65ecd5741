#include "srcl/miverify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "srcl/regulator.hpp"

namespace srcl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_eta(double eta, const char* who) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument(std::string(who) + ": eta outside [0, 1]");
}

struct Moments {
  double mean;
  double stderr_;
};

Moments moments(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = pairwise_sum(xs) / n;
  if (xs.size() < 2) return {mean, 0.0};
  std::vector<double> sq(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) sq[k] = (xs[k] - mean) * (xs[k] - mean);
  const double var = pairwise_sum(sq) / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

std::vector<double> negative_law(const DiscreteJoint& joint, double eta, std::size_t x) {
  return negative_conditional(joint, eta, x);
}

std::size_t sample_cell(const DiscreteJoint& joint, Rng& rng) {
  return rng.categorical(joint.table().flat());
}

/// Similarity a rule inverts (weights are proportional to 1 / s).
double rule_similarity(const DensityRatioOracle& oracle, double eta, WeightsRule rule, std::size_t x,
                       std::size_t y) {
  switch (rule) {
    case WeightsRule::uniform:
      return 1.0;
    case WeightsRule::inverse_ratio:
      return oracle.ratio(x, y);
    case WeightsRule::inverse_negative_ratio:
      return oracle.negative_ratio(x, y, eta);
    case WeightsRule::sign_flipped:
      return oracle.ratio(x, y) > 0.0 ? 1.0 / oracle.ratio(x, y) : kInf;
  }
  return 1.0;
}

}  // namespace

double exact_mi(const DiscreteJoint& joint) {
  std::vector<double> terms;
  terms.reserve(joint.nx() * joint.ny());
  for (std::size_t x = 0; x < joint.nx(); ++x) {
    for (std::size_t y = 0; y < joint.ny(); ++y) {
      const double p = joint.p(x, y);
      if (p <= 0.0) continue;
      terms.push_back(p * std::log(p / (joint.px(x) * joint.py(y))));
    }
  }
  return std::max(0.0, pairwise_sum(terms));
}

DensityRatioOracle::DensityRatioOracle(DiscreteJoint joint)
    : joint_(std::move(joint)), ratio_(joint_.nx(), joint_.ny()) {
  for (std::size_t x = 0; x < joint_.nx(); ++x) {
    for (std::size_t y = 0; y < joint_.ny(); ++y) {
      ratio_(x, y) = joint_.p(x, y) / (joint_.px(x) * joint_.py(y));
    }
  }
}

double DensityRatioOracle::normalization_error() const {
  double worst = 0.0;
  for (std::size_t x = 0; x < joint_.nx(); ++x) {
    double s = 0.0;
    for (std::size_t y = 0; y < joint_.ny(); ++y) s += joint_.py(y) * ratio_(x, y);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

double DensityRatioOracle::negative_ratio(std::size_t x, std::size_t y, double eta) const {
  return eta * ratio_(x, y) + (1.0 - eta);
}

double mi_negative_expectation(const DiscreteJoint& joint, double eta) {
  check_eta(eta, "mi_negative_expectation");
  const DensityRatioOracle oracle(joint);
  std::vector<double> terms;
  for (std::size_t x = 0; x < joint.nx(); ++x) {
    const auto q = negative_law(joint, eta, x);
    for (std::size_t y = 0; y < joint.ny(); ++y) {
      if (q[y] <= 0.0) continue;
      terms.push_back(joint.px(x) * q[y] * std::log(oracle.negative_ratio(x, y, eta)));
    }
  }
  return std::max(0.0, pairwise_sum(terms));
}

double log_mean_negative_ratio(const DensityRatioOracle& oracle, double eta) {
  check_eta(eta, "log_mean_negative_ratio");
  const auto& joint = oracle.joint();
  double total = 0.0;
  for (std::size_t x = 0; x < joint.nx(); ++x) {
    const auto q = negative_law(joint, eta, x);
    double mean_ratio = 0.0;
    for (std::size_t y = 0; y < joint.ny(); ++y) mean_ratio += q[y] * oracle.ratio(x, y);
    total += joint.px(x) * std::log(mean_ratio);
  }
  return total;
}

nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j{{"check", r.check},
                   {"joint", r.joint_label},
                   {"N", r.n},
                   {"eta", r.eta},
                   {"n_batches", r.n_batches},
                   {"loss_estimate", r.loss_estimate},
                   {"loss_stderr", r.loss_stderr},
                   {"mi_pos", r.mi_pos},
                   {"mi_neg_expect", r.mi_neg_expect},
                   {"log_mean_ratio", r.log_mean_ratio},
                   {"lhs", r.lhs},
                   {"rhs", r.rhs},
                   {"gap", r.gap},
                   {"applicable", r.applicable},
                   {"holds", r.holds}};
  if (r.check == "eq3") j["premise_margin"] = r.premise_margin;
  return j;
}

BoundReport verify_eq2(const DiscreteJoint& joint, std::size_t n, std::size_t n_batches, Rng& rng,
                       NegativeSampling sampling, std::string joint_label) {
  if (n < 2) throw std::invalid_argument("verify_eq2: N must be >= 2");
  if (n_batches == 0) throw std::invalid_argument("verify_eq2: need at least one batch");
  if (sampling == NegativeSampling::distinct_symbols && n > joint.ny()) {
    throw std::invalid_argument("verify_eq2: distinct batches need N <= alphabet size");
  }
  const DensityRatioOracle oracle(joint);
  std::vector<double> losses(n_batches);
  std::vector<double> pool;
  for (std::size_t b = 0; b < n_batches; ++b) {
    const std::size_t cell = sample_cell(joint, rng);
    const std::size_t x = cell / joint.ny();
    const std::size_t y_pos = cell % joint.ny();
    double neg_sum = 0.0;
    if (sampling == NegativeSampling::marginal) {
      for (std::size_t j = 1; j < n; ++j) neg_sum += oracle.ratio(x, rng.categorical(joint.marginal_y()));
    } else {
      pool = joint.marginal_y();
      pool[y_pos] = 0.0;
      for (std::size_t j = 1; j < n; ++j) {
        const std::size_t y = rng.categorical(pool);
        pool[y] = 0.0;
        neg_sum += oracle.ratio(x, y);
      }
    }
    losses[b] = std::log1p(neg_sum / oracle.ratio(x, y_pos));
  }
  const Moments m = moments(losses);
  BoundReport r;
  r.check = "eq2";
  r.joint_label = std::move(joint_label);
  r.n = n;
  r.n_batches = n_batches;
  r.loss_estimate = m.mean;
  r.loss_stderr = m.stderr_;
  r.mi_pos = exact_mi(joint);
  r.mi_neg_expect = 0.0;
  r.log_mean_ratio = log_mean_negative_ratio(oracle, 0.0);
  r.lhs = r.mi_pos;
  r.rhs = std::log(static_cast<double>(n)) - m.mean;
  r.gap = r.lhs - r.rhs;
  r.premise_margin = kInf;
  r.holds = r.rhs <= r.lhs + 3.0 * m.stderr_ + 1e-9;
  return r;
}

double eq3_premise_margin(const DensityRatioOracle& oracle, double eta) {
  check_eta(eta, "eq3_premise_margin");
  const auto& joint = oracle.joint();
  double worst = kInf;
  for (std::size_t x = 0; x < joint.nx(); ++x) {
    const auto cond = joint.conditional_y(x);
    const auto q = negative_law(joint, eta, x);
    double pos = 0.0, neg_mean = 0.0;
    for (std::size_t y = 0; y < joint.ny(); ++y) {
      if (cond[y] > 0.0) pos += cond[y] * std::log(oracle.ratio(x, y));
      neg_mean += q[y] * oracle.ratio(x, y);
    }
    worst = std::min(worst, pos - std::log(neg_mean));
  }
  return worst;
}

BoundReport verify_eq3(const DiscreteJoint& joint, std::size_t n, double eta, std::size_t n_batches, Rng& rng,
                       std::string joint_label) {
  if (n < 2) throw std::invalid_argument("verify_eq3: N must be >= 2");
  if (n_batches == 0) throw std::invalid_argument("verify_eq3: need at least one batch");
  check_eta(eta, "verify_eq3");
  const DensityRatioOracle oracle(joint);
  BoundReport r;
  r.check = "eq3";
  r.joint_label = std::move(joint_label);
  r.n = n;
  r.eta = eta;
  r.n_batches = n_batches;
  r.mi_pos = exact_mi(joint);
  r.mi_neg_expect = mi_negative_expectation(joint, eta);
  r.log_mean_ratio = log_mean_negative_ratio(oracle, eta);
  r.premise_margin = eq3_premise_margin(oracle, eta);
  r.applicable = r.premise_margin >= -1e-12;

  std::vector<double> losses(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    const auto batch = sample_batch_with_dependence(joint, n, eta, rng);
    const std::size_t x = batch[0].x;
    double neg_sum = 0.0;
    for (std::size_t j = 1; j < n; ++j) neg_sum += oracle.ratio(x, batch[j].y);
    losses[b] = std::log1p(neg_sum / oracle.ratio(x, batch[0].y));
  }
  const Moments m = moments(losses);
  r.loss_estimate = m.mean;
  r.loss_stderr = m.stderr_;
  r.lhs = r.mi_pos - r.mi_neg_expect;
  r.rhs = std::log(static_cast<double>(n)) - m.mean;
  r.gap = r.lhs - r.rhs;
  r.holds = !r.applicable || r.lhs >= r.rhs - 3.0 * m.stderr_ - 1e-9;
  return r;
}

nlohmann::json to_json(const JensenReport& r) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  return nlohmann::json{{"check", "jensen"},
                        {"lhs", finite_or_null(r.lhs)},
                        {"rhs", r.rhs},
                        {"lhs_mc", finite_or_null(r.lhs_mc)},
                        {"rhs_mc", r.rhs_mc},
                        {"n_samples", r.n_samples},
                        {"constant_ratio", r.constant_ratio},
                        {"holds", r.holds}};
}

JensenReport verify_jensen_step(const DiscreteJoint& joint, double eta, std::size_t n_samples, Rng& rng) {
  check_eta(eta, "verify_jensen_step");
  const DensityRatioOracle oracle(joint);
  JensenReport r;
  r.n_samples = n_samples;
  r.constant_ratio = true;
  std::vector<std::vector<double>> q_rows;
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t x = 0; x < joint.nx(); ++x) {
    auto q = negative_law(joint, eta, x);
    double e_log = 0.0, e_ratio = 0.0;
    double first = -1.0;
    for (std::size_t y = 0; y < joint.ny(); ++y) {
      if (q[y] <= 0.0) continue;
      const double ratio = oracle.ratio(x, y);
      e_log += ratio > 0.0 ? q[y] * std::log(ratio) : -kInf;
      e_ratio += q[y] * ratio;
      if (first < 0.0) first = ratio;
      if (std::abs(ratio - first) > 1e-15 * std::max(1.0, first)) r.constant_ratio = false;
    }
    lhs += joint.px(x) * e_log;
    rhs += joint.px(x) * std::log(e_ratio);
    q_rows.push_back(std::move(q));
  }
  r.lhs = lhs;
  r.rhs = rhs;
  if (r.constant_ratio) {
    r.holds = std::abs(r.lhs - r.rhs) <= 1e-12;
  } else {
    r.holds = r.lhs < r.rhs - 1e-12;
  }

  if (n_samples > 0) {
    std::vector<double> logs(n_samples);
    std::vector<double> ratio_sum(joint.nx(), 0.0);
    std::vector<std::size_t> count(joint.nx(), 0);
    for (std::size_t s = 0; s < n_samples; ++s) {
      const std::size_t x = rng.categorical(joint.marginal_x());
      const std::size_t y = rng.categorical(q_rows[x]);
      const double ratio = oracle.ratio(x, y);
      logs[s] = ratio > 0.0 ? std::log(ratio) : -kInf;
      ratio_sum[x] += ratio;
      ++count[x];
    }
    r.lhs_mc = pairwise_sum(logs) / static_cast<double>(n_samples);
    double rhs_mc = 0.0;
    for (std::size_t x = 0; x < joint.nx(); ++x) {
      if (count[x] == 0) continue;
      rhs_mc += static_cast<double>(count[x]) / static_cast<double>(n_samples) *
                std::log(ratio_sum[x] / static_cast<double>(count[x]));
    }
    r.rhs_mc = rhs_mc;
  }
  return r;
}

std::string_view to_string(WeightsRule rule) {
  switch (rule) {
    case WeightsRule::uniform:
      return "uniform";
    case WeightsRule::inverse_ratio:
      return "inverse_ratio";
    case WeightsRule::inverse_negative_ratio:
      return "inverse_negative_ratio";
    case WeightsRule::sign_flipped:
      return "sign_flipped";
  }
  return "uniform";
}

WeightsRule weights_rule_from_string(std::string_view s) {
  for (auto rule : {WeightsRule::uniform, WeightsRule::inverse_ratio, WeightsRule::inverse_negative_ratio,
                    WeightsRule::sign_flipped}) {
    if (to_string(rule) == s) return rule;
  }
  throw std::invalid_argument("unknown weights rule '" + std::string(s) + "'");
}

Mat64 population_weights(const DensityRatioOracle& oracle, double eta, WeightsRule rule) {
  check_eta(eta, "population_weights");
  const auto& joint = oracle.joint();
  Mat64 w(joint.nx(), joint.ny(), 1.0);
  for (std::size_t x = 0; x < joint.nx(); ++x) {
    const auto q = negative_law(joint, eta, x);
    double norm = 0.0;
    for (std::size_t y = 0; y < joint.ny(); ++y) {
      if (q[y] <= 0.0) continue;
      const double s = rule_similarity(oracle, eta, rule, x, y);
      if (!(s > 0.0) || !std::isfinite(s)) {
        throw std::invalid_argument("population_weights: rule '" + std::string(to_string(rule)) +
                                    "' needs positive finite ratios on the negative support");
      }
      norm += q[y] / s;
    }
    for (std::size_t y = 0; y < joint.ny(); ++y) {
      if (q[y] > 0.0) w(x, y) = (1.0 / rule_similarity(oracle, eta, rule, x, y)) / norm;
    }
  }
  return w;
}

nlohmann::json to_json(const ControllabilityReport& r) {
  return nlohmann::json{{"check", "controllability"},
                        {"rule", r.rule},
                        {"joint", r.joint_label},
                        {"eta", r.eta},
                        {"predicted_mi_neg", r.predicted_mi_neg},
                        {"target_expectation", r.target_expectation},
                        {"residual", r.residual},
                        {"cross_term", r.cross_term},
                        {"predicted_mc", r.predicted_mc},
                        {"predicted_mc_stderr", r.predicted_mc_stderr},
                        {"n_samples", r.n_samples},
                        {"n_negatives", r.n_negatives},
                        {"weighted_premise_excess", r.weighted_premise_excess},
                        {"condition1_max_cov", r.condition1_max_cov},
                        {"condition2_max_dev", r.condition2_max_dev},
                        {"optimum_by_design", r.optimum_by_design},
                        {"premise_holds", r.premise_holds}};
}

ControllabilityReport verify_controllability(const DiscreteJoint& joint, double eta, WeightsRule rule,
                                             std::size_t n_samples, Rng& rng, std::size_t n_negatives,
                                             std::string joint_label) {
  check_eta(eta, "verify_controllability");
  if (n_samples > 0 && n_negatives < 1) throw std::invalid_argument("verify_controllability: need negatives");
  const DensityRatioOracle oracle(joint);
  const Mat64 w = population_weights(oracle, eta, rule);

  ControllabilityReport r;
  r.rule = std::string(to_string(rule));
  r.joint_label = std::move(joint_label);
  r.eta = eta;
  r.n_samples = n_samples;
  r.n_negatives = n_negatives;
  r.optimum_by_design = rule == WeightsRule::inverse_negative_ratio;
  r.condition1_max_cov = -kInf;
  r.weighted_premise_excess = -kInf;

  std::vector<std::vector<double>> q_rows;
  for (std::size_t x = 0; x < joint.nx(); ++x) {
    const auto q = negative_law(joint, eta, x);
    double ew = 0.0, er = 0.0, ewr = 0.0;
    for (std::size_t y = 0; y < joint.ny(); ++y) {
      ew += q[y] * w(x, y);
      er += q[y] * oracle.ratio(x, y);
      ewr += q[y] * w(x, y) * oracle.ratio(x, y);
    }
    double cov = 0.0;
    for (std::size_t y = 0; y < joint.ny(); ++y) cov += q[y] * (w(x, y) - ew) * (oracle.ratio(x, y) - er);
    r.condition1_max_cov = std::max(r.condition1_max_cov, cov);
    r.condition2_max_dev = std::max(r.condition2_max_dev, std::abs(ew - 1.0));
    r.weighted_premise_excess = std::max(r.weighted_premise_excess, ewr - er);
    q_rows.push_back(q);
  }
  if (r.condition1_max_cov > 1e-12) {
    throw ConditionViolation("verify_controllability: weights covary positively with the density ratio (cov " +
                             std::to_string(r.condition1_max_cov) + ")");
  }
  if (r.condition2_max_dev > 1e-9) {
    throw ConditionViolation("verify_controllability: weights do not average to one under the negative law");
  }
  r.premise_holds = r.weighted_premise_excess <= 1e-12;

  std::vector<double> predicted_terms, cross_terms;
  for (std::size_t x = 0; x < joint.nx(); ++x) {
    for (std::size_t y = 0; y < joint.ny(); ++y) {
      const double q = q_rows[x][y];
      if (q <= 0.0) continue;
      const double mass = joint.px(x) * q;
      predicted_terms.push_back(-mass * std::log(w(x, y)));
      cross_terms.push_back(mass * std::log(w(x, y) * oracle.negative_ratio(x, y, eta)));
    }
  }
  r.predicted_mi_neg = pairwise_sum(predicted_terms);
  r.cross_term = pairwise_sum(cross_terms);
  r.target_expectation = mi_negative_expectation(joint, eta);
  r.residual = r.predicted_mi_neg - r.target_expectation;

  if (n_samples > 0) {
    std::vector<double> per_sample(n_samples);
    std::vector<double> sims(n_negatives);
    for (std::size_t s = 0; s < n_samples; ++s) {
      const std::size_t x = rng.categorical(joint.marginal_x());
      for (std::size_t j = 0; j < n_negatives; ++j) {
        sims[j] = rule_similarity(oracle, eta, rule, x, rng.categorical(q_rows[x]));
      }
      const auto row = weights_from_similarity_row(sims, 1.0, 0.0);
      double acc = 0.0;
      for (double v : row) acc -= std::log(v);
      per_sample[s] = acc / static_cast<double>(n_negatives);
    }
    const Moments m = moments(per_sample);
    r.predicted_mc = m.mean;
    r.predicted_mc_stderr = m.stderr_;
  }
  return r;
}

}  // namespace srcl
