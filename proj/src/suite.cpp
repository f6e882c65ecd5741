#include "srcl/suite.hpp"

#include <charconv>
#include <cmath>

#include "srcl/miverify.hpp"
#include "srcl/regulator.hpp"
#include "srcl/synth.hpp"

namespace srcl {

namespace {

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string bsc_label(double p) { return "bsc" + num(p); }

// Each cell draws from its own stream keyed by its label, so a cell's
// result does not depend on which other cells run.
Rng cell_rng(const VerifyConfig& cfg, const std::string& cell) { return Rng(cfg.seed).fork(fnv1a64(cell)); }

void record(SuiteResult& out, const std::string& cell, nlohmann::json j, bool passed) {
  j["cell"] = cell;
  j["passed"] = passed;
  out.records.push_back(std::move(j));
  if (!passed) out.failures.push_back(cell);
}

// Joint with p(x, y) = mix * [x == y] / k + (1 - mix) / k^2.
DiscreteJoint noisy_diagonal_joint(std::size_t k, double mix) {
  Mat64 t(k, k);
  const double kd = static_cast<double>(k);
  for (std::size_t x = 0; x < k; ++x) {
    for (std::size_t y = 0; y < k; ++y) t(x, y) = (x == y ? mix / kd : 0.0) + (1.0 - mix) / (kd * kd);
  }
  return DiscreteJoint(std::move(t));
}

}  // namespace

void SuiteResult::append(SuiteResult other) {
  for (auto& r : other.records) records.push_back(std::move(r));
  for (auto& f : other.failures) failures.push_back(std::move(f));
}

SuiteResult run_eq2_grid(const VerifyConfig& cfg) {
  SuiteResult out;
  for (double p : cfg.bsc_agree) {
    const DiscreteJoint joint = make_bsc_joint(p);
    for (std::size_t n : cfg.eq2_batch_sizes) {
      const std::string cell = "eq2/" + bsc_label(p) + "/N" + std::to_string(n);
      Rng rng = cell_rng(cfg, cell);
      const BoundReport r = verify_eq2(joint, n, cfg.n_batches, rng, NegativeSampling::marginal, bsc_label(p));
      record(out, cell, to_json(r), r.holds);
    }
  }
  const std::size_t k = cfg.deterministic_k;
  const std::string label = "deterministic" + std::to_string(k);
  const std::string cell = "eq2/" + label + "/N" + std::to_string(k) + "/distinct";
  Rng rng = cell_rng(cfg, cell);
  const BoundReport r =
      verify_eq2(make_deterministic_joint(k), k, cfg.n_batches, rng, NegativeSampling::distinct_symbols, label);
  nlohmann::json j = to_json(r);
  const double deviation = std::abs(r.rhs - r.lhs);
  j["equality_deviation"] = deviation;
  record(out, cell, std::move(j), r.holds && deviation <= 1e-9);
  return out;
}

SuiteResult run_eq3_grid(const VerifyConfig& cfg) {
  SuiteResult out;
  const double p = cfg.eq3_bsc_agree;
  const DiscreteJoint joint = make_bsc_joint(p);
  for (double eta : cfg.eq3_etas) {
    for (std::size_t n : cfg.eq3_batch_sizes) {
      const std::string cell = "eq3/" + bsc_label(p) + "/eta" + num(eta) + "/N" + std::to_string(n);
      Rng rng = cell_rng(cfg, cell);
      const BoundReport r = verify_eq3(joint, n, eta, cfg.n_batches, rng, bsc_label(p));
      record(out, cell, to_json(r), r.holds);
    }
  }
  const std::string label = "deterministic" + std::to_string(cfg.deterministic_k);
  const DiscreteJoint det = make_deterministic_joint(cfg.deterministic_k);
  for (std::size_t n : cfg.eq3_batch_sizes) {
    const std::string cell = "eq3/" + label + "/eta" + num(cfg.deterministic_eta) + "/N" + std::to_string(n);
    Rng rng = cell_rng(cfg, cell);
    const BoundReport r = verify_eq3(det, n, cfg.deterministic_eta, cfg.n_batches, rng, label);
    record(out, cell, to_json(r), r.holds);
  }
  return out;
}

SuiteResult run_jensen_grid(const VerifyConfig& cfg) {
  SuiteResult out;
  struct Case {
    std::string label;
    DiscreteJoint joint;
    std::vector<double> etas;
  };
  std::vector<Case> cases;
  for (double p : cfg.bsc_agree) cases.push_back({bsc_label(p), make_bsc_joint(p), cfg.eq3_etas});
  const std::size_t k = cfg.deterministic_k;
  cases.push_back({"deterministic" + std::to_string(k), make_deterministic_joint(k), {cfg.deterministic_eta, 1.0}});
  const std::vector<double> px = {0.1, 0.2, 0.3, 0.4};
  const std::vector<double> py = {0.25, 0.25, 0.5};
  cases.push_back({"independent", make_independent_joint(px, py), cfg.eq3_etas});
  for (const Case& c : cases) {
    for (double eta : c.etas) {
      const std::string cell = "jensen/" + c.label + "/eta" + num(eta);
      Rng rng = cell_rng(cfg, cell);
      const JensenReport r = verify_jensen_step(c.joint, eta, cfg.jensen_samples, rng);
      nlohmann::json j = to_json(r);
      j["joint"] = c.label;
      j["eta"] = eta;
      record(out, cell, std::move(j), r.holds);
    }
  }
  return out;
}

SuiteResult run_controllability_grid(const VerifyConfig& cfg) {
  SuiteResult out;
  struct Case {
    std::string label;
    DiscreteJoint joint;
  };
  Rng joint_rng = Rng(cfg.seed).fork(fnv1a64("controllability/random4"));
  const std::vector<Case> cases = {
      {bsc_label(0.8), make_bsc_joint(0.8)},
      {bsc_label(0.95), make_bsc_joint(0.95)},
      {"noisy_diagonal4", noisy_diagonal_joint(4, 0.6)},
      {"random4", make_random_joint(4, 4, joint_rng)},
  };
  const WeightsRule rules[] = {WeightsRule::uniform, WeightsRule::inverse_ratio,
                               WeightsRule::inverse_negative_ratio, WeightsRule::sign_flipped};
  for (const Case& c : cases) {
    for (double eta : cfg.eq3_etas) {
      for (WeightsRule rule : rules) {
        const std::string cell = "controllability/" + c.label + "/eta" + num(eta) + "/" + std::string(to_string(rule));
        Rng rng = cell_rng(cfg, cell);
        if (rule == WeightsRule::sign_flipped) {
          nlohmann::json j{{"check", "controllability"}, {"rule", to_string(rule)}, {"joint", c.label}, {"eta", eta}};
          bool rejected = false;
          try {
            verify_controllability(c.joint, eta, rule, cfg.controllability_samples, rng,
                                   cfg.controllability_negatives, c.label);
          } catch (const ConditionViolation& e) {
            rejected = true;
            j["violation"] = e.what();
          }
          j["rejected"] = rejected;
          record(out, cell, std::move(j), rejected);
          continue;
        }
        const ControllabilityReport r = verify_controllability(c.joint, eta, rule, cfg.controllability_samples, rng,
                                                               cfg.controllability_negatives, c.label);
        bool passed = r.premise_holds;
        if (r.optimum_by_design) passed = passed && std::abs(r.residual) < kControllabilityResidualTol;
        record(out, cell, to_json(r), passed);
      }
    }
  }
  return out;
}

SuiteResult run_bound_suite(const VerifyConfig& cfg) {
  SuiteResult out = run_eq2_grid(cfg);
  out.append(run_eq3_grid(cfg));
  out.append(run_jensen_grid(cfg));
  out.append(run_controllability_grid(cfg));
  return out;
}

}  // namespace srcl
