#pragma once

// Sectioned plain-text experiment configuration:
//
//   # comment
//   [world]
//   n_concepts = 4096
//
// Sections are [world], [train], [regulator], [verify] and [eval]. Unknown
// sections or keys, duplicate keys and malformed values are errors that name
// the offending line. A canonical writer lists every key, so parse(write(c))
// reproduces c exactly.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "srcl/synth.hpp"
#include "srcl/trainer.hpp"

namespace srcl {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::size_t line, const std::string& what)
      : std::invalid_argument(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  /// 1-based line number, 0 when the error is not tied to a line.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct VerifyConfig {
  std::vector<double> bsc_agree = {0.6, 0.8, 0.95};
  std::vector<std::size_t> eq2_batch_sizes = {2, 8, 32, 128};
  std::size_t n_batches = 100000;
  double eq3_bsc_agree = 0.8;
  std::vector<double> eq3_etas = {0.1, 0.3, 0.5};
  std::vector<std::size_t> eq3_batch_sizes = {8, 32};
  /// Dependence rate of the deterministic-joint premise cell.
  double deterministic_eta = 0.9;
  std::size_t deterministic_k = 4;
  std::size_t jensen_samples = 100000;
  std::size_t controllability_samples = 20000;
  std::size_t controllability_negatives = 32;
  std::size_t gradcheck_instances = 100;
  std::vector<double> gradcheck_temperatures = {0.05, 0.1, 0.5, 1.0};
  std::uint64_t seed = 1;

  bool operator==(const VerifyConfig&) const = default;
};

struct EvalConfig {
  std::size_t n_val = 512;
  std::uint64_t val_salt = 0;
  std::vector<double> thresholds = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  /// Training steps per sweep threshold; 0 keeps train.steps.
  std::size_t sweep_steps = 0;
  std::size_t histogram_batches = 200;
  std::size_t histogram_bins = 40;
  double histogram_max = 4.0;

  bool operator==(const EvalConfig&) const = default;
};

struct ExperimentConfig {
  WorldSpec world;
  TrainConfig train;
  /// Teacher training steps; 0 means train.steps.
  std::size_t teacher_steps = 0;
  std::string out_dir = "out";
  VerifyConfig verify;
  EvalConfig eval;

  bool operator==(const ExperimentConfig&) const = default;

  /// Config used for teacher pretraining (InfoNCE on the clean world).
  TrainConfig teacher_config() const;
};

/// Defaults of the shipped experiments.
ExperimentConfig default_config();

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);
std::string write_config(const ExperimentConfig& cfg);

/// Applies "section.key=value" on top of cfg (flags override file values).
void apply_override(ExperimentConfig& cfg, std::string_view assignment);

/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace srcl
