#pragma once

// Desk-scale two-encoder contrastive training: InfoNCE teacher pretraining
// on a clean world, then student training with either vanilla InfoNCE or
// similarity-regulated weights blended from the frozen teacher and the live
// student.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "srcl/losses.hpp"
#include "srcl/model.hpp"
#include "srcl/regulator.hpp"
#include "srcl/synth.hpp"

namespace srcl {

enum class LossKind { infonce, srcl };

std::string_view to_string(LossKind k);
LossKind loss_kind_from_string(std::string_view s);

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double temperature = 0.1;
  LossKind loss = LossKind::srcl;
  RegulatorConfig regulator;
  std::uint64_t seed = 1;
  std::size_t emb_dim = 16;
  std::size_t hidden_dim = 0;
  double init_scale = 1.0;
  /// Start the student from the teacher's parameters instead of a fresh init.
  bool init_from_teacher = false;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct HistoryRow {
  std::size_t step;
  double loss;
  double alpha;
  /// Mean a->b weight over ground-truth false-negative / true-negative
  /// slots of the batch; NaN when the batch has no such slot.
  double mean_false_neg_weight;
  double mean_true_neg_weight;
};

struct TrainerState {
  EncoderPair student;
  std::optional<TeacherHandle> teacher;
  std::vector<double> velocity_a;
  std::vector<double> velocity_b;
  std::size_t step = 0;
  std::vector<HistoryRow> history;
  TrainConfig config;
  WorldSpec world;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t step, const std::string& what)
      : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Classic heavy-ball update: v <- momentum * v + g; p <- p - lr * v.
void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              double learning_rate, double momentum);

/// Seed of the batch stream for a run; teacher and student use distinct salts.
Rng training_stream(std::uint64_t seed, std::uint64_t salt);

/// Initial student parameters for a config (what train_student starts from
/// when init_from_teacher is false).
EncoderPair initial_student(const WorldSpec& world, const TrainConfig& cfg);

struct TeacherResult {
  TeacherHandle teacher;
  double final_loss;
};

/// InfoNCE training on a world with no injected false negatives.
TeacherResult train_teacher(const WorldSpec& world_clean, const TrainConfig& cfg);

/// Per-step hook: weights about to be used may be replaced (masking).
using WeightTransform = std::function<void(RegulatedWeights&)>;

TrainerState train_student(const WorldSpec& world, const std::optional<TeacherHandle>& teacher,
                           const TrainConfig& cfg, const WeightTransform& transform = {});

/// Checkpoint layout (little-endian): magic "SRCLCKPT", u32 schema version,
/// then for each encoder (a, b): u64 dim_in, u64 dim_emb, u64 hidden_dim,
/// u64 parameter count, that many IEEE-754 doubles.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const EncoderPair& model, const std::filesystem::path& path);
EncoderPair load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_bytes(const EncoderPair& model);

/// CSV: step,loss,alpha,mean_false_neg_weight,mean_true_neg_weight
std::string history_csv(std::span<const HistoryRow> history, const std::string& header_comment = {});

/// Mean of `values` over a trailing window ending at index `end` (inclusive).
double smoothed(std::span<const double> values, std::size_t end, std::size_t window);

}  // namespace srcl
