#pragma once

// Retrieval metrics, regulation-weight statistics and the threshold-masking
// experiment on the synthetic two-modality world.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srcl/model.hpp"
#include "srcl/numerics.hpp"
#include "srcl/synth.hpp"
#include "srcl/trainer.hpp"

namespace srcl {

/// Recall at K for one retrieval direction. Ranking is by decreasing score,
/// ties broken towards the lower gallery index. Throws when a K is zero or
/// exceeds the gallery size, or when a ground-truth index is out of range.
std::map<std::size_t, double> recall_at_k_from_scores(const Mat64& scores, std::span<const std::size_t> ground_truth,
                                                      std::span<const std::size_t> ks);

/// Cosine-similarity ranking of gallery rows for every query row.
std::map<std::size_t, double> recall_at_k(const Mat64& query_embs, const Mat64& gallery_embs,
                                          std::span<const std::size_t> ground_truth, std::span<const std::size_t> ks);

struct RetrievalReport {
  std::map<std::size_t, double> a_to_b;
  std::map<std::size_t, double> b_to_a;
  std::size_t n_queries = 0;

  /// Mean of the two directions' R@1.
  double mean_r1() const;
};

nlohmann::json to_json(const RetrievalReport& report);

inline constexpr std::size_t kDefaultKs[] = {1, 5, 10};

/// Both directions over paired rows (ground truth is the identity).
RetrievalReport evaluate_retrieval(const EncoderPair& model, const PairBatch& pairs,
                                   std::span<const std::size_t> ks = kDefaultKs);

/// evaluate_retrieval on the world's held-out clean validation pairs, at the
/// default Ks that fit the gallery.
RetrievalReport validation_retrieval(const EncoderPair& model, const WorldSpec& world, std::size_t n_val,
                                     std::uint64_t salt = 0);

struct SweepPoint {
  double threshold = 0.0;
  RetrievalReport report;
  /// Anchor rows (over both directions and all steps) left without a negative.
  std::size_t skipped_rows = 0;
  /// Training stopped early on a non-finite loss.
  bool diverged = false;
};

struct SweepOptions {
  std::size_t steps = 0;  // 0 keeps the state's training length
  std::size_t n_val = 512;
  std::uint64_t val_salt = 0;
};

/// Retrains from the state's initial parameters once per threshold with
/// negatives of weight below the threshold removed (survivors renormalised
/// to mean one) and evaluates validation retrieval. A threshold of 0 removes
/// nothing. Thresholds must be ascending in [0, 1].
std::vector<SweepPoint> threshold_mask_sweep(const TrainerState& state, const WorldSpec& world,
                                             std::span<const double> thresholds, const SweepOptions& options = {});

/// CSV: threshold,r_at_1_ab,r_at_1_ba,skipped_rows
std::string sweep_csv(std::span<const SweepPoint> points, const std::string& header_comment = {});

struct WeightHistogram {
  std::vector<double> edges;  // bins + 1 edges over [0, w_max]
  std::vector<std::uint64_t> counts;
  std::size_t n_batches = 0;
  std::uint64_t total = 0;
  /// Weights at or above w_max are counted in the last bin.
  std::uint64_t overflow = 0;
  double mean_false_neg = 0.0;
  double mean_true_neg = 0.0;
  std::uint64_t n_false_neg = 0;
  std::uint64_t n_true_neg = 0;
  double alpha = 0.0;

  /// Share of the mass in bins lying entirely inside [lo, hi].
  double fraction_within(double lo, double hi) const;
};

nlohmann::json to_json(const WeightHistogram& h);

struct HistogramOptions {
  std::size_t bins = 40;
  double w_max = 4.0;
  std::uint64_t stream_salt = 0x68697374ULL;
};

/// Histogram of the a->b weights the regulator emits for the trained state
/// (its final alpha) over n_batches fresh batches, with false/true-negative
/// split means from the ground-truth mask. An InfoNCE state yields unit
/// weights.
WeightHistogram weight_histogram(const TrainerState& state, const WorldSpec& world, std::size_t n_batches,
                                 const HistogramOptions& options = {});

}  // namespace srcl
