#include "srcl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "srcl/regulator.hpp"

namespace srcl {

std::map<std::size_t, double> recall_at_k_from_scores(const Mat64& scores, std::span<const std::size_t> ground_truth,
                                                      std::span<const std::size_t> ks) {
  if (ground_truth.size() != scores.rows()) throw std::invalid_argument("recall_at_k: one ground truth per query");
  if (ks.empty()) throw std::invalid_argument("recall_at_k: no K given");
  for (std::size_t k : ks) {
    if (k == 0 || k > scores.cols()) {
      throw std::invalid_argument("recall_at_k: K = " + std::to_string(k) + " outside [1, gallery size " +
                                  std::to_string(scores.cols()) + "]");
    }
  }
  std::vector<std::size_t> ranks(scores.rows());
  for (std::size_t q = 0; q < scores.rows(); ++q) {
    const std::size_t t = ground_truth[q];
    if (t >= scores.cols()) throw std::invalid_argument("recall_at_k: ground-truth index out of range");
    const double target = scores(q, t);
    std::size_t rank = 0;
    for (std::size_t g = 0; g < scores.cols(); ++g) {
      if (scores(q, g) > target || (scores(q, g) == target && g < t)) ++rank;
    }
    ranks[q] = rank;
  }
  std::map<std::size_t, double> out;
  for (std::size_t k : ks) {
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r < k; });
    out[k] = static_cast<double>(hits) / static_cast<double>(ranks.size());
  }
  return out;
}

std::map<std::size_t, double> recall_at_k(const Mat64& query_embs, const Mat64& gallery_embs,
                                          std::span<const std::size_t> ground_truth, std::span<const std::size_t> ks) {
  return recall_at_k_from_scores(cosine_matrix(query_embs, gallery_embs), ground_truth, ks);
}

double RetrievalReport::mean_r1() const { return 0.5 * (a_to_b.at(1) + b_to_a.at(1)); }

nlohmann::json to_json(const RetrievalReport& r) {
  nlohmann::json ab, ba;
  for (const auto& [k, v] : r.a_to_b) ab["R@" + std::to_string(k)] = v;
  for (const auto& [k, v] : r.b_to_a) ba["R@" + std::to_string(k)] = v;
  return nlohmann::json{{"a_to_b", ab}, {"b_to_a", ba}, {"n_queries", r.n_queries}};
}

RetrievalReport evaluate_retrieval(const EncoderPair& model, const PairBatch& pairs, std::span<const std::size_t> ks) {
  const Mat64 emb_a = model.a.forward(pairs.raw_a);
  const Mat64 emb_b = model.b.forward(pairs.raw_b);
  const Mat64 sims = cosine_matrix(emb_a, emb_b);
  std::vector<std::size_t> truth(pairs.size());
  for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = i;
  RetrievalReport r;
  r.a_to_b = recall_at_k_from_scores(sims, truth, ks);
  r.b_to_a = recall_at_k_from_scores(sims.transposed(), truth, ks);
  r.n_queries = pairs.size();
  return r;
}

RetrievalReport validation_retrieval(const EncoderPair& model, const WorldSpec& world, std::size_t n_val,
                                     std::uint64_t salt) {
  const World w(world, Rng(world.seed));
  std::vector<std::size_t> ks;
  for (std::size_t k : kDefaultKs) {
    if (k <= n_val) ks.push_back(k);
  }
  return evaluate_retrieval(model, w.validation_set(n_val, salt), ks);
}

std::vector<SweepPoint> threshold_mask_sweep(const TrainerState& state, const WorldSpec& world,
                                             std::span<const double> thresholds, const SweepOptions& options) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] >= 0.0 && thresholds[i] <= 1.0)) {
      throw std::invalid_argument("threshold_mask_sweep: thresholds must lie in [0, 1]");
    }
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
      throw std::invalid_argument("threshold_mask_sweep: thresholds must be ascending");
    }
  }
  if (state.config.loss != LossKind::srcl) {
    throw std::invalid_argument("threshold_mask_sweep: masking needs the regulated (srcl) loss");
  }
  TrainConfig cfg = state.config;
  if (options.steps > 0) cfg.steps = options.steps;

  std::vector<SweepPoint> out;
  out.reserve(thresholds.size());
  for (double theta : thresholds) {
    SweepPoint point;
    point.threshold = theta;
    std::size_t skipped = 0;
    WeightTransform transform;
    if (theta > 0.0) {
      transform = [theta, &skipped](RegulatedWeights& w) {
        w.a_to_b = mask_below(w.a_to_b, theta);
        w.b_to_a = mask_below(w.b_to_a, theta);
        for (std::size_t i = 0; i < w.a_to_b.size(); ++i) {
          skipped += (w.a_to_b.active_count(i) == 0) + (w.b_to_a.active_count(i) == 0);
        }
      };
    }
    try {
      const TrainerState trained = train_student(world, state.teacher, cfg, transform);
      point.report = validation_retrieval(trained.student, world, options.n_val, options.val_salt);
    } catch (const TrainingDiverged&) {
      point.diverged = true;
      point.report.a_to_b[1] = 0.0;
      point.report.b_to_a[1] = 0.0;
      point.report.n_queries = options.n_val;
    }
    point.skipped_rows = skipped;
    out.push_back(std::move(point));
  }
  return out;
}

std::string sweep_csv(std::span<const SweepPoint> points, const std::string& header_comment) {
  std::ostringstream out;
  out.precision(17);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "threshold,r_at_1_ab,r_at_1_ba,skipped_rows\n";
  for (const auto& p : points) {
    out << p.threshold << "," << p.report.a_to_b.at(1) << "," << p.report.b_to_a.at(1) << "," << p.skipped_rows
        << "\n";
  }
  return out.str();
}

double WeightHistogram::fraction_within(double lo, double hi) const {
  if (total == 0) return 0.0;
  std::uint64_t inside = 0;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    if (edges[b] >= lo - 1e-12 && edges[b + 1] <= hi + 1e-12) inside += counts[b];
  }
  return static_cast<double>(inside) / static_cast<double>(total);
}

nlohmann::json to_json(const WeightHistogram& h) {
  return nlohmann::json{{"edges", h.edges},
                        {"counts", h.counts},
                        {"n_batches", h.n_batches},
                        {"total", h.total},
                        {"overflow", h.overflow},
                        {"mean_false_neg", h.n_false_neg > 0 ? nlohmann::json(h.mean_false_neg) : nlohmann::json()},
                        {"mean_true_neg", h.n_true_neg > 0 ? nlohmann::json(h.mean_true_neg) : nlohmann::json()},
                        {"n_false_neg", h.n_false_neg},
                        {"n_true_neg", h.n_true_neg},
                        {"fraction_0.8_1.2", h.fraction_within(0.8, 1.2)},
                        {"alpha", h.alpha}};
}

WeightHistogram weight_histogram(const TrainerState& state, const WorldSpec& world, std::size_t n_batches,
                                 const HistogramOptions& options) {
  if (options.bins == 0 || !(options.w_max > 0.0)) throw std::invalid_argument("weight_histogram: bad binning");
  WeightHistogram h;
  h.n_batches = n_batches;
  h.counts.assign(options.bins, 0);
  for (std::size_t b = 0; b <= options.bins; ++b) {
    h.edges.push_back(options.w_max * static_cast<double>(b) / static_cast<double>(options.bins));
  }
  const TrainConfig& cfg = state.config;
  const bool regulated = cfg.loss == LossKind::srcl;
  h.alpha = regulated ? alpha_at(cfg.regulator.alpha_schedule, std::min(state.step, cfg.steps), cfg.steps) : 0.0;
  if (regulated && h.alpha > 0.0 && !state.teacher) {
    throw std::invalid_argument("weight_histogram: alpha > 0 needs the state's teacher");
  }
  World stream(world, training_stream(cfg.seed, options.stream_salt));
  double fn_sum = 0.0, tn_sum = 0.0;
  for (std::size_t k = 0; k < n_batches; ++k) {
    const PairBatch batch = stream.next_batch(cfg.batch);
    const std::size_t n = batch.size();
    WeightMatrix w = WeightMatrix::uniform(n);
    if (regulated) {
      const Mat64 student_cos =
          cosine_matrix(state.student.a.forward(batch.raw_a), state.student.b.forward(batch.raw_b));
      Mat64 teacher_cos = student_cos;
      if (h.alpha > 0.0) {
        const auto& t = state.teacher->model();
        teacher_cos = cosine_matrix(t.a.forward(batch.raw_a), t.b.forward(batch.raw_b));
      }
      w = regulate(teacher_cos, student_cos, h.alpha, cfg.regulator, cfg.temperature).a_to_b;
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (!w.is_active(i, j)) continue;
        const double v = w.w(i, j);
        auto bin = static_cast<std::size_t>(v / options.w_max * static_cast<double>(options.bins));
        if (bin >= options.bins) {
          bin = options.bins - 1;
          ++h.overflow;
        }
        ++h.counts[bin];
        ++h.total;
        if (batch.false_negative(i, j)) {
          fn_sum += v;
          ++h.n_false_neg;
        } else {
          tn_sum += v;
          ++h.n_true_neg;
        }
      }
    }
  }
  h.mean_false_neg = h.n_false_neg > 0 ? fn_sum / static_cast<double>(h.n_false_neg) : 0.0;
  h.mean_true_neg = h.n_true_neg > 0 ? tn_sum / static_cast<double>(h.n_true_neg) : 0.0;
  return h;
}

}  // namespace srcl
