#include "srcl/regulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace srcl {

namespace {

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

AlphaSchedule::AlphaSchedule(std::vector<std::pair<double, double>> knots, bool pinned)
    : knots_(std::move(knots)), pinned_(pinned) {}

AlphaSchedule AlphaSchedule::linear() { return AlphaSchedule({{0.0, 1.0}, {1.0, 0.0}}, false); }

AlphaSchedule AlphaSchedule::piecewise(std::vector<std::pair<double, double>> knots) {
  if (knots.size() < 2) throw std::invalid_argument("alpha schedule: need at least two knots");
  if (knots.front().first != 0.0 || knots.back().first != 1.0) {
    throw std::invalid_argument("alpha schedule: knots must span progress 0 to 1");
  }
  if (knots.front().second != 1.0 || knots.back().second != 0.0) {
    throw std::invalid_argument("alpha schedule: must start at 1 and end at 0");
  }
  for (std::size_t i = 0; i < knots.size(); ++i) {
    const auto [t, a] = knots[i];
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("alpha schedule: alpha outside [0, 1]");
    if (i > 0) {
      if (!(t > knots[i - 1].first)) throw std::invalid_argument("alpha schedule: progress must increase");
      if (a > knots[i - 1].second) throw std::invalid_argument("alpha schedule: alpha must not increase");
    }
  }
  return AlphaSchedule(std::move(knots), false);
}

AlphaSchedule AlphaSchedule::pinned(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha schedule: alpha outside [0, 1]");
  return AlphaSchedule({{0.0, alpha}, {1.0, alpha}}, true);
}

AlphaSchedule AlphaSchedule::parse(const std::string& text) {
  if (text == "linear") return linear();
  if (text.rfind("pinned:", 0) == 0) return pinned(parse_double(text.substr(7)));
  if (text.rfind("piecewise:", 0) == 0) {
    std::vector<std::pair<double, double>> knots;
    std::stringstream ss(text.substr(10));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw std::invalid_argument("alpha schedule: knot '" + item + "' lacks ':'");
      knots.emplace_back(parse_double(item.substr(0, colon)), parse_double(item.substr(colon + 1)));
    }
    return piecewise(std::move(knots));
  }
  throw std::invalid_argument("alpha schedule: unknown form '" + text + "'");
}

std::string AlphaSchedule::to_string() const {
  if (pinned_) return "pinned:" + format_double(knots_.front().second);
  if (*this == linear()) return "linear";
  std::string out = "piecewise:";
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (i > 0) out += ",";
    out += format_double(knots_[i].first) + ":" + format_double(knots_[i].second);
  }
  return out;
}

double AlphaSchedule::at_progress(double progress) const {
  progress = std::clamp(progress, 0.0, 1.0);
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    const auto [t1, a1] = knots_[i];
    if (progress <= t1) {
      const auto [t0, a0] = knots_[i - 1];
      const double u = (progress - t0) / (t1 - t0);
      return a0 + u * (a1 - a0);
    }
  }
  return knots_.back().second;
}

double alpha_at(const AlphaSchedule& schedule, std::size_t step, std::size_t total_steps) {
  if (step > total_steps) {
    throw std::out_of_range("alpha_at: step " + std::to_string(step) + " beyond total " +
                            std::to_string(total_steps));
  }
  if (total_steps == 0) return schedule.at_progress(0.0);
  return schedule.at_progress(static_cast<double>(step) / static_cast<double>(total_steps));
}

void RegulatorConfig::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("regulator: delta must be finite and positive");
  if (!(weight_floor >= 0.0) || !std::isfinite(weight_floor)) {
    throw std::invalid_argument("regulator: weight_floor must be finite and >= 0");
  }
  if (!(similarity_scale > 0.0) || !std::isfinite(similarity_scale)) {
    throw std::invalid_argument("regulator: similarity_scale must be finite and positive");
  }
}

Mat64 exp_similarity(const Mat64& cosines, double scale) {
  Mat64 out = cosines;
  for (auto& v : out.flat()) v = std::exp(v / scale);
  return out;
}

Mat64 blended_similarity(const Mat64& teacher_sims, const Mat64& student_sims, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("blended_similarity: alpha outside [0, 1]");
  if (teacher_sims.rows() != student_sims.rows() || teacher_sims.cols() != student_sims.cols()) {
    throw std::invalid_argument("blended_similarity: shape mismatch");
  }
  Mat64 out(teacher_sims.rows(), teacher_sims.cols());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out.flat()[k] = alpha * teacher_sims.flat()[k] + (1.0 - alpha) * student_sims.flat()[k];
  }
  return out;
}

WeightMatrix weights_from_similarity(const Mat64& s, double delta, double floor) {
  if (s.rows() != s.cols()) throw std::invalid_argument("weights_from_similarity: similarity matrix must be square");
  const std::size_t n = s.rows();
  if (n < 2) throw std::invalid_argument("weights_from_similarity: a row needs at least one negative");
  if (!(delta > 0.0)) throw std::invalid_argument("weights_from_similarity: delta must be positive");
  WeightMatrix out{Mat64(n, n, 1.0), {}};
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double v = s(i, j);
      if (!(v > 0.0)) {
        throw std::invalid_argument("weights_from_similarity: similarity (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ") must be positive");
      }
      const double raw = delta / std::max(v, floor);
      out.w(i, j) = raw;
      total += raw;
    }
    const double mean = total / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) out.w(i, j) /= mean;
    }
  }
  return out;
}

std::vector<double> weights_from_similarity_row(std::span<const double> negatives, double delta, double floor) {
  if (negatives.empty()) throw std::invalid_argument("weights_from_similarity_row: no negatives");
  if (!(delta > 0.0)) throw std::invalid_argument("weights_from_similarity_row: delta must be positive");
  std::vector<double> out;
  out.reserve(negatives.size());
  double total = 0.0;
  for (double v : negatives) {
    if (!(v > 0.0)) throw std::invalid_argument("weights_from_similarity_row: similarities must be positive");
    out.push_back(delta / std::max(v, floor));
    total += out.back();
  }
  const double mean = total / static_cast<double>(out.size());
  for (double& w : out) w /= mean;
  return out;
}

double check_condition1(std::span<const double> w_row, std::span<const double> f_row) {
  if (w_row.size() != f_row.size()) throw std::invalid_argument("check_condition1: rows differ in length");
  if (w_row.size() < 2) throw std::invalid_argument("check_condition1: need at least two entries");
  const double k = static_cast<double>(w_row.size());
  double mw = 0.0, mf = 0.0;
  for (std::size_t i = 0; i < w_row.size(); ++i) {
    mw += w_row[i];
    mf += f_row[i];
  }
  mw /= k;
  mf /= k;
  double cov = 0.0;
  for (std::size_t i = 0; i < w_row.size(); ++i) cov += (w_row[i] - mw) * (f_row[i] - mf);
  return cov / k;
}

std::vector<double> condition1_by_row(const WeightMatrix& weights, const Mat64& s) {
  const std::size_t n = weights.size();
  std::vector<double> out;
  out.reserve(n);
  std::vector<double> w_row, f_row;
  for (std::size_t i = 0; i < n; ++i) {
    w_row.clear();
    f_row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (!weights.is_active(i, j)) continue;
      w_row.push_back(weights.w(i, j));
      f_row.push_back(s(i, j));
    }
    out.push_back(w_row.size() >= 2 ? check_condition1(w_row, f_row) : 0.0);
  }
  return out;
}

double check_condition2(const WeightMatrix& weights) {
  double worst = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights.active_count(i) == 0) continue;
    worst = std::max(worst, std::abs(weights.row_mean(i) - 1.0));
  }
  return worst;
}

WeightMatrix mask_below(const WeightMatrix& weights, double threshold) {
  const std::size_t n = weights.size();
  WeightMatrix out{weights.w, std::vector<std::uint8_t>(n * n, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    std::size_t kept = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!weights.is_active(i, j) || weights.w(i, j) < threshold) continue;
      out.active[i * n + j] = 1;
      total += weights.w(i, j);
      ++kept;
    }
    if (kept == 0) continue;
    const double mean = total / static_cast<double>(kept);
    for (std::size_t j = 0; j < n; ++j) {
      if (out.active[i * n + j] != 0) out.w(i, j) /= mean;
    }
  }
  return out;
}

RegulatedWeights regulate(const Mat64& teacher_cos, const Mat64& student_cos, double alpha,
                          const RegulatorConfig& cfg, double temperature) {
  cfg.validate();
  const double scale = (cfg.use_temperature_in_weights ? temperature : 1.0) / cfg.similarity_scale;
  Mat64 blended = blended_similarity(exp_similarity(teacher_cos, scale), exp_similarity(student_cos, scale), alpha);
  WeightMatrix ab = weights_from_similarity(blended, cfg.delta, cfg.weight_floor);
  WeightMatrix ba = weights_from_similarity(blended.transposed(), cfg.delta, cfg.weight_floor);
  return RegulatedWeights{std::move(ab), std::move(ba), std::move(blended)};
}

}  // namespace srcl
