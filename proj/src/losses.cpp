#include "srcl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace srcl {

WeightMatrix WeightMatrix::uniform(std::size_t n) { return WeightMatrix{Mat64(n, n, 1.0), {}}; }

std::size_t WeightMatrix::active_count(std::size_t i) const {
  std::size_t c = 0;
  for (std::size_t j = 0; j < w.cols(); ++j) c += is_active(i, j) ? 1 : 0;
  return c;
}

double WeightMatrix::row_mean(std::size_t i) const {
  double s = 0.0;
  std::size_t c = 0;
  for (std::size_t j = 0; j < w.cols(); ++j) {
    if (!is_active(i, j)) continue;
    s += w(i, j);
    ++c;
  }
  return c == 0 ? 0.0 : s / static_cast<double>(c);
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::a_to_b: return "a_to_b";
    case Direction::b_to_a: return "b_to_a";
    case Direction::symmetric_sum: return "symmetric_sum";
  }
  return "unknown";
}

Direction direction_from_string(std::string_view s) {
  if (s == "a_to_b") return Direction::a_to_b;
  if (s == "b_to_a") return Direction::b_to_a;
  if (s == "symmetric_sum") return Direction::symmetric_sum;
  throw std::invalid_argument("unknown loss direction '" + std::string(s) + "'");
}

void LossConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("LossConfig: temperature must be finite and positive");
  }
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Normalized {
  Mat64 unit;
  std::vector<double> inv_norm;
};

Normalized normalize_rows(const Mat64& m) {
  Normalized out{m, std::vector<double>(m.rows())};
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double n = norm2(m.row(i));
    if (n == 0.0) throw DegenerateInput("contrastive loss: zero-norm embedding row " + std::to_string(i));
    out.inv_norm[i] = 1.0 / n;
    for (auto& v : out.unit.row(i)) v *= out.inv_norm[i];
  }
  return out;
}

// Accumulates one direction: anchors are rows of `anc`, candidates rows of
// `cand`. Gradients land on the unit vectors and are projected later.
void one_direction(const Normalized& anc, const Normalized& cand, const WeightMatrix* weights,
                   double tau, std::vector<double>& per_anchor, Mat64& grad_anc_unit,
                   Mat64& grad_cand_unit, std::size_t& skipped) {
  const std::size_t n = anc.unit.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t negatives = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double s = std::clamp(dot(anc.unit.row(i), cand.unit.row(j)), -1.0, 1.0);
      double offset = 0.0;
      if (j != i && weights != nullptr) {
        offset = weights->is_active(i, j) ? std::log(weights->w(i, j)) : kNegInf;
      }
      if (j != i && offset != kNegInf) ++negatives;
      logits[j] = s / tau + offset;
    }
    if (negatives == 0) {
      ++skipped;
      continue;
    }
    const double lse = log_sum_exp(logits);
    per_anchor[i] += lse - logits[i];
    for (std::size_t j = 0; j < n; ++j) {
      const double p = logits[j] == kNegInf ? 0.0 : std::exp(logits[j] - lse);
      const double g = (p - (i == j ? 1.0 : 0.0)) * inv_n / tau;
      if (g == 0.0) continue;
      auto ga = grad_anc_unit.row(i);
      auto gc = grad_cand_unit.row(j);
      auto ua = anc.unit.row(i);
      auto uc = cand.unit.row(j);
      for (std::size_t d = 0; d < ga.size(); ++d) {
        ga[d] += g * uc[d];
        gc[d] += g * ua[d];
      }
    }
  }
}

// d/dx of f(x / |x|) given the gradient g with respect to u = x / |x|.
Mat64 project_to_raw(const Normalized& nm, const Mat64& grad_unit) {
  Mat64 out(grad_unit.rows(), grad_unit.cols());
  for (std::size_t i = 0; i < grad_unit.rows(); ++i) {
    auto u = nm.unit.row(i);
    auto g = grad_unit.row(i);
    const double ug = dot(u, g);
    auto o = out.row(i);
    for (std::size_t d = 0; d < o.size(); ++d) o[d] = (g[d] - u[d] * ug) * nm.inv_norm[i];
  }
  return out;
}

void check_weights(const WeightMatrix& w, std::size_t n, bool allow_masking, const char* name) {
  if (w.w.rows() != n || w.w.cols() != n) {
    throw std::invalid_argument(std::string(name) + ": weight matrix must be " + std::to_string(n) +
                                "x" + std::to_string(n));
  }
  if (!w.active.empty()) {
    if (!allow_masking) throw std::invalid_argument(std::string(name) + ": masked weights need srcl_masked");
    if (w.active.size() != n * n) throw std::invalid_argument(std::string(name) + ": mask size mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!w.is_active(i, j)) continue;
      const double v = w.w(i, j);
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string(name) + ": weight (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ") must be finite and positive");
      }
      ++count;
    }
    if (count == 0) continue;
    const double mean = w.row_mean(i);
    if (std::abs(mean - 1.0) > 1e-6) {
      throw std::invalid_argument(std::string(name) + ": row " + std::to_string(i) +
                                  " has mean weight " + std::to_string(mean) + ", expected 1");
    }
  }
}

LossOutput evaluate(const Mat64& emb_a, const Mat64& emb_b, const WeightMatrix* w_ab,
                    const WeightMatrix* w_ba, const LossConfig& cfg) {
  cfg.validate();
  if (emb_a.rows() != emb_b.rows()) throw std::invalid_argument("contrastive loss: row counts differ");
  if (emb_a.cols() != emb_b.cols()) throw std::invalid_argument("contrastive loss: embedding dims differ");
  const std::size_t n = emb_a.rows();
  if (n < 2) throw std::invalid_argument("contrastive loss: need N >= 2 to have negatives");

  const Normalized na = normalize_rows(emb_a);
  const Normalized nb = normalize_rows(emb_b);
  Mat64 ga(n, emb_a.cols());
  Mat64 gb(n, emb_b.cols());
  std::vector<double> per_anchor(n, 0.0);
  std::size_t skipped = 0;

  if (cfg.direction != Direction::b_to_a) {
    one_direction(na, nb, w_ab, cfg.temperature, per_anchor, ga, gb, skipped);
  }
  if (cfg.direction != Direction::a_to_b) {
    one_direction(nb, na, w_ba, cfg.temperature, per_anchor, gb, ga, skipped);
  }

  LossOutput out{0.0, project_to_raw(na, ga), project_to_raw(nb, gb), std::move(per_anchor), skipped};
  double total = 0.0;
  for (double v : out.per_anchor_values) total += v;
  out.value = total / static_cast<double>(n);
  return out;
}

}  // namespace

LossOutput info_nce(const Mat64& emb_a, const Mat64& emb_b, const LossConfig& cfg) {
  return evaluate(emb_a, emb_b, nullptr, nullptr, cfg);
}

LossOutput srcl(const Mat64& emb_a, const Mat64& emb_b, const WeightMatrix& weights,
                const LossConfig& cfg) {
  check_weights(weights, emb_a.rows(), false, "srcl");
  return evaluate(emb_a, emb_b, &weights, &weights, cfg);
}

LossOutput srcl_symmetric(const Mat64& emb_a, const Mat64& emb_b, const WeightMatrix& weights_ab,
                          const WeightMatrix& weights_ba, const LossConfig& cfg) {
  check_weights(weights_ab, emb_a.rows(), false, "srcl_symmetric");
  check_weights(weights_ba, emb_a.rows(), false, "srcl_symmetric");
  LossConfig both = cfg;
  both.direction = Direction::symmetric_sum;
  return evaluate(emb_a, emb_b, &weights_ab, &weights_ba, both);
}

LossOutput srcl_masked(const Mat64& emb_a, const Mat64& emb_b, const WeightMatrix& weights_ab,
                       const WeightMatrix& weights_ba, const LossConfig& cfg) {
  check_weights(weights_ab, emb_a.rows(), true, "srcl_masked");
  check_weights(weights_ba, emb_a.rows(), true, "srcl_masked");
  LossConfig both = cfg;
  both.direction = Direction::symmetric_sum;
  return evaluate(emb_a, emb_b, &weights_ab, &weights_ba, both);
}

}  // namespace srcl
