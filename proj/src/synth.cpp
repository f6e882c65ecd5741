#include "srcl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace srcl {

DiscreteJoint::DiscreteJoint(Mat64 table) : table_(std::move(table)) {
  if (table_.rows() > kMaxAlphabet || table_.cols() > kMaxAlphabet) {
    throw std::invalid_argument("DiscreteJoint: alphabet larger than 64");
  }
  px_.assign(table_.rows(), 0.0);
  py_.assign(table_.cols(), 0.0);
  double total = 0.0;
  for (std::size_t x = 0; x < table_.rows(); ++x) {
    for (std::size_t y = 0; y < table_.cols(); ++y) {
      const double v = table_(x, y);
      if (v < 0.0) throw std::invalid_argument("DiscreteJoint: negative probability");
      px_[x] += v;
      py_[y] += v;
      total += v;
    }
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("DiscreteJoint: probabilities sum to " + std::to_string(total));
  }
  for (double v : px_) {
    if (v <= 0.0) throw std::invalid_argument("DiscreteJoint: dead symbol in X marginal");
  }
  for (double v : py_) {
    if (v <= 0.0) throw std::invalid_argument("DiscreteJoint: dead symbol in Y marginal");
  }
}

std::vector<double> DiscreteJoint::conditional_y(std::size_t x) const {
  std::vector<double> out(ny());
  for (std::size_t y = 0; y < ny(); ++y) out[y] = table_(x, y) / px_[x];
  return out;
}

DiscreteJoint make_bsc_joint(double p_agree) {
  if (!(p_agree > 0.0 && p_agree < 1.0)) {
    throw std::invalid_argument("make_bsc_joint: p_agree must lie in (0, 1)");
  }
  const double a = p_agree / 2.0;
  const double b = (1.0 - p_agree) / 2.0;
  return DiscreteJoint(Mat64(2, 2, {a, b, b, a}));
}

DiscreteJoint make_deterministic_joint(std::size_t k) {
  if (k < 2) throw std::invalid_argument("make_deterministic_joint: k must be >= 2");
  Mat64 t(k, k);
  for (std::size_t i = 0; i < k; ++i) t(i, i) = 1.0 / static_cast<double>(k);
  return DiscreteJoint(std::move(t));
}

DiscreteJoint make_independent_joint(std::span<const double> px, std::span<const double> py) {
  Mat64 t(px.size(), py.size());
  for (std::size_t x = 0; x < px.size(); ++x) {
    for (std::size_t y = 0; y < py.size(); ++y) t(x, y) = px[x] * py[y];
  }
  return DiscreteJoint(std::move(t));
}

DiscreteJoint make_random_joint(std::size_t nx, std::size_t ny, Rng& rng) {
  Mat64 t(nx, ny);
  double total = 0.0;
  for (auto& v : t.flat()) {
    v = 0.05 + rng.uniform();
    total += v;
  }
  for (auto& v : t.flat()) v /= total;
  // Absorb the rounding residue into one cell so the sum is 1 to the last ulp.
  double sum = 0.0;
  for (double v : t.flat()) sum += v;
  t(0, 0) += 1.0 - sum;
  return DiscreteJoint(std::move(t));
}

std::vector<double> negative_conditional(const DiscreteJoint& joint, double dep_rate,
                                         std::size_t x) {
  if (!(dep_rate >= 0.0 && dep_rate <= 1.0)) {
    throw std::invalid_argument("negative_conditional: dependence rate outside [0, 1]");
  }
  std::vector<double> q(joint.ny());
  for (std::size_t y = 0; y < joint.ny(); ++y) {
    q[y] = dep_rate * joint.p(x, y) / joint.px(x) + (1.0 - dep_rate) * joint.py(y);
  }
  return q;
}

std::vector<SymbolPair> sample_batch_with_dependence(const DiscreteJoint& joint, std::size_t n,
                                                     double dep_rate, Rng& rng) {
  if (n < 2) throw std::invalid_argument("sample_batch_with_dependence: N must be >= 2");
  if (!(dep_rate >= 0.0 && dep_rate <= 1.0)) {
    throw std::invalid_argument("sample_batch_with_dependence: dependence rate outside [0, 1]");
  }
  const std::size_t cell = rng.categorical(joint.table().flat());
  const std::size_t x = cell / joint.ny();
  std::vector<SymbolPair> out;
  out.reserve(n);
  out.push_back({x, cell % joint.ny()});
  const auto conditional = joint.conditional_y(x);
  for (std::size_t j = 1; j < n; ++j) {
    const bool dependent = rng.uniform() < dep_rate;
    const std::size_t y = dependent ? rng.categorical(conditional) : rng.categorical(joint.marginal_y());
    out.push_back({x, y});
  }
  return out;
}

void WorldSpec::validate() const {
  if (n_concepts == 0 || dim_a == 0 || dim_b == 0 || latent_dim == 0) {
    throw std::invalid_argument("WorldSpec: sizes must be positive");
  }
  if (latent_dim + instance_dim > dim_a || latent_dim + instance_dim > dim_b) {
    throw std::invalid_argument("WorldSpec: latent_dim + instance_dim exceeds a modality dimension");
  }
  if (!(instance_scale >= 0.0) || !std::isfinite(instance_scale)) {
    throw std::invalid_argument("WorldSpec: instance_scale must be finite and >= 0");
  }
  if (!(cluster_spread > 0.0 && cluster_spread <= 1.0)) {
    throw std::invalid_argument("WorldSpec: cluster_spread must lie in (0, 1]");
  }
  if (n_clusters > n_concepts) throw std::invalid_argument("WorldSpec: more clusters than concepts");
  if (instance_scale > 0.0 && instance_dim == 0) {
    throw std::invalid_argument("WorldSpec: instance_scale > 0 needs instance_dim > 0");
  }
  if (!(emb_noise >= 0.0) || !std::isfinite(emb_noise)) {
    throw std::invalid_argument("WorldSpec: emb_noise must be finite and >= 0");
  }
  if (!(false_neg_rate >= 0.0 && false_neg_rate < 1.0)) {
    throw std::invalid_argument("WorldSpec: false_neg_rate must lie in [0, 1)");
  }
  if (!(partial_overlap >= 0.0 && partial_overlap <= 1.0)) {
    throw std::invalid_argument("WorldSpec: partial_overlap must lie in [0, 1]");
  }
  if (n_concepts < 2 && false_neg_rate > 0.0) {
    throw std::invalid_argument("WorldSpec: n_concepts < 2 cannot host false negatives");
  }
}

WorldSpec WorldSpec::clean() const {
  WorldSpec out = *this;
  out.false_neg_rate = 0.0;
  return out;
}

std::vector<std::uint8_t> concept_overlap_mask(std::span<const std::int64_t> concept_ids,
                                               std::span<const std::int64_t> blend_ids) {
  const std::size_t n = concept_ids.size();
  if (blend_ids.size() != n) throw std::invalid_argument("concept_overlap_mask: size mismatch");
  std::vector<std::uint8_t> mask(n * n, 0);
  auto shares = [&](std::size_t i, std::size_t j) {
    const std::int64_t a[2] = {concept_ids[i], blend_ids[i]};
    const std::int64_t b[2] = {concept_ids[j], blend_ids[j]};
    for (std::int64_t u : a) {
      if (u < 0) continue;
      for (std::int64_t v : b) {
        if (u == v) return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && shares(i, j)) mask[i * n + j] = 1;
    }
  }
  return mask;
}

namespace {

// Random matrix with orthonormal columns (modified Gram-Schmidt).
Mat64 orthonormal_columns(std::size_t rows, std::size_t cols, Rng& rng) {
  Mat64 m(rows, cols);
  for (auto& v : m.flat()) v = rng.normal();
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t prev = 0; prev < c; ++prev) {
      double proj = 0.0;
      for (std::size_t r = 0; r < rows; ++r) proj += m(r, c) * m(r, prev);
      for (std::size_t r = 0; r < rows; ++r) m(r, c) -= proj * m(r, prev);
    }
    double n = 0.0;
    for (std::size_t r = 0; r < rows; ++r) n += m(r, c) * m(r, c);
    n = std::sqrt(n);
    for (std::size_t r = 0; r < rows; ++r) m(r, c) /= n;
  }
  return m;
}

Mat64 column_block(const Mat64& m, std::size_t first, std::size_t count) {
  Mat64 out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, first + c);
  }
  return out;
}

}  // namespace

World::World(WorldSpec spec, Rng stream)
    : spec_(std::move(spec)),
      stream_(stream),
      proto_a_(1, 1),
      proto_b_(1, 1),
      inst_lift_a_(1, 1),
      inst_lift_b_(1, 1) {
  spec_.validate();
  Rng proto_rng(splitmix64(spec_.seed ^ 0x70726f746fULL));
  const std::size_t k = spec_.latent_dim;
  const std::size_t m = spec_.instance_dim;
  Mat64 latent(spec_.n_concepts, k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));
  for (auto& v : latent.flat()) v = proto_rng.normal() * scale;
  if (spec_.n_clusters > 0) {
    Mat64 centres(spec_.n_clusters, k);
    for (auto& v : centres.flat()) v = proto_rng.normal() * scale;
    const double s = spec_.cluster_spread;
    const double shared = std::sqrt(1.0 - s * s);
    for (std::size_t c = 0; c < spec_.n_concepts; ++c) {
      const auto centre = centres.row(c % spec_.n_clusters);
      auto row = latent.row(c);
      for (std::size_t d = 0; d < k; ++d) row[d] = shared * centre[d] + s * row[d];
    }
  }
  const Mat64 lift_a = orthonormal_columns(spec_.dim_a, k + m, proto_rng);
  const Mat64 lift_b = orthonormal_columns(spec_.dim_b, k + m, proto_rng);
  proto_a_ = matmul_abt(latent, column_block(lift_a, 0, k));
  proto_b_ = matmul_abt(latent, column_block(lift_b, 0, k));
  if (m > 0) {
    inst_lift_a_ = column_block(lift_a, k, m);
    inst_lift_b_ = column_block(lift_b, k, m);
  }
}

PairBatch World::assemble(std::span<const std::int64_t> concepts,
                          std::span<const std::int64_t> blends, Rng& rng, bool shared_instances) const {
  const std::size_t n = concepts.size();
  Mat64 raw_a(n, spec_.dim_a);
  Mat64 raw_b(n, spec_.dim_b);
  const std::size_t m = spec_.instance_dim;
  std::vector<double> inst(m);
  auto draw_instance = [&]() {
    const double s = spec_.instance_scale / std::sqrt(static_cast<double>(m));
    for (auto& v : inst) v = s * rng.normal();
  };
  auto add_instance = [&](Mat64& out, const Mat64& lift, std::size_t i) {
    auto row = out.row(i);
    for (std::size_t d = 0; d < row.size(); ++d) {
      for (std::size_t c = 0; c < m; ++c) row[d] += lift(d, c) * inst[c];
    }
  };
  auto emit = [&](Mat64& out, const Mat64& proto, std::size_t i) {
    const auto c = static_cast<std::size_t>(concepts[i]);
    auto row = out.row(i);
    if (blends[i] >= 0) {
      const auto c2 = static_cast<std::size_t>(blends[i]);
      for (std::size_t d = 0; d < row.size(); ++d) row[d] = 0.5 * proto(c, d) + 0.5 * proto(c2, d);
    } else {
      for (std::size_t d = 0; d < row.size(); ++d) row[d] = proto(c, d);
    }
    if (spec_.emb_noise > 0.0) {
      for (auto& v : row) v += spec_.emb_noise * rng.normal();
    }
  };
  const bool with_instances = m > 0 && spec_.instance_scale > 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    emit(raw_a, proto_a_, i);
    emit(raw_b, proto_b_, i);
    if (!with_instances) continue;
    draw_instance();
    add_instance(raw_a, inst_lift_a_, i);
    if (!shared_instances) draw_instance();
    add_instance(raw_b, inst_lift_b_, i);
  }
  PairBatch batch{std::move(raw_a), std::move(raw_b),
                  std::vector<std::int64_t>(concepts.begin(), concepts.end()),
                  std::vector<std::int64_t>(blends.begin(), blends.end()),
                  {}};
  batch.is_false_negative = concept_overlap_mask(batch.concept_ids, batch.blend_ids);
  return batch;
}

PairBatch World::next_batch(std::size_t n) {
  if (n == 0) throw std::invalid_argument("World::next_batch: empty batch");
  std::vector<std::int64_t> concepts(n);
  std::vector<std::int64_t> blends(n, -1);
  const double rho = spec_.false_neg_rate;
  const auto n_concepts = static_cast<std::uint64_t>(spec_.n_concepts);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && rho > 0.0 && stream_.uniform() < rho) {
      const auto donor = static_cast<std::size_t>(stream_.uniform_index(i));
      concepts[i] = concepts[donor];
      if (stream_.uniform() < spec_.partial_overlap) {
        // Partial false negative: equal blend with a different concept.
        std::int64_t other = concepts[i];
        while (other == concepts[i]) other = static_cast<std::int64_t>(stream_.uniform_index(n_concepts));
        blends[i] = other;
      }
    } else {
      concepts[i] = static_cast<std::int64_t>(stream_.uniform_index(n_concepts));
    }
  }
  return assemble(concepts, blends, stream_, true);
}

PairBatch World::validation_set(std::size_t n, std::uint64_t salt) const {
  if (n == 0 || n > spec_.n_concepts) {
    throw std::invalid_argument("World::validation_set: need 1 <= n <= n_concepts");
  }
  Rng rng(splitmix64(spec_.seed ^ 0x76616c6964ULL ^ splitmix64(salt)));
  // Partial Fisher-Yates over concept ids gives n distinct concepts.
  std::vector<std::int64_t> ids(spec_.n_concepts);
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(spec_.n_concepts - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(n);
  std::vector<std::int64_t> blends(n, -1);
  return assemble(ids, blends, rng, false);
}

World gen_world(const WorldSpec& spec, Rng rng) { return World(spec, rng); }

}  // namespace srcl
