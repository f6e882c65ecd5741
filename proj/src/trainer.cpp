#include "srcl/trainer.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace srcl {

namespace {

constexpr std::uint64_t kTeacherSalt = 0x7465616368ULL;
constexpr std::uint64_t kStudentSalt = 0x73747564ULL;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::string_view to_string(LossKind k) { return k == LossKind::infonce ? "infonce" : "srcl"; }

LossKind loss_kind_from_string(std::string_view s) {
  if (s == "infonce") return LossKind::infonce;
  if (s == "srcl") return LossKind::srcl;
  throw std::invalid_argument("unknown loss kind '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (batch < 2) throw std::invalid_argument("train: batch must be >= 2");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("train: learning rate must be finite and positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train: momentum must lie in [0, 1)");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("train: temperature must be finite and positive");
  }
  if (emb_dim == 0) throw std::invalid_argument("train: emb_dim must be positive");
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) throw std::invalid_argument("train: init_scale must be positive");
  regulator.validate();
}

void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              double learning_rate, double momentum) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw std::invalid_argument("sgd_step: shape mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw std::invalid_argument("sgd_step: non-finite gradient");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    velocity[k] = momentum * velocity[k] + grads[k];
    params[k] -= learning_rate * velocity[k];
  }
}

Rng training_stream(std::uint64_t seed, std::uint64_t salt) { return Rng(seed).fork(salt); }

EncoderPair initial_student(const WorldSpec& world, const TrainConfig& cfg) {
  Rng init = Rng(cfg.seed).fork(kStudentSalt + 1);
  return random_encoder_pair(world.dim_a, world.dim_b, cfg.emb_dim, cfg.hidden_dim, cfg.init_scale, init);
}

namespace {

struct StepResult {
  double loss;
  double alpha;
  double mean_fn;
  double mean_tn;
};

StepResult contrastive_step(TrainerState& st, const PairBatch& batch, const TeacherHandle* teacher,
                            double alpha, const WeightTransform& transform) {
  const TrainConfig& cfg = st.config;
  Encoder::Cache cache_a{batch.raw_a, {}};
  Encoder::Cache cache_b{batch.raw_b, {}};
  const Mat64 emb_a = st.student.a.forward(batch.raw_a, cache_a);
  const Mat64 emb_b = st.student.b.forward(batch.raw_b, cache_b);
  LossConfig loss_cfg{cfg.temperature, Direction::symmetric_sum};

  StepResult result{0.0, alpha, kNaN, kNaN};
  std::optional<LossOutput> out;
  const std::size_t n = batch.size();
  if (cfg.loss == LossKind::infonce) {
    out = info_nce(emb_a, emb_b, loss_cfg);
    bool any_fn = false, any_tn = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        (batch.false_negative(i, j) ? any_fn : any_tn) = true;
      }
    }
    result.mean_fn = any_fn ? 1.0 : kNaN;
    result.mean_tn = any_tn ? 1.0 : kNaN;
  } else {
    const Mat64 student_cos = cosine_matrix(emb_a, emb_b);
    Mat64 teacher_cos = student_cos;
    if (alpha > 0.0) {
      if (teacher == nullptr) throw std::invalid_argument("train_student: srcl with alpha > 0 needs a teacher");
      teacher_cos = cosine_matrix(teacher->model().a.forward(batch.raw_a), teacher->model().b.forward(batch.raw_b));
    }
    RegulatedWeights weights = regulate(teacher_cos, student_cos, alpha, cfg.regulator, cfg.temperature);
    if (transform) transform(weights);
    const double dev = std::max(check_condition2(weights.a_to_b), check_condition2(weights.b_to_a));
    if (dev > 1e-9) {
      throw ConditionViolation("train_student: weight rows deviate from mean 1 by " + std::to_string(dev));
    }
    const bool masked = !weights.a_to_b.active.empty() || !weights.b_to_a.active.empty();
    out = masked ? srcl_masked(emb_a, emb_b, weights.a_to_b, weights.b_to_a, loss_cfg)
                 : srcl_symmetric(emb_a, emb_b, weights.a_to_b, weights.b_to_a, loss_cfg);
    double fn_sum = 0.0, tn_sum = 0.0;
    std::size_t fn_count = 0, tn_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (!weights.a_to_b.is_active(i, j)) continue;
        if (batch.false_negative(i, j)) {
          fn_sum += weights.a_to_b.w(i, j);
          ++fn_count;
        } else {
          tn_sum += weights.a_to_b.w(i, j);
          ++tn_count;
        }
      }
    }
    result.mean_fn = fn_count > 0 ? fn_sum / static_cast<double>(fn_count) : kNaN;
    result.mean_tn = tn_count > 0 ? tn_sum / static_cast<double>(tn_count) : kNaN;
  }
  result.loss = out->value;
  if (!std::isfinite(out->value) || !out->grad_a.all_finite() || !out->grad_b.all_finite()) {
    throw TrainingDiverged(st.step, "non-finite loss or gradient");
  }
  const auto grad_a = st.student.a.backward(cache_a, out->grad_a);
  const auto grad_b = st.student.b.backward(cache_b, out->grad_b);
  sgd_step(st.student.a.params(), grad_a, st.velocity_a, cfg.learning_rate, cfg.momentum);
  sgd_step(st.student.b.params(), grad_b, st.velocity_b, cfg.learning_rate, cfg.momentum);
  return result;
}

TrainerState fresh_state(EncoderPair init, const WorldSpec& world, const TrainConfig& cfg) {
  TrainerState st{std::move(init), std::nullopt, {}, {}, 0, {}, cfg, world};
  st.velocity_a.assign(st.student.a.params().size(), 0.0);
  st.velocity_b.assign(st.student.b.params().size(), 0.0);
  return st;
}

}  // namespace

TeacherResult train_teacher(const WorldSpec& world_clean, const TrainConfig& cfg) {
  cfg.validate();
  if (world_clean.false_neg_rate != 0.0) {
    throw std::invalid_argument("train_teacher: teacher world must have false_neg_rate = 0");
  }
  TrainConfig teacher_cfg = cfg;
  teacher_cfg.loss = LossKind::infonce;
  Rng init = Rng(cfg.seed).fork(kTeacherSalt + 1);
  TrainerState st = fresh_state(
      random_encoder_pair(world_clean.dim_a, world_clean.dim_b, cfg.emb_dim, cfg.hidden_dim, cfg.init_scale, init),
      world_clean, teacher_cfg);
  World world(world_clean, training_stream(cfg.seed, kTeacherSalt));
  double last = kNaN;
  for (; st.step < teacher_cfg.steps; ++st.step) {
    const PairBatch batch = world.next_batch(teacher_cfg.batch);
    last = contrastive_step(st, batch, nullptr, 0.0, {}).loss;
  }
  return TeacherResult{TeacherHandle(std::move(st.student)), last};
}

TrainerState train_student(const WorldSpec& world_spec, const std::optional<TeacherHandle>& teacher,
                           const TrainConfig& cfg, const WeightTransform& transform) {
  cfg.validate();
  EncoderPair init = (cfg.init_from_teacher && teacher) ? teacher->model() : initial_student(world_spec, cfg);
  if (cfg.init_from_teacher && !teacher) throw std::invalid_argument("train_student: init_from_teacher needs a teacher");
  TrainerState st = fresh_state(std::move(init), world_spec, cfg);
  st.teacher = teacher;
  World world(world_spec, training_stream(cfg.seed, kStudentSalt));
  const TeacherHandle* t = teacher ? &*teacher : nullptr;
  st.history.reserve(cfg.steps);
  for (; st.step < cfg.steps; ++st.step) {
    const PairBatch batch = world.next_batch(cfg.batch);
    const double alpha = cfg.loss == LossKind::srcl ? alpha_at(cfg.regulator.alpha_schedule, st.step, cfg.steps) : 0.0;
    const StepResult r = contrastive_step(st, batch, t, alpha, transform);
    st.history.push_back({st.step, r.loss, r.alpha, r.mean_fn, r.mean_tn});
  }
  return st;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}
  std::uint64_t u(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size()) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int k = 0; k < width; ++k) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint: truncated file");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string checkpoint_bytes(const EncoderPair& model) {
  std::string out = "SRCLCKPT";
  put_u32(out, kCheckpointVersion);
  for (const Encoder* e : {&model.a, &model.b}) {
    put_u64(out, e->dim_in());
    put_u64(out, e->dim_emb());
    put_u64(out, e->hidden_dim());
    put_u64(out, e->params().size());
    for (double v : e->params()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

void save_checkpoint(const EncoderPair& model, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
  const std::string bytes = checkpoint_bytes(model);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

EncoderPair load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  Reader r(ss.str());
  if (r.take(8) != "SRCLCKPT") throw std::runtime_error("checkpoint: bad magic in " + path.string());
  const auto version = r.u(4);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported schema version " + std::to_string(version));
  }
  auto read_encoder = [&]() {
    const auto dim_in = r.u(8), dim_emb = r.u(8), hidden = r.u(8), count = r.u(8);
    Encoder e(dim_in, dim_emb, hidden);
    if (e.params().size() != count) throw std::runtime_error("checkpoint: parameter count mismatch");
    for (auto& v : e.params()) v = std::bit_cast<double>(r.u(8));
    return e;
  };
  Encoder a = read_encoder();
  Encoder b = read_encoder();
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
  return EncoderPair{std::move(a), std::move(b)};
}

std::string history_csv(std::span<const HistoryRow> history, const std::string& header_comment) {
  std::ostringstream out;
  out.precision(17);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "step,loss,alpha,mean_false_neg_weight,mean_true_neg_weight\n";
  for (const auto& h : history) {
    out << h.step << "," << h.loss << "," << h.alpha << "," << h.mean_false_neg_weight << ","
        << h.mean_true_neg_weight << "\n";
  }
  return out.str();
}

double smoothed(std::span<const double> values, std::size_t end, std::size_t window) {
  if (values.empty() || end >= values.size() || window == 0) throw std::invalid_argument("smoothed: bad range");
  const std::size_t begin = end + 1 >= window ? end + 1 - window : 0;
  double s = 0.0;
  for (std::size_t k = begin; k <= end; ++k) s += values[k];
  return s / static_cast<double>(end + 1 - begin);
}

}  // namespace srcl
