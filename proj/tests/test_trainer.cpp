#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "srcl/eval.hpp"
#include "srcl/model.hpp"
#include "srcl/trainer.hpp"

namespace srcl {
namespace {

WorldSpec small_world() {
  WorldSpec w;
  w.n_concepts = 256;
  w.dim_a = 12;
  w.dim_b = 10;
  w.latent_dim = 6;
  w.emb_noise = 0.1;
  w.false_neg_rate = 0.3;
  w.partial_overlap = 0.5;
  w.seed = 3;
  return w;
}

TrainConfig small_train(std::size_t steps = 60) {
  TrainConfig c;
  c.steps = steps;
  c.batch = 16;
  c.emb_dim = 6;
  c.seed = 5;
  return c;
}

WorldSpec separable_world() {
  WorldSpec w;
  w.n_concepts = 8;
  w.dim_a = 16;
  w.dim_b = 16;
  w.latent_dim = 8;
  w.emb_noise = 0.0;
  w.seed = 1;
  return w;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("srcl_test_" + name);
}

TEST(Encoder, BackwardMatchesFiniteDifferences) {
  Rng rng(1);
  for (std::size_t hidden : {0u, 5u}) {
    const Encoder enc = Encoder::random(4, 3, hidden, 1.0, rng);
    Mat64 x(6, 4), g(6, 3);
    for (auto& v : x.flat()) v = rng.normal();
    for (auto& v : g.flat()) v = rng.normal();
    const auto loss = [&](std::span<const double> p) {
      Encoder e = enc;
      std::copy(p.begin(), p.end(), e.params().begin());
      const Mat64 y = e.forward(x);
      double s = 0;
      for (std::size_t k = 0; k < y.size(); ++k) s += y.flat()[k] * g.flat()[k];
      return s;
    };
    const auto grad = [&](std::span<const double> p) {
      Encoder e = enc;
      std::copy(p.begin(), p.end(), e.params().begin());
      Encoder::Cache cache{x, {}};
      e.forward(x, cache);
      return e.backward(cache, g);
    };
    const std::vector<double> p(enc.params().begin(), enc.params().end());
    EXPECT_LT(grad_check(loss, grad, p), 1e-6) << "hidden " << hidden;
  }
}

TEST(Encoder, InitialisationRespectsFanIn) {
  Rng rng(2);
  const Encoder enc = Encoder::random(25, 4, 0, 2.0, rng);
  const double a = 2.0 / 5.0;
  std::size_t zeros = 0;
  for (double v : enc.params()) {
    EXPECT_LE(std::abs(v), a);
    zeros += v == 0.0;
  }
  EXPECT_EQ(zeros, 4u);
}

TEST(SgdStep, PlainAndMomentumUpdates) {
  std::vector<double> p = {1.0, -2.0}, v = {0.0, 0.0};
  const std::vector<double> g = {0.5, -1.0};
  sgd_step(p, g, v, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(p[0], 0.95);
  EXPECT_DOUBLE_EQ(p[1], -1.9);

  std::vector<double> q = {0.0}, vq = {1.0};
  const std::vector<double> gq = {2.0};
  sgd_step(q, gq, vq, 0.5, 0.9);
  EXPECT_DOUBLE_EQ(vq[0], 2.9);
  EXPECT_DOUBLE_EQ(q[0], -1.45);

  const std::vector<double> bad = {NAN, 0.0};
  EXPECT_THROW(sgd_step(p, bad, v, 0.1, 0.9), std::invalid_argument);
  const std::vector<double> short_g = {1.0};
  EXPECT_THROW(sgd_step(p, short_g, v, 0.1, 0.9), std::invalid_argument);
}

TEST(SgdStep, QuadraticBowlFollowsTheHeavyBallRecurrence) {
  // On f = |p|^2 each coordinate obeys p' = 1.7 p - 0.9 p_prev, whose roots
  // 0.85 +- 0.42131i have modulus sqrt(0.9).
  const std::vector<double> start = {3.0, -4.0, 1.5};
  std::vector<double> p = start, v(3, 0.0);
  const double r = std::sqrt(0.9);
  const double theta = std::atan2(std::sqrt(0.9 - 0.85 * 0.85), 0.85);
  const double c = (0.8 - 0.85) / std::sqrt(0.9 - 0.85 * 0.85);
  std::size_t first_below = 0;
  for (std::size_t t = 1; t <= 400; ++t) {
    std::vector<double> g(3);
    for (std::size_t k = 0; k < 3; ++k) g[k] = 2.0 * p[k];
    sgd_step(p, g, v, 0.1, 0.9);
    const double closed = std::pow(r, t) * (std::cos(t * theta) + c * std::sin(t * theta));
    double norm = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      ASSERT_NEAR(p[k], start[k] * closed, 1e-12);
      norm += p[k] * p[k];
    }
    if (first_below == 0 && std::sqrt(norm) < 1e-6) first_below = t;
  }
  EXPECT_GT(first_below, 200u);
  EXPECT_LE(first_below, 400u);
  double norm = 0;
  for (double x : p) norm += x * x;
  EXPECT_LT(std::sqrt(norm), 1e-6);
}

TEST(TrainConfig, Validation) {
  TrainConfig c = small_train();
  EXPECT_NO_THROW(c.validate());
  c.batch = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_train();
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_train();
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(loss_kind_from_string(to_string(LossKind::srcl)), LossKind::srcl);
  EXPECT_THROW(loss_kind_from_string("triplet"), std::invalid_argument);
}

TEST(Trainer, TeacherNeedsACleanWorld) {
  EXPECT_THROW(train_teacher(small_world(), small_train()), std::invalid_argument);
  EXPECT_NO_THROW(train_teacher(small_world().clean(), small_train(5)));
}

TEST(Trainer, SrclWithoutTeacherIsRejected) {
  EXPECT_THROW(train_student(small_world(), std::nullopt, small_train()), std::invalid_argument);
  TrainConfig c = small_train();
  c.regulator.alpha_schedule = AlphaSchedule::pinned(0.0);
  EXPECT_NO_THROW(train_student(small_world(), std::nullopt, c));
}

TEST(Trainer, RunsAreBitIdenticalForEqualSeeds) {
  const TeacherHandle t = train_teacher(small_world().clean(), small_train(30)).teacher;
  const TrainerState a = train_student(small_world(), t, small_train());
  const TrainerState b = train_student(small_world(), t, small_train());
  EXPECT_EQ(checkpoint_bytes(a.student), checkpoint_bytes(b.student));
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
  TrainConfig other = small_train();
  other.seed = 6;
  EXPECT_NE(checkpoint_bytes(train_student(small_world(), t, other).student), checkpoint_bytes(a.student));
}

TEST(Trainer, TeacherIsNeverModified) {
  const TeacherHandle t = train_teacher(small_world().clean(), small_train(30)).teacher;
  const std::uint64_t before = t.checksum();
  train_student(small_world(), t, small_train());
  EXPECT_EQ(t.checksum(), before);
}

TEST(Trainer, HistoryTracksScheduleAndLoss) {
  const TeacherHandle t = train_teacher(small_world().clean(), small_train(100)).teacher;
  const TrainerState st = train_student(small_world(), t, small_train(200));
  ASSERT_EQ(st.history.size(), 200u);
  EXPECT_EQ(st.history.front().alpha, 1.0);
  for (std::size_t k = 1; k < st.history.size(); ++k) EXPECT_LE(st.history[k].alpha, st.history[k - 1].alpha);
  std::vector<double> losses;
  for (const auto& row : st.history) losses.push_back(row.loss);
  EXPECT_LT(smoothed(losses, 199, 20), smoothed(losses, 19, 20));
}

TEST(Trainer, InfonceIgnoresTheRegulator) {
  TrainConfig a = small_train();
  a.loss = LossKind::infonce;
  TrainConfig b = a;
  b.regulator.similarity_scale = 5.0;
  b.regulator.alpha_schedule = AlphaSchedule::pinned(0.4);
  const TrainerState sa = train_student(small_world(), std::nullopt, a);
  const TrainerState sb = train_student(small_world(), std::nullopt, b);
  EXPECT_EQ(checkpoint_bytes(sa.student), checkpoint_bytes(sb.student));
  for (const auto& row : sa.history) {
    if (!std::isnan(row.mean_true_neg_weight)) {
      EXPECT_EQ(row.mean_true_neg_weight, 1.0);
    }
  }
}

TEST(Trainer, InitFromTeacherCopiesParameters) {
  const TeacherHandle t = train_teacher(small_world().clean(), small_train(20)).teacher;
  TrainConfig c = small_train(0);
  c.init_from_teacher = true;
  EXPECT_EQ(train_student(small_world(), t, c).student, t.model());
}

TEST(Trainer, SeparableTeacherRetrievesHeldOutPairs) {
  TrainConfig c;
  c.steps = 500;
  c.batch = 8;
  c.emb_dim = 8;
  const TeacherHandle t = train_teacher(separable_world(), c).teacher;
  const RetrievalReport r = validation_retrieval(t.model(), separable_world(), 8);
  EXPECT_GT(r.a_to_b.at(1), 0.95);
  EXPECT_GT(r.b_to_a.at(1), 0.95);
}

TEST(Checkpoint, RoundTripsExactly) {
  Rng rng(3);
  const EncoderPair m = random_encoder_pair(7, 5, 3, 4, 1.0, rng);
  const auto path = temp_file("roundtrip.ckpt");
  save_checkpoint(m, path);
  const EncoderPair back = load_checkpoint(path);
  EXPECT_EQ(back, m);
  EXPECT_EQ(checksum(back), checksum(m));
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  Rng rng(4);
  const std::string bytes = checkpoint_bytes(random_encoder_pair(3, 3, 2, 0, 1.0, rng));
  const auto write = [](const std::filesystem::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary) << s;
  };
  const auto path = temp_file("corrupt.ckpt");
  write(path, bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  write(path, "NOTACKPT" + bytes.substr(8));
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  std::string wrong_version = bytes;
  wrong_version[8] = 9;
  write(path, wrong_version);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  write(path, bytes + "x");
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
}

TEST(HistoryCsv, HeaderCommentAndColumns) {
  const std::vector<HistoryRow> rows = {{0, 1.5, 1.0, 0.25, 1.0}, {1, 1.25, 0.5, NAN, 1.0}};
  const std::string csv = history_csv(rows, "provenance x");
  EXPECT_EQ(csv.rfind("# provenance x\nstep,loss,alpha,mean_false_neg_weight,mean_true_neg_weight\n", 0), 0u);
  EXPECT_NE(csv.find("\n1,"), std::string::npos);
  EXPECT_THROW(smoothed(std::vector<double>{}, 0, 1), std::invalid_argument);
  const std::vector<double> v = {1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(smoothed(v, 3, 2), 3.5);
  EXPECT_DOUBLE_EQ(smoothed(v, 0, 5), 1.0);
}

}  // namespace
}  // namespace srcl
