#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "srcl/eval.hpp"

namespace srcl {
namespace {

const std::vector<std::size_t> kAllKs = {1, 2, 3, 4, 5};

// Rank of the true match: candidates scoring higher, plus ties at lower index.
std::size_t brute_rank(const Mat64& s, std::size_t q, std::size_t gt) {
  std::size_t rank = 0;
  for (std::size_t j = 0; j < s.cols(); ++j) {
    if (s(q, j) > s(q, gt) || (s(q, j) == s(q, gt) && j < gt)) ++rank;
  }
  return rank;
}

WorldSpec noisy_world() {
  WorldSpec w;
  w.n_concepts = 512;
  w.dim_a = 16;
  w.dim_b = 16;
  w.latent_dim = 8;
  w.emb_noise = 0.05;
  w.false_neg_rate = 0.3;
  w.partial_overlap = 0.5;
  w.seed = 2;
  return w;
}

TrainConfig quick_train(std::size_t steps) {
  TrainConfig c;
  c.steps = steps;
  c.batch = 32;
  c.emb_dim = 8;
  c.seed = 4;
  return c;
}

TEST(RecallAtK, FiveByFiveTableAgainstEnumeration) {
  const Mat64 s = Mat64::from_rows({{0.9, 0.1, 0.3, 0.2, 0.0},
                                    {0.5, 0.4, 0.6, 0.1, 0.2},
                                    {0.2, 0.2, 0.2, 0.9, 0.1},
                                    {0.3, 0.3, 0.1, 0.3, 0.3},
                                    {0.0, 0.8, 0.7, 0.6, 0.5}});
  const std::vector<std::size_t> gt = {0, 1, 2, 3, 4};
  // Ranks: 0, 2, 3 (tie with two lower indices, then 0.9), 2 (ties at 0 and 1), 4.
  const auto r = recall_at_k_from_scores(s, gt, kAllKs);
  for (std::size_t k : kAllKs) {
    std::size_t hits = 0;
    for (std::size_t q = 0; q < 5; ++q) hits += brute_rank(s, q, gt[q]) < k;
    EXPECT_DOUBLE_EQ(r.at(k), hits / 5.0) << "K=" << k;
  }
  EXPECT_DOUBLE_EQ(r.at(1), 0.2);
  EXPECT_DOUBLE_EQ(r.at(3), 0.6);
  EXPECT_DOUBLE_EQ(r.at(5), 1.0);
}

TEST(RecallAtK, SelfRetrievalIsPerfect) {
  Rng rng(1);
  Mat64 e(40, 12);
  for (auto& v : e.flat()) v = rng.normal();
  std::vector<std::size_t> gt(40);
  std::iota(gt.begin(), gt.end(), 0);
  const std::vector<std::size_t> ks = {1, 5, 10};
  EXPECT_DOUBLE_EQ(recall_at_k(e, e, gt, ks).at(1), 1.0);
}

TEST(RecallAtK, RandomGalleryIsAtChance) {
  Rng rng(2);
  Mat64 q(2000, 256), g(100, 256);
  for (auto& v : q.flat()) v = rng.normal();
  for (auto& v : g.flat()) v = rng.normal();
  std::vector<std::size_t> gt(2000);
  for (auto& x : gt) x = rng.uniform_index(100);
  const std::vector<std::size_t> ks = {1, 10};
  const auto r = recall_at_k(q, g, gt, ks);
  // Binomial(2000, p) standard deviations: 0.0022 at p = 0.01, 0.0067 at p = 0.1.
  EXPECT_NEAR(r.at(1), 0.01, 4 * 0.0022);
  EXPECT_NEAR(r.at(10), 0.1, 4 * 0.0067);
}

TEST(RecallAtK, RejectsBadKAndGroundTruth) {
  const Mat64 s(3, 3, 0.0);
  const std::vector<std::size_t> gt = {0, 1, 2}, bad_gt = {0, 1, 3};
  const std::vector<std::size_t> zero = {0}, big = {4}, ok = {3};
  EXPECT_THROW(recall_at_k_from_scores(s, gt, zero), std::invalid_argument);
  EXPECT_THROW(recall_at_k_from_scores(s, gt, big), std::invalid_argument);
  EXPECT_THROW(recall_at_k_from_scores(s, bad_gt, ok), std::invalid_argument);
  EXPECT_DOUBLE_EQ(recall_at_k_from_scores(s, gt, ok).at(3), 1.0);
}

TEST(RecallAtK, MonotoneInK) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    Mat64 s(20, 20);
    for (auto& v : s.flat()) v = std::round(4 * rng.normal()) / 4;
    std::vector<std::size_t> gt(20);
    for (auto& x : gt) x = rng.uniform_index(20);
    const std::vector<std::size_t> ks = {1, 2, 5, 10, 20};
    const auto r = recall_at_k_from_scores(s, gt, ks);
    double prev = 0.0;
    for (std::size_t k : ks) {
      EXPECT_GE(r.at(k), prev);
      EXPECT_LE(r.at(k), 1.0);
      prev = r.at(k);
    }
    EXPECT_DOUBLE_EQ(r.at(20), 1.0);
  }
}

TEST(Retrieval, ReportJsonAndMeanR1) {
  RetrievalReport r;
  r.a_to_b = {{1, 0.5}, {5, 0.75}};
  r.b_to_a = {{1, 0.25}, {5, 1.0}};
  r.n_queries = 4;
  EXPECT_DOUBLE_EQ(r.mean_r1(), 0.375);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("n_queries").get<std::size_t>(), 4u);
}

TEST(WeightHistogram, InfonceStateIsASpikeAtOne) {
  TrainConfig c = quick_train(20);
  c.loss = LossKind::infonce;
  const TrainerState st = train_student(noisy_world(), std::nullopt, c);
  const WeightHistogram h = weight_histogram(st, noisy_world(), 10);
  EXPECT_EQ(h.total, 10u * 32 * 31);
  EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t{0}), h.total);
  EXPECT_EQ(h.mean_true_neg, 1.0);
  EXPECT_EQ(h.edges.size(), h.counts.size() + 1);
  const std::size_t one_bin = static_cast<std::size_t>(1.0 / 4.0 * 40);
  EXPECT_EQ(h.counts[one_bin], h.total);
}

TEST(WeightHistogram, ConservesMassAndSeparatesFalseNegatives) {
  const TeacherHandle t = train_teacher(noisy_world().clean(), quick_train(300)).teacher;
  const TrainerState st = train_student(noisy_world(), t, quick_train(300));
  const WeightHistogram h = weight_histogram(st, noisy_world(), 20);
  EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t{0}), h.total);
  EXPECT_EQ(h.total, 20u * 32 * 31);
  EXPECT_EQ(h.n_false_neg + h.n_true_neg, h.total);
  EXPECT_GT(h.n_false_neg, 0u);
  EXPECT_LT(h.mean_false_neg, h.mean_true_neg);
  const auto j = to_json(h);
  EXPECT_TRUE(j.contains("mean_false_neg"));
}

TEST(WeightHistogram, SeparableCleanWorldConcentratesNearOne) {
  WorldSpec w;
  w.n_concepts = 4096;
  w.dim_a = 192;
  w.dim_b = 192;
  w.latent_dim = 192;
  w.emb_noise = 0.0;
  w.seed = 1;
  TrainConfig c;
  c.steps = 300;
  c.emb_dim = 192;
  c.regulator.similarity_scale = 1.0;
  const TeacherHandle t = train_teacher(w, c).teacher;
  const TrainerState st = train_student(w, t, c);
  const WeightHistogram h = weight_histogram(st, w, 20);
  EXPECT_GE(h.fraction_within(0.8, 1.2), 0.9);
}

TEST(ThresholdSweep, ZeroThresholdEqualsTheUnmaskedRun) {
  const WorldSpec w = noisy_world();
  const TeacherHandle t = train_teacher(w.clean(), quick_train(60)).teacher;
  const TrainerState st = train_student(w, t, quick_train(60));
  const std::vector<double> thresholds = {0.0, 0.3};
  SweepOptions opt;
  opt.n_val = 128;
  const auto points = threshold_mask_sweep(st, w, thresholds, opt);
  ASSERT_EQ(points.size(), 2u);
  const RetrievalReport direct = validation_retrieval(st.student, w, 128);
  EXPECT_EQ(points[0].report.a_to_b, direct.a_to_b);
  EXPECT_EQ(points[0].report.b_to_a, direct.b_to_a);
  EXPECT_EQ(points[0].skipped_rows, 0u);
  EXPECT_FALSE(points[1].diverged);

  const std::string csv = sweep_csv(points, "provenance y");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("threshold,r_at_1_ab,r_at_1_ba,skipped_rows"), std::string::npos);
}

TEST(ThresholdSweep, RejectsBadThresholdGrids) {
  const TrainerState st = train_student(noisy_world(), std::nullopt, [] {
    TrainConfig c = quick_train(2);
    c.loss = LossKind::infonce;
    return c;
  }());
  const std::vector<double> descending = {0.3, 0.1}, outside = {0.0, 1.5};
  EXPECT_THROW(threshold_mask_sweep(st, noisy_world(), descending), std::invalid_argument);
  EXPECT_THROW(threshold_mask_sweep(st, noisy_world(), outside), std::invalid_argument);
}

}  // namespace
}  // namespace srcl
