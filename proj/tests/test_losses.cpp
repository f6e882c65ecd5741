#include <gtest/gtest.h>

#include <cmath>

#include "srcl/losses.hpp"
#include "srcl/regulator.hpp"

namespace srcl {
namespace {

Mat64 random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Mat64 m(rows, cols);
  for (auto& v : m.flat()) v = rng.normal();
  return m;
}

// Direct evaluation without log-sum-exp: mean over anchors of
// -log(e_ii / (e_ii + sum_j w_ij e_ij)) with e = exp(cos / tau).
double naive_loss(const Mat64& a, const Mat64& b, const Mat64* w, double tau) {
  const std::size_t n = a.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0, num = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0, na = 0, nb = 0;
      for (std::size_t d = 0; d < a.cols(); ++d) {
        dot += a(i, d) * b(j, d);
        na += a(i, d) * a(i, d);
        nb += b(j, d) * b(j, d);
      }
      const double e = std::exp(dot / std::sqrt(na * nb) / tau);
      if (i == j) {
        num = e;
        denom += e;
      } else {
        denom += (w ? (*w)(i, j) : 1.0) * e;
      }
    }
    total += -std::log(num / denom);
  }
  return total / static_cast<double>(n);
}

TEST(InfoNce, EquallySimilarPositiveAndNegativeGivesLogTwo) {
  const Mat64 a = Mat64::from_rows({{1, 0}, {0, 1}});
  const Mat64 b = Mat64::from_rows({{1, 1}, {1, -1}});
  const LossOutput out = info_nce(a, b, {0.1, Direction::a_to_b});
  EXPECT_NEAR(out.per_anchor_values[0], std::log(2.0), 1e-15);
}

TEST(InfoNce, DominantPositiveGivesNearZeroLoss) {
  const Mat64 a = Mat64::from_rows({{1, 0}, {-1, 0}});
  const LossOutput out = info_nce(a, a, {0.07, Direction::symmetric_sum});
  EXPECT_LT(out.value, 1e-8);
  EXPECT_GE(out.value, 0.0);
}

TEST(InfoNce, MatchesNaiveEvaluationOnRandomBatch) {
  Rng rng(1);
  const Mat64 a = random_matrix(8, 8, rng), b = random_matrix(8, 8, rng);
  EXPECT_NEAR(info_nce(a, b, {0.1, Direction::a_to_b}).value, naive_loss(a, b, nullptr, 0.1), 1e-12);
  EXPECT_NEAR(info_nce(a, b, {0.1, Direction::b_to_a}).value, naive_loss(b, a, nullptr, 0.1), 1e-12);
  EXPECT_NEAR(info_nce(a, b, {0.1, Direction::symmetric_sum}).value,
              naive_loss(a, b, nullptr, 0.1) + naive_loss(b, a, nullptr, 0.1), 1e-12);
}

TEST(InfoNce, ValueIsMeanOfPerAnchorTermsAndTermsAreNonNegative) {
  Rng rng(2);
  const Mat64 a = random_matrix(6, 4, rng), b = random_matrix(6, 4, rng);
  const LossOutput out = info_nce(a, b, {0.5, Direction::symmetric_sum});
  double sum = 0;
  for (double v : out.per_anchor_values) {
    EXPECT_GE(v, 0.0);
    sum += v;
  }
  EXPECT_NEAR(out.value, sum / 6.0, 1e-15);
}

TEST(InfoNce, InvariantToPositiveRowRescaling) {
  Rng rng(3);
  const Mat64 a = random_matrix(5, 7, rng), b = random_matrix(5, 7, rng);
  Mat64 a2 = a;
  for (std::size_t i = 0; i < 5; ++i) {
    for (auto& v : a2.row(i)) v *= 0.1 + static_cast<double>(i);
  }
  EXPECT_NEAR(info_nce(a, b, {0.1, Direction::symmetric_sum}).value,
              info_nce(a2, b, {0.1, Direction::symmetric_sum}).value, 1e-12);
}

TEST(InfoNce, RejectsDegenerateInputs) {
  const Mat64 one = Mat64::from_rows({{1, 0}});
  EXPECT_THROW(info_nce(one, one, {}), std::invalid_argument);
  const Mat64 z = Mat64::from_rows({{0, 0}, {1, 0}});
  EXPECT_THROW(info_nce(z, z, {}), DegenerateInput);
  const Mat64 a = Mat64::from_rows({{1, 0}, {0, 1}});
  EXPECT_THROW(info_nce(a, a, {0.0, Direction::a_to_b}), std::invalid_argument);
  EXPECT_THROW(direction_from_string("sideways"), std::invalid_argument);
  EXPECT_EQ(direction_from_string(to_string(Direction::b_to_a)), Direction::b_to_a);
}

TEST(Srcl, UnitWeightsReproduceInfoNce) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.uniform_index(15);
    const Mat64 a = random_matrix(n, 6, rng), b = random_matrix(n, 6, rng);
    const WeightMatrix u = WeightMatrix::uniform(n);
    for (Direction d : {Direction::a_to_b, Direction::b_to_a, Direction::symmetric_sum}) {
      const LossConfig cfg{0.1, d};
      EXPECT_NEAR(srcl(a, b, u, cfg).value, info_nce(a, b, cfg).value, 1e-12);
    }
    EXPECT_NEAR(srcl_symmetric(a, b, u, u, {}).value, info_nce(a, b, {0.1, Direction::symmetric_sum}).value, 1e-12);
  }
}

TEST(Srcl, MatchesNaiveEvaluationWithRegulatorWeights) {
  Rng rng(5);
  const Mat64 a = random_matrix(4, 3, rng), b = random_matrix(4, 3, rng);
  const Mat64 s = Mat64::from_rows({{1.0, 2.0, 4.0, 1.5}, {0.5, 1.0, 2.0, 2.5}, {3.0, 1.0, 1.0, 0.7}, {1.1, 1.2, 1.3, 1.0}});
  const WeightMatrix w = weights_from_similarity(s, 1.0, 1e-6);
  EXPECT_NEAR(srcl(a, b, w, {0.2, Direction::a_to_b}).value, naive_loss(a, b, &w.w, 0.2), 1e-12);
  // For b->a rows the same matrix is read with anchor b_i.
  EXPECT_NEAR(srcl(a, b, w, {0.2, Direction::b_to_a}).value, naive_loss(b, a, &w.w, 0.2), 1e-12);
}

TEST(Srcl, VanishingWeightRemovesThatNegative) {
  Rng rng(6);
  const std::size_t n = 5;
  const Mat64 a = random_matrix(n, 4, rng), b = random_matrix(n, 4, rng);
  // Row 0: the weight of negative 2 tends to zero and the other three share
  // the remaining mass, keeping the row mean at one.
  const double eps = 1e-12;
  WeightMatrix tiny = WeightMatrix::uniform(n);
  for (std::size_t j = 1; j < n; ++j) tiny.w(0, j) = j == 2 ? eps : (4.0 - eps) / 3.0;
  WeightMatrix masked = WeightMatrix::uniform(n);
  masked.active.assign(n * n, 1);
  masked.active[0 * n + 2] = 0;
  const WeightMatrix u = WeightMatrix::uniform(n);
  const LossConfig cfg{0.1, Direction::symmetric_sum};
  const LossOutput limit = srcl_symmetric(a, b, tiny, u, cfg);
  const LossOutput removed = srcl_masked(a, b, masked, u, cfg);
  // Row 0 weights only reach b_2 through the vanishing term, so b_2's
  // gradient coincides with the run where that negative is removed.
  for (std::size_t d = 0; d < 4; ++d) EXPECT_NEAR(limit.grad_b(2, d), removed.grad_b(2, d), 1e-10);
}

TEST(Srcl, MaskedLossEqualsRemovingTheNegative) {
  Rng rng(7);
  const std::size_t n = 4;
  const Mat64 a = random_matrix(n, 3, rng), b = random_matrix(n, 3, rng);
  WeightMatrix masked = WeightMatrix::uniform(n);
  masked.active.assign(n * n, 1);
  masked.active[0 * n + 3] = 0;
  const WeightMatrix u = WeightMatrix::uniform(n);
  const LossOutput out = srcl_masked(a, b, masked, u, {0.1, Direction::symmetric_sum});
  // Anchor a_0 sees negatives 1 and 2 only; the b->a term is unmasked.
  double denom = 0;
  for (std::size_t j = 0; j < 3; ++j) denom += std::exp(cosine_sim(a.row(0), b.row(j)) / 0.1);
  const double l0 = -std::log(std::exp(cosine_sim(a.row(0), b.row(0)) / 0.1) / denom);
  const double ba0 = info_nce(a, b, {0.1, Direction::b_to_a}).per_anchor_values[0];
  EXPECT_NEAR(out.per_anchor_values[0], l0 + ba0, 1e-12);
}

TEST(Srcl, EmptyRowsAreSkippedAndCounted) {
  const std::size_t n = 3;
  Rng rng(8);
  const Mat64 a = random_matrix(n, 2, rng), b = random_matrix(n, 2, rng);
  WeightMatrix masked = WeightMatrix::uniform(n);
  masked.active.assign(n * n, 1);
  masked.active[0 * n + 1] = 0;
  masked.active[0 * n + 2] = 0;
  const WeightMatrix u = WeightMatrix::uniform(n);
  const LossOutput out = srcl_masked(a, b, masked, u, {0.1, Direction::symmetric_sum});
  EXPECT_EQ(out.skipped_anchors, 1u);
  // Only the b->a term of pair 0 remains.
  EXPECT_NEAR(out.per_anchor_values[0], info_nce(a, b, {0.1, Direction::b_to_a}).per_anchor_values[0], 1e-12);
}

TEST(Srcl, RejectsInvalidWeights) {
  const Mat64 a = Mat64::from_rows({{1, 0}, {0, 1}, {1, 1}});
  WeightMatrix w = WeightMatrix::uniform(3);
  w.w(0, 1) = 0.0;
  w.w(0, 2) = 2.0;
  EXPECT_THROW(srcl(a, a, w, {}), std::invalid_argument);
  w = WeightMatrix::uniform(3);
  w.w(1, 0) = 1.1;
  EXPECT_THROW(srcl(a, a, w, {}), std::invalid_argument);
  w = WeightMatrix::uniform(3);
  w.w(1, 0) = 1.0 + 1e-8;
  w.w(1, 2) = 1.0 - 1e-8;
  EXPECT_NO_THROW(srcl(a, a, w, {}));
  w.active.assign(9, 1);
  EXPECT_THROW(srcl(a, a, w, {}), std::invalid_argument);
  EXPECT_THROW(srcl(a, a, WeightMatrix::uniform(2), {}), std::invalid_argument);
}

TEST(SrclSymmetric, SymmetricEmbeddingsGiveEqualDirections) {
  Rng rng(9);
  const Mat64 a = random_matrix(6, 5, rng);
  const WeightMatrix u = WeightMatrix::uniform(6);
  EXPECT_NEAR(srcl(a, a, u, {0.1, Direction::a_to_b}).value, srcl(a, a, u, {0.1, Direction::b_to_a}).value, 1e-15);
}

TEST(SrclSymmetric, IsTheSumOfTheTwoDirections) {
  Rng rng(10);
  const Mat64 a = random_matrix(5, 4, rng), b = random_matrix(5, 4, rng);
  Mat64 s1(5, 5), s2(5, 5);
  for (auto& v : s1.flat()) v = std::exp(rng.uniform());
  for (auto& v : s2.flat()) v = std::exp(rng.uniform());
  const WeightMatrix w1 = weights_from_similarity(s1, 1, 1e-6), w2 = weights_from_similarity(s2, 1, 1e-6);
  const double both = srcl_symmetric(a, b, w1, w2, {0.1, Direction::symmetric_sum}).value;
  const double ab = srcl(a, b, w1, {0.1, Direction::a_to_b}).value;
  const double ba = srcl(a, b, w2, {0.1, Direction::b_to_a}).value;
  EXPECT_NEAR(both, ab + ba, 1e-12);
}

double grad_error(const Mat64& a, const Mat64& b, const std::function<LossOutput(const Mat64&, const Mat64&)>& loss) {
  const std::size_t n = a.rows(), d = a.cols();
  std::vector<double> x(a.flat().begin(), a.flat().end());
  x.insert(x.end(), b.flat().begin(), b.flat().end());
  auto split = [&](std::span<const double> p) {
    Mat64 aa(n, d, std::vector<double>(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(n * d)));
    Mat64 bb(n, d, std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(n * d), p.end()));
    return std::pair{aa, bb};
  };
  return grad_check(
      [&](std::span<const double> p) {
        auto [aa, bb] = split(p);
        return loss(aa, bb).value;
      },
      [&](std::span<const double> p) {
        auto [aa, bb] = split(p);
        const LossOutput o = loss(aa, bb);
        std::vector<double> g(o.grad_a.flat().begin(), o.grad_a.flat().end());
        g.insert(g.end(), o.grad_b.flat().begin(), o.grad_b.flat().end());
        return g;
      },
      x);
}

TEST(Gradients, InfoNceMatchesFiniteDifferences) {
  Rng rng(11);
  const Mat64 a = random_matrix(8, 8, rng), b = random_matrix(8, 8, rng);
  for (Direction dir : {Direction::a_to_b, Direction::b_to_a, Direction::symmetric_sum}) {
    EXPECT_LT(grad_error(a, b, [dir](const Mat64& x, const Mat64& y) { return info_nce(x, y, {0.1, dir}); }), 1e-4);
  }
}

TEST(Gradients, SrclSymmetricMatchesFiniteDifferences) {
  Rng rng(12);
  const Mat64 a = random_matrix(6, 8, rng), b = random_matrix(6, 8, rng);
  Mat64 s(6, 6);
  for (auto& v : s.flat()) v = std::exp(2 * rng.uniform() - 1);
  const WeightMatrix w = weights_from_similarity(s, 1, 1e-6);
  const WeightMatrix wt = weights_from_similarity(s.transposed(), 1, 1e-6);
  EXPECT_LT(grad_error(a, b, [&](const Mat64& x, const Mat64& y) { return srcl_symmetric(x, y, w, wt, {0.05}); }), 1e-4);
  WeightMatrix m = mask_below(w, 0.9);
  EXPECT_LT(grad_error(a, b, [&](const Mat64& x, const Mat64& y) { return srcl_masked(x, y, m, wt, {0.5}); }), 1e-4);
}

}  // namespace
}  // namespace srcl
