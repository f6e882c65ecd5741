#pragma once

// Dense double-precision containers and the elementary numerics every other
// module builds on: cosine similarity, stable log-sum-exp and softmax, a
// counter-based RNG, and a central-difference gradient checker.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace srcl {

/// Raised for inputs a numerical routine cannot give a meaningful answer for
/// (zero-norm vectors, empty ranges, non-finite probes).
class DegenerateInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Contiguous vector of finite doubles with strictly positive length.
class Vec64 {
 public:
  explicit Vec64(std::size_t n, double fill = 0.0);
  explicit Vec64(std::vector<double> values);
  Vec64(std::initializer_list<double> values);

  std::size_t size() const { return data_.size(); }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  std::span<const double> span() const { return data_; }
  std::span<double> span() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool operator==(const Vec64&) const = default;

 private:
  std::vector<double> data_;
};

/// Row-major matrix of finite doubles with strictly positive dimensions.
class Mat64 {
 public:
  Mat64(std::size_t rows, std::size_t cols, double fill = 0.0);
  Mat64(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Mat64 from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols_, cols_); }

  std::span<const double> flat() const { return data_; }
  std::span<double> flat() { return data_; }

  Mat64 transposed() const;
  bool all_finite() const;

  bool operator==(const Mat64&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

/// C = A * B^T  (A: n x d, B: m x d).
Mat64 matmul_abt(const Mat64& a, const Mat64& b);
/// C = A * B  (A: n x k, B: k x m).
Mat64 matmul(const Mat64& a, const Mat64& b);
/// C = A^T * B  (A: k x n, B: k x m).
Mat64 matmul_atb(const Mat64& a, const Mat64& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// Cosine similarity of two vectors, normalised internally and clamped to
/// [-1, 1]. Throws DegenerateInput on a zero-norm argument.
double cosine_sim(std::span<const double> a, std::span<const double> b);

/// Pairwise cosine similarity, out(i, j) = cos(a_i, b_j).
Mat64 cosine_matrix(const Mat64& a, const Mat64& b);

/// log(sum(exp(x))) by max-shift. Entries equal to -inf contribute zero; at
/// least one entry must be finite.
double log_sum_exp(std::span<const double> xs);

std::vector<double> softmax(std::span<const double> xs);

/// Recursive pairwise summation; the order depends only on the length, so
/// results are reproducible and the rounding error grows as O(log n).
double pairwise_sum(std::span<const double> xs);

/// Counter-based generator: draw k is splitmix64(seed + (k + 1) * golden),
/// so the stream depends only on the seed and is identical on every
/// platform. Uniform doubles use the top 53 bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal via Box-Muller; consumes two uniforms per draw.
  double normal();
  /// Index drawn from a discrete distribution given by non-negative weights.
  std::size_t categorical(std::span<const double> probs);

  /// Independent stream derived from this one's seed and a stream id.
  Rng fork(std::uint64_t stream_id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

using ScalarFn = std::function<double(std::span<const double>)>;
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

/// Maximum over coordinates of |numeric - analytic| / max(1, |analytic|),
/// where numeric is the central difference (f(x + h e_k) - f(x - h e_k)) / 2h.
double grad_check(const ScalarFn& f, const GradientFn& analytic_grad, std::span<const double> point,
                  double step = 1e-5);

}  // namespace srcl
