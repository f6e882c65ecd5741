#include "srcl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace srcl {

namespace {

void require_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument(std::string(what) + ": non-finite entry");
    }
  }
}

}  // namespace

Vec64::Vec64(std::size_t n, double fill) : data_(n, fill) {
  if (n == 0) throw std::invalid_argument("Vec64: length must be positive");
  require_finite(data_, "Vec64");
}

Vec64::Vec64(std::vector<double> values) : data_(std::move(values)) {
  if (data_.empty()) throw std::invalid_argument("Vec64: length must be positive");
  require_finite(data_, "Vec64");
}

Vec64::Vec64(std::initializer_list<double> values) : Vec64(std::vector<double>(values)) {}

Mat64::Mat64(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("Mat64: dimensions must be positive");
  require_finite(data_, "Mat64");
}

Mat64::Mat64(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("Mat64: dimensions must be positive");
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("Mat64: value count " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
  require_finite(data_, "Mat64");
}

Mat64 Mat64::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw std::invalid_argument("Mat64: no rows");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw std::invalid_argument("Mat64: ragged rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Mat64(rows.size(), cols, std::move(values));
}

Mat64 Mat64::transposed() const {
  Mat64 out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  }
  return out;
}

bool Mat64::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Mat64 matmul_abt(const Mat64& a, const Mat64& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_abt: inner dimensions differ");
  Mat64 out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

Mat64 matmul(const Mat64& a, const Mat64& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Mat64 out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Mat64 matmul_atb(const Mat64& a, const Mat64& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_atb: row counts differ");
  Mat64 out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto a_row = a.row(k);
    auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_sim: dimension mismatch");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateInput("cosine_sim: zero-norm input");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Mat64 cosine_matrix(const Mat64& a, const Mat64& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("cosine_matrix: dimension mismatch");
  std::vector<double> inv_a(a.rows());
  std::vector<double> inv_b(b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double n = norm2(a.row(i));
    if (n == 0.0) throw DegenerateInput("cosine_matrix: zero-norm row " + std::to_string(i));
    inv_a[i] = 1.0 / n;
  }
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const double n = norm2(b.row(j));
    if (n == 0.0) throw DegenerateInput("cosine_matrix: zero-norm row " + std::to_string(j));
    inv_b[j] = 1.0 / n;
  }
  Mat64 out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      out(i, j) = std::clamp(dot(a.row(i), b.row(j)) * inv_a[i] * inv_b[j], -1.0, 1.0);
    }
  }
  return out;
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) throw DegenerateInput("log_sum_exp: empty input");
  const double m = *std::max_element(xs.begin(), xs.end());
  if (m == -std::numeric_limits<double>::infinity()) {
    throw DegenerateInput("log_sum_exp: every entry is -inf");
  }
  if (!std::isfinite(m)) throw DegenerateInput("log_sum_exp: non-finite input");
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> xs) {
  const double lse = log_sum_exp(xs);
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = std::exp(xs[i] - lse);
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return splitmix64(seed_ + counter_ * 0x9e3779b97f4a7c15ULL);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::uniform_index: n must be positive");
  // Rejection sampling keeps the result exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Rng::normal() {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::categorical(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("Rng::categorical: empty distribution");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("Rng::categorical: weights must be finite and non-negative");
    }
    total += p;
  }
  if (total <= 0.0) throw std::invalid_argument("Rng::categorical: zero total weight");
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last_positive;
}

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double v : xs) s += v;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

Rng Rng::fork(std::uint64_t stream_id) const {
  return Rng(splitmix64(seed_ ^ splitmix64(stream_id + 0x5851f42d4c957f2dULL)));
}

double grad_check(const ScalarFn& f, const GradientFn& analytic_grad, std::span<const double> point,
                  double step) {
  if (!(step >= 1e-7 && step <= 1e-3)) {
    throw std::invalid_argument("grad_check: step must lie in [1e-7, 1e-3]");
  }
  std::vector<double> x(point.begin(), point.end());
  const std::vector<double> analytic = analytic_grad(x);
  if (analytic.size() != x.size()) throw std::invalid_argument("grad_check: gradient size mismatch");

  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + step;
    const double fp = f(x);
    x[k] = saved - step;
    const double fm = f(x);
    x[k] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw DegenerateInput("grad_check: non-finite function value at coordinate " +
                            std::to_string(k));
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double err = std::abs(numeric - analytic[k]) / std::max(1.0, std::abs(analytic[k]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace srcl
