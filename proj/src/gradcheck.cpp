#include "srcl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "srcl/regulator.hpp"

namespace srcl {

namespace {

constexpr std::size_t kBatchSizes[] = {4, 8, 16};
constexpr std::size_t kDims[] = {8, 32};
constexpr Direction kDirections[] = {Direction::a_to_b, Direction::b_to_a, Direction::symmetric_sum};

Mat64 random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Mat64 m(rows, cols);
  for (auto& v : m.flat()) v = rng.normal();
  return m;
}

WeightMatrix random_weights(std::size_t n, Rng& rng) {
  Mat64 s(n, n);
  for (auto& v : s.flat()) v = std::exp(2.0 * rng.uniform() - 1.0);
  return weights_from_similarity(s, 1.0, 1e-6);
}

struct Instance {
  Mat64 a;
  Mat64 b;
};

Instance unpack(std::span<const double> x, std::size_t n, std::size_t d) {
  Instance in{Mat64(n, d), Mat64(n, d)};
  std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n * d), in.a.flat().begin());
  std::copy(x.begin() + static_cast<std::ptrdiff_t>(n * d), x.end(), in.b.flat().begin());
  return in;
}

std::vector<double> pack(const Mat64& a, const Mat64& b) {
  std::vector<double> x(a.flat().begin(), a.flat().end());
  x.insert(x.end(), b.flat().begin(), b.flat().end());
  return x;
}

}  // namespace

nlohmann::json to_json(const GradcheckCell& c) {
  return nlohmann::json{{"check", "gradcheck"},
                        {"loss", c.loss},
                        {"temperature", c.temperature},
                        {"instances", c.instances},
                        {"max_rel_error", c.max_rel_error},
                        {"worst_n", c.worst_n},
                        {"worst_d", c.worst_d},
                        {"worst_direction", to_string(c.worst_direction)},
                        {"passed", c.passed}};
}

bool GradcheckReport::passed() const {
  return std::all_of(cells.begin(), cells.end(), [](const GradcheckCell& c) { return c.passed; });
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  if (options.instances == 0) throw std::invalid_argument("gradcheck: need at least one instance");
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("gradcheck: tolerance must be positive");
  GradcheckReport report;
  const char* losses[] = {"infonce", "srcl"};
  for (std::size_t li = 0; li < 2; ++li) {
    for (std::size_t ti = 0; ti < options.temperatures.size(); ++ti) {
      const double tau = options.temperatures[ti];
      GradcheckCell cell;
      cell.loss = losses[li];
      cell.temperature = tau;
      cell.instances = options.instances;
      Rng rng = Rng(options.seed).fork(li * 1000 + ti);
      for (std::size_t k = 0; k < options.instances; ++k) {
        const std::size_t n = kBatchSizes[k % 3];
        const std::size_t d = kDims[(k / 3) % 2];
        const Direction dir = kDirections[(k / 6) % 3];
        const LossConfig cfg{tau, dir};
        const Mat64 a = random_matrix(n, d, rng);
        const Mat64 b = random_matrix(n, d, rng);
        const WeightMatrix w_ab = random_weights(n, rng);
        const WeightMatrix w_ba = random_weights(n, rng);
        auto evaluate = [&](std::span<const double> x) {
          const Instance in = unpack(x, n, d);
          if (li == 0) return info_nce(in.a, in.b, cfg);
          if (dir == Direction::symmetric_sum) return srcl_symmetric(in.a, in.b, w_ab, w_ba, cfg);
          return srcl(in.a, in.b, w_ab, cfg);
        };
        const ScalarFn f = [&](std::span<const double> x) { return evaluate(x).value; };
        const GradientFn g = [&](std::span<const double> x) {
          const LossOutput out = evaluate(x);
          std::vector<double> grad = pack(out.grad_a, out.grad_b);
          if (options.corrupt_gradient) grad[0] += 1e-2;
          return grad;
        };
        const std::vector<double> x0 = pack(a, b);
        const double err = grad_check(f, g, x0);
        if (err > cell.max_rel_error || k == 0) {
          cell.max_rel_error = std::max(cell.max_rel_error, err);
          cell.worst_n = n;
          cell.worst_d = d;
          cell.worst_direction = dir;
        }
      }
      cell.passed = cell.max_rel_error < options.tolerance;
      report.max_rel_error = std::max(report.max_rel_error, cell.max_rel_error);
      report.cells.push_back(cell);
    }
  }
  return report;
}

}  // namespace srcl
