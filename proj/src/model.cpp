#include "srcl/model.hpp"

#include <cmath>
#include <cstring>

namespace srcl {

Encoder::Encoder(std::size_t dim_in, std::size_t dim_emb, std::size_t hidden_dim)
    : dim_in_(dim_in), dim_emb_(dim_emb), hidden_dim_(hidden_dim) {
  if (dim_in == 0 || dim_emb == 0) throw std::invalid_argument("Encoder: dimensions must be positive");
  std::size_t offset = 0;
  auto add = [&](std::size_t in, std::size_t out) {
    layers_.push_back({in, out, offset, offset + in * out});
    offset += in * out + out;
  };
  if (hidden_dim > 0) {
    add(dim_in, hidden_dim);
    add(hidden_dim, dim_emb);
  } else {
    add(dim_in, dim_emb);
  }
  params_.assign(offset, 0.0);
}

Encoder Encoder::random(std::size_t dim_in, std::size_t dim_emb, std::size_t hidden_dim,
                        double init_scale, Rng& rng) {
  Encoder e(dim_in, dim_emb, hidden_dim);
  for (const auto& l : e.layers_) {
    const double a = init_scale / std::sqrt(static_cast<double>(l.in));
    for (std::size_t k = 0; k < l.in * l.out; ++k) {
      e.params_[l.w_offset + k] = a * (2.0 * rng.uniform() - 1.0);
    }
  }
  return e;
}

Mat64 Encoder::apply(const Layer& l, const Mat64& x) const {
  if (x.cols() != l.in) throw std::invalid_argument("Encoder: input width mismatch");
  Mat64 out(x.rows(), l.out);
  const double* w = params_.data() + l.w_offset;
  const double* b = params_.data() + l.b_offset;
  for (std::size_t n = 0; n < x.rows(); ++n) {
    auto xr = x.row(n);
    auto o = out.row(n);
    for (std::size_t r = 0; r < l.out; ++r) {
      const double* wr = w + r * l.in;
      double s = b[r];
      for (std::size_t c = 0; c < l.in; ++c) s += wr[c] * xr[c];
      o[r] = s;
    }
  }
  return out;
}

Mat64 Encoder::forward(const Mat64& x) const {
  Cache unused{x, {}};
  return forward(x, unused);
}

Mat64 Encoder::forward(const Mat64& x, Cache& cache) const {
  cache.input = x;
  cache.hidden.clear();
  if (layers_.size() == 1) return apply(layers_[0], x);
  Mat64 h = apply(layers_[0], x);
  for (auto& v : h.flat()) v = std::tanh(v);
  cache.hidden.push_back(h);
  return apply(layers_[1], h);
}

std::vector<double> Encoder::backward(const Cache& cache, const Mat64& grad_out) const {
  std::vector<double> grad(params_.size(), 0.0);
  // dW += g^T x, db += colsum g; returns g W when requested.
  auto layer_backward = [&](const Layer& l, const Mat64& input, const Mat64& g, bool need_input_grad) {
    double* gw = grad.data() + l.w_offset;
    double* gb = grad.data() + l.b_offset;
    for (std::size_t n = 0; n < g.rows(); ++n) {
      auto gr = g.row(n);
      auto xr = input.row(n);
      for (std::size_t r = 0; r < l.out; ++r) {
        const double gv = gr[r];
        if (gv == 0.0) continue;
        gb[r] += gv;
        double* gwr = gw + r * l.in;
        for (std::size_t c = 0; c < l.in; ++c) gwr[c] += gv * xr[c];
      }
    }
    if (!need_input_grad) return Mat64(1, 1);
    Mat64 gin(g.rows(), l.in);
    const double* w = params_.data() + l.w_offset;
    for (std::size_t n = 0; n < g.rows(); ++n) {
      auto gr = g.row(n);
      auto o = gin.row(n);
      for (std::size_t r = 0; r < l.out; ++r) {
        const double gv = gr[r];
        if (gv == 0.0) continue;
        const double* wr = w + r * l.in;
        for (std::size_t c = 0; c < l.in; ++c) o[c] += gv * wr[c];
      }
    }
    return gin;
  };

  if (grad_out.cols() != dim_emb_ || grad_out.rows() != cache.input.rows()) {
    throw std::invalid_argument("Encoder::backward: gradient shape mismatch");
  }
  if (layers_.size() == 1) {
    layer_backward(layers_[0], cache.input, grad_out, false);
    return grad;
  }
  const Mat64& h = cache.hidden.at(0);
  Mat64 gh = layer_backward(layers_[1], h, grad_out, true);
  for (std::size_t k = 0; k < gh.size(); ++k) {
    const double hv = h.flat()[k];
    gh.flat()[k] *= 1.0 - hv * hv;
  }
  layer_backward(layers_[0], cache.input, gh, false);
  return grad;
}

EncoderPair random_encoder_pair(std::size_t dim_a, std::size_t dim_b, std::size_t dim_emb,
                                std::size_t hidden_dim, double init_scale, Rng& rng) {
  Encoder a = Encoder::random(dim_a, dim_emb, hidden_dim, init_scale, rng);
  Encoder b = Encoder::random(dim_b, dim_emb, hidden_dim, init_scale, rng);
  return EncoderPair{std::move(a), std::move(b)};
}

std::uint64_t checksum(const EncoderPair& pair) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::span<const double> xs) {
    for (double x : xs) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &x, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
      }
    }
  };
  feed(pair.a.params());
  feed(pair.b.params());
  return h;
}

}  // namespace srcl
