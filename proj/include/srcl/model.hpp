#pragma once

// Small dense encoders for the two modalities. Parameters live in one flat
// buffer so the optimizer and checkpoint code can treat them uniformly.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "srcl/numerics.hpp"

namespace srcl {

/// Affine map dim_in -> dim_emb, optionally preceded by one tanh hidden layer.
class Encoder {
 public:
  /// Forward activations kept for the backward pass.
  struct Cache {
    Mat64 input;
    std::vector<Mat64> hidden;  // post-activation, empty without a hidden layer
  };

  Encoder(std::size_t dim_in, std::size_t dim_emb, std::size_t hidden_dim);

  /// Uniform(-a, a) weights with a = init_scale / sqrt(fan_in), zero biases.
  static Encoder random(std::size_t dim_in, std::size_t dim_emb, std::size_t hidden_dim,
                        double init_scale, Rng& rng);

  std::size_t dim_in() const { return dim_in_; }
  std::size_t dim_emb() const { return dim_emb_; }
  std::size_t hidden_dim() const { return hidden_dim_; }

  Mat64 forward(const Mat64& x) const;
  Mat64 forward(const Mat64& x, Cache& cache) const;
  /// Gradient of the loss with respect to the flat parameter buffer.
  std::vector<double> backward(const Cache& cache, const Mat64& grad_out) const;

  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }

  bool operator==(const Encoder&) const = default;

 private:
  struct Layer {
    std::size_t in;
    std::size_t out;
    std::size_t w_offset;
    std::size_t b_offset;

    bool operator==(const Layer&) const = default;
  };

  Mat64 apply(const Layer& l, const Mat64& x) const;

  std::size_t dim_in_;
  std::size_t dim_emb_;
  std::size_t hidden_dim_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

struct EncoderPair {
  Encoder a;
  Encoder b;

  bool operator==(const EncoderPair&) const = default;
};

EncoderPair random_encoder_pair(std::size_t dim_a, std::size_t dim_b, std::size_t dim_emb,
                                std::size_t hidden_dim, double init_scale, Rng& rng);

/// FNV-1a over the raw parameter bytes of both encoders.
std::uint64_t checksum(const EncoderPair& pair);

}  // namespace srcl
