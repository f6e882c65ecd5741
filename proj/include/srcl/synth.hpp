#pragma once

// Ground-truth worlds: small discrete joints with exactly computable mutual
// information, and a continuous two-modality embedding world with injected
// (partial) false negatives and a ground-truth mask.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "srcl/numerics.hpp"

namespace srcl {

inline constexpr std::size_t kMaxAlphabet = 64;

/// Probability table p(x, y) over alphabets of size <= 64. Entries are
/// non-negative, sum to one within 1e-12 and both marginals are strictly
/// positive.
class DiscreteJoint {
 public:
  explicit DiscreteJoint(Mat64 table);

  std::size_t nx() const { return table_.rows(); }
  std::size_t ny() const { return table_.cols(); }
  double p(std::size_t x, std::size_t y) const { return table_(x, y); }
  double px(std::size_t x) const { return px_[x]; }
  double py(std::size_t y) const { return py_[y]; }
  const std::vector<double>& marginal_x() const { return px_; }
  const std::vector<double>& marginal_y() const { return py_; }
  /// p(y | x) as a row.
  std::vector<double> conditional_y(std::size_t x) const;
  const Mat64& table() const { return table_; }

 private:
  Mat64 table_;
  std::vector<double> px_;
  std::vector<double> py_;
};

/// Symmetric binary channel with uniform input: [[p/2, (1-p)/2], [(1-p)/2, p/2]].
DiscreteJoint make_bsc_joint(double p_agree);
/// Diagonal joint with p(x, x) = 1/k.
DiscreteJoint make_deterministic_joint(std::size_t k);
/// Product of the two given marginals.
DiscreteJoint make_independent_joint(std::span<const double> px, std::span<const double> py);
/// Random joint with full support, drawn from the given generator.
DiscreteJoint make_random_joint(std::size_t nx, std::size_t ny, Rng& rng);

/// Conditional law of one negative given the anchor symbol x:
/// q(y | x) = eta * p(y | x) + (1 - eta) * p(y).
std::vector<double> negative_conditional(const DiscreteJoint& joint, double dep_rate,
                                         std::size_t x);

struct SymbolPair {
  std::size_t x;
  std::size_t y;
};

/// One batch for the anchor at index 0: element 0 is the positive (x, y)
/// drawn from the joint, elements 1..N-1 share x and carry negatives drawn
/// from negative_conditional(joint, dep_rate, x).
std::vector<SymbolPair> sample_batch_with_dependence(const DiscreteJoint& joint, std::size_t n,
                                                     double dep_rate, Rng& rng);

struct WorldSpec {
  std::size_t n_concepts = 4096;
  std::size_t dim_a = 32;
  std::size_t dim_b = 32;
  /// Dimension of the shared concept space both modalities are projected from.
  std::size_t latent_dim = 16;
  double emb_noise = 0.1;
  /// Pair-specific detail shared by the two sides of a training pair: a
  /// random vector of this dimension and total scale, lifted into each
  /// modality through a fixed map orthogonal to the concept space. 0 disables.
  std::size_t instance_dim = 0;
  double instance_scale = 0.0;
  /// Concepts c with equal c mod n_clusters share a cluster centre; a
  /// concept's latent is sqrt(1 - spread^2) * centre + spread * offset, so
  /// same-cluster concepts are hard negatives. 0 disables clustering.
  std::size_t n_clusters = 0;
  double cluster_spread = 1.0;
  double false_neg_rate = 0.0;
  double partial_overlap = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
  /// Same prototypes, no injected false negatives.
  WorldSpec clean() const;

  bool operator==(const WorldSpec&) const = default;
};

/// One mini-batch of paired raw inputs. Slot i has a primary concept and,
/// for a partial false negative, a second blended concept (-1 otherwise).
struct PairBatch {
  Mat64 raw_a;
  Mat64 raw_b;
  std::vector<std::int64_t> concept_ids;
  std::vector<std::int64_t> blend_ids;
  /// Row-major N x N; entry (i, j) set when j != i shares a concept with i.
  std::vector<std::uint8_t> is_false_negative;

  std::size_t size() const { return concept_ids.size(); }
  bool false_negative(std::size_t i, std::size_t j) const {
    return is_false_negative[i * size() + j] != 0;
  }
};

/// Mask consistent with the slot concept sets of a batch.
std::vector<std::uint8_t> concept_overlap_mask(std::span<const std::int64_t> concept_ids,
                                               std::span<const std::int64_t> blend_ids);

/// Concept prototypes of a world plus a stream of batches. Prototypes depend
/// only on (n_concepts, dims, latent_dim, seed); the batch stream only on
/// the generator passed in, so a clean world and its noisy counterpart share
/// prototypes.
class World {
 public:
  World(WorldSpec spec, Rng stream);

  const WorldSpec& spec() const { return spec_; }
  const Mat64& prototypes_a() const { return proto_a_; }
  const Mat64& prototypes_b() const { return proto_b_; }

  PairBatch next_batch(std::size_t n);

  /// n held-out clean pairs with pairwise distinct concepts, drawn from an
  /// evaluation stream fixed by the world seed and the given salt. The two
  /// sides of a validation pair are independent instances of its concept
  /// (no shared instance detail), so retrieval is judged at concept level.
  PairBatch validation_set(std::size_t n, std::uint64_t salt = 0) const;

 private:
  PairBatch assemble(std::span<const std::int64_t> concepts, std::span<const std::int64_t> blends,
                     Rng& rng, bool shared_instances) const;

  WorldSpec spec_;
  Rng stream_;
  Mat64 proto_a_;
  Mat64 proto_b_;
  Mat64 inst_lift_a_;
  Mat64 inst_lift_b_;
};

World gen_world(const WorldSpec& spec, Rng rng);

}  // namespace srcl
