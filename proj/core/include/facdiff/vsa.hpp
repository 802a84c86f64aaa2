#pragma once

// Bipolar vector-symbolic algebra: codebooks, elementwise binding, problem
// instances for the factorization task, nearest-codeword readout and scoring.

#include <cstdint>
#include <span>
#include <vector>

#include "facdiff/linalg.hpp"

namespace facdiff {

/// One factor's discrete value set: D×n bipolar columns plus a common scale.
///
/// `raw()` holds the {-1,+1} entries; `scaled()` is `scale * raw()`, so every
/// scaled column has norm `scale * sqrt(D)`. Immutable after construction.
class Codebook {
 public:
  Codebook(Mat raw, double scale);

  const Mat& raw() const noexcept { return raw_; }
  const Mat& scaled() const noexcept { return scaled_; }
  double scale() const noexcept { return scale_; }
  Eigen::Index dim() const noexcept { return raw_.rows(); }
  Eigen::Index size() const noexcept { return raw_.cols(); }
  double column_norm() const noexcept;

  friend bool operator==(const Codebook& a, const Codebook& b) {
    return a.scale_ == b.scale_ && a.raw_ == b.raw_;
  }

 private:
  Mat raw_;
  Mat scaled_;
  double scale_;
};

/// How the observation is scaled relative to the raw bipolar bound vector.
enum class ObservationScaling {
  product,  // scale^K: composing K scaled factors reproduces the observation
  single,   // scale^1
};

/// K codebooks, the planted indices and the (possibly noisy) bound vector.
struct ProblemInstance {
  std::vector<Codebook> codebooks;
  std::vector<int> true_indices;
  Vec observation;
  double noise_sigma = 0.0;
  double observation_scale = 1.0;
  std::uint64_t seed = 0;

  std::size_t factors() const noexcept { return codebooks.size(); }
  Eigen::Index dim() const noexcept { return observation.size(); }
};

struct DecodedSolution {
  std::vector<int> indices;
  std::vector<Vec> factor_estimates;
  double reconstruction_similarity = 0.0;
  int iterations_used = 0;
};

struct CleanupResult {
  int index = 0;
  double similarity = 0.0;
  bool degenerate = false;
};

/// Draws K codebooks of n distinct bipolar columns each; deterministic in seed.
/// Throws std::invalid_argument for non-positive sizes or scale, or when
/// n > 2^D makes distinct columns impossible.
std::vector<Codebook> generate_codebooks(std::uint64_t seed, int dim, int size, int factors,
                                         double scale);

/// Elementwise product of all vectors. Throws on empty input or dim mismatch.
Vec bind(std::span<const Vec> vectors);

/// Plants `true_indices`, adds superposition noise with sigma = sqrt(m - 1)
/// in raw bipolar units, and scales everything by the observation scale.
ProblemInstance make_instance(std::vector<Codebook> codebooks, std::vector<int> true_indices,
                              int m, std::uint64_t seed,
                              ObservationScaling scaling = ObservationScaling::product);

/// Fresh codebooks, uniformly drawn indices and noise, all derived from `seed`.
ProblemInstance random_instance(std::uint64_t seed, int dim, int size, int factors, int m,
                                double scale,
                                ObservationScaling scaling = ObservationScaling::product);

/// Column with the largest inner product (lowest index on ties) and its cosine.
CleanupResult cleanup(const Codebook& codebook, const Vec& estimate);
CleanupResult cleanup(const Mat& columns, const Vec& estimate);

/// Sign-invariant cleanup: the column with the largest |inner product|; the
/// reported similarity keeps its sign.
CleanupResult cleanup_magnitude(const Mat& columns, const Vec& estimate);

/// Index of the largest entry (lowest index on ties); used for latent states.
int argmax_index(const Vec& v);

double cosine(const Vec& a, const Vec& b);

/// Cosine between the observation and the raw bound vector of `indices`.
double reconstruction_similarity(const ProblemInstance& instance, std::span<const int> indices);

/// Fraction c/K of factors decoded correctly.
double accuracy(std::span<const int> decoded, const ProblemInstance& instance);
double accuracy(const DecodedSolution& solution, const ProblemInstance& instance);

}  // namespace facdiff
