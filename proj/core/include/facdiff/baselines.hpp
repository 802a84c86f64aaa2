#pragma once

// Reference decomposition methods operating on raw bipolar codebooks:
// the sign resonator, the softmax (attention) resonator, and cyclic
// alternating least squares over one-hot coefficient vectors.

#include <cstdint>
#include <span>
#include <vector>

#include "facdiff/linalg.hpp"
#include "facdiff/vsa.hpp"

namespace facdiff {

struct BaselineConfig {
  int iterations = 100;  // N
  double attention_beta = 250.0;
  bool normalize_logits = true;  // divide attention logits by D
  bool convergence_check = true;

  void validate() const;
};

struct BaselineResult {
  DecodedSolution solution;
  int executed_iterations = 0;
  bool converged = false;     // fixed point reached
  bool oscillating = false;   // period-2 cycle detected
  bool underdetermined = false;
  bool rank_deficient = false;
  std::uint64_t flops = 0;
};

/// Raw codebook matrices of an instance.
std::vector<Mat> raw_codebooks(const ProblemInstance& instance);
/// Observation in raw bipolar units.
Vec raw_observation(const ProblemInstance& instance);
/// Codebook column means.
std::vector<Vec> mean_estimates(std::span<const Mat> codebooks);

/// sgn with sgn(0) = +1.
Vec bipolar_sign(const Vec& v);

/// Simultaneous update x_j <- sgn(X_j X_j^T (obs * prod_{i != j} x_i)).
std::vector<Vec> resonator_step(std::span<const Mat> codebooks, const Vec& observation,
                                std::span<const Vec> estimates);

/// x_j <- X_j softmax(logit_scale * X_j^T (obs * prod_{i != j} x_i)).
std::vector<Vec> attention_resonator_step(std::span<const Mat> codebooks, const Vec& observation,
                                          std::span<const Vec> estimates, double logit_scale);

/// Logit multiplier used by attention_resonator_run for dimension D.
double attention_logit_scale(const BaselineConfig& config, Eigen::Index dim);

/// Least-squares update of z_j with the other coefficient vectors fixed:
/// argmin |obs - diag(prod_{i != j} X_i z_i) X_j z_j|, minimum norm when
/// rank deficient.
Vec als_solve_factor(std::span<const Mat> codebooks, const Vec& observation,
                     std::span<const Vec> z, std::size_t j, bool* rank_deficient = nullptr);

/// |obs - prod_i X_i z_i|.
double als_residual(std::span<const Mat> codebooks, const Vec& observation, std::span<const Vec> z);

BaselineResult resonator_run(const ProblemInstance& instance, const BaselineConfig& config);
BaselineResult attention_resonator_run(const ProblemInstance& instance,
                                       const BaselineConfig& config);
BaselineResult als_run(const ProblemInstance& instance, const BaselineConfig& config);

}  // namespace facdiff
