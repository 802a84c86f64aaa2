#pragma once

// Analytic Gaussian-mixture diffusion prior for one factor.
//
// The time-t marginal is (1/n) sum_c N(x; alpha_t c, omega_t^2 I) over the
// mixture centers c (scaled codebook columns in vector space, one-hot basis
// vectors in latent space). Every quantity below is derived from a single
// tempered logit
//
//   l_c(x) = temp * (alpha_t c.x - alpha_t^2 |c|^2 / 2) / omega_t^2
//
// so the score, denoiser and its Jacobian stay mutually consistent for any
// softmax temperature. At temp = 1 they are the exact mixture quantities.

#include <memory>

#include "facdiff/linalg.hpp"
#include "facdiff/schedule.hpp"
#include "facdiff/vsa.hpp"

namespace facdiff {

enum class Space { vector, latent };

class AnalyticPrior {
 public:
  /// Centers are the scaled codebook columns; states live in R^D.
  static AnalyticPrior vector_space(const Codebook& codebook, double softmax_temp = 1.0);
  /// Centers are e_1..e_n; states live in R^n and decode through the codebook.
  static AnalyticPrior latent_space(const Codebook& codebook, double softmax_temp = 1.0);

  Space space() const noexcept { return space_; }
  double softmax_temp() const noexcept { return temp_; }
  const Codebook& codebook() const noexcept { return *codebook_; }
  Eigen::Index state_dim() const noexcept;
  Eigen::Index components() const noexcept { return codebook_->size(); }
  double center_sq_norm() const noexcept { return center_sq_norm_; }

  /// Mean of the mixture centers.
  Vec center_mean() const;
  /// Column c of the center matrix.
  Vec center(Eigen::Index c) const;
  /// C^T x.
  Vec centers_transpose_times(const Vec& x) const;
  /// C w, skipping exact-zero weights.
  Vec centers_times(const Vec& w) const;
  /// Maps a state to R^D (identity in vector space, X z in latent space).
  Vec decode(const Vec& state) const;
  /// Index of the center a state reads out as.
  CleanupResult readout(const Vec& state) const;

 private:
  AnalyticPrior(std::shared_ptr<const Codebook> codebook, Space space, double temp);

  std::shared_ptr<const Codebook> codebook_;
  Space space_;
  double temp_;
  double center_sq_norm_;  // all centers share one norm
};

/// Everything the mixture quantities at (state, t) need; computed once.
struct MixtureEval {
  int t = 0;
  double alpha = 1.0;
  double beta2 = 0.0;
  double omega2 = 0.0;
  double sigma0_sq = 0.0;
  double logit_scale = 0.0;  // d l_c / d(c.x) = temp * alpha / omega^2
  double log_sum_exp = 0.0;  // of the tempered logits
  Vec gamma;                 // responsibilities
  Vec weighted_center;       // C gamma
};

/// Throws std::domain_error when omega_t = 0 (t = 0 with sigma0 = 0).
MixtureEval evaluate(const AnalyticPrior& prior, const Vec& state, int t,
                     const DiffusionSchedule& schedule);

double log_density(const AnalyticPrior& prior, const Vec& state, int t,
                   const DiffusionSchedule& schedule);

Vec responsibilities(const AnalyticPrior& prior, const Vec& state, int t,
                     const DiffusionSchedule& schedule);

Vec score(const MixtureEval& eval, const Vec& state);
Vec score(const AnalyticPrior& prior, const Vec& state, int t, const DiffusionSchedule& schedule);

/// Posterior-mean denoiser: (beta^2/omega^2) C gamma + (alpha sigma0^2/omega^2) x.
Vec tweedie(const MixtureEval& eval, const Vec& state);
Vec tweedie(const AnalyticPrior& prior, const Vec& state, int t, const DiffusionSchedule& schedule);

/// The same denoiser via (x + beta^2 score) / alpha; undefined at alpha = 0.
Vec tweedie_from_score(const MixtureEval& eval, const Vec& state);

/// J^T v for J = d tweedie / d state (J is symmetric). O(D n).
Vec tweedie_vjp(const AnalyticPrior& prior, const MixtureEval& eval, const Vec& v);
Vec tweedie_vjp(const AnalyticPrior& prior, const Vec& state, int t,
                const DiffusionSchedule& schedule, const Vec& v);

}  // namespace facdiff
