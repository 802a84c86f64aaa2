#pragma once

// Reconstruction energies that couple the K factor estimates to the
// observation, and the guidance term added to each factor's prior score.

#include <span>
#include <string_view>
#include <vector>

#include "facdiff/linalg.hpp"
#include "facdiff/schedule.hpp"
#include "facdiff/score.hpp"

namespace facdiff {

enum class Energy { gaussian, similarity };
enum class JacobianMode { exact, straight_through };

std::string_view to_string(Energy e);
std::string_view to_string(Space s);
std::string_view to_string(JacobianMode m);
Energy energy_from_string(std::string_view name);
Space space_from_string(std::string_view name);
JacobianMode jacobian_mode_from_string(std::string_view name);

struct CouplingConfig {
  Energy energy = Energy::similarity;
  Space space = Space::vector;
  GuidanceSchedule schedule;  // kind and eta (inverse guidance strength)
  double lambda = 0.0;        // similarity regularizer only
  double cond_clip_ratio = 1.0;
  JacobianMode jacobian_mode = JacobianMode::exact;

  void validate() const;
};

/// (obs - prod_i est_i) * prod_{i != j} est_i: gradient of -1/2 |obs - prod est|^2.
Vec gaussian_energy_grad(std::span<const Vec> estimates, const Vec& observation, std::size_t j);

/// obs * prod_{i != j} est_i - lambda * noisy_state_j.
Vec similarity_energy_grad(std::span<const Vec> estimates, const Vec& noisy_state_j,
                           const Vec& observation, std::size_t j, double lambda);

/// X_j^T[(obs - prod_i X_i z_i) * prod_{i != j} X_i z_i]. `codebooks` holds the X_i.
Vec latent_gaussian_energy_grad(std::span<const Vec> z_estimates, std::span<const Mat> codebooks,
                                const Vec& observation, std::size_t j);

/// X_j^T(obs * prod_{i != j} X_i z_i) - lambda * noisy_z_j.
Vec latent_similarity_energy_grad(std::span<const Vec> z_estimates, std::span<const Mat> codebooks,
                                  const Vec& noisy_z_j, const Vec& observation, std::size_t j,
                                  double lambda);

struct GuidanceResult {
  Vec value;
  double pre_clip_norm = 0.0;
  bool clipped = false;
};

/// Rescales g so that |g| <= ratio * reference_norm; direction is preserved.
GuidanceResult clip_guidance(Vec g, double reference_norm, double ratio);

/// Guidance for factor j given every factor's mixture evaluation at step t.
/// `decoded` holds the denoised estimates mapped to R^D (X_i z_i in latent space).
GuidanceResult coupled_guidance_from(std::size_t j, std::span<const Vec> noisy_states,
                                     std::span<const AnalyticPrior> priors,
                                     std::span<const MixtureEval> evals,
                                     std::span<const Vec> decoded, const Vec& observation, int t,
                                     const DiffusionSchedule& schedule,
                                     const CouplingConfig& config);

/// Guidance for factor j: energy gradient at the denoised estimates, pulled
/// back through the denoiser (exact mode), scaled by the guidance schedule and
/// clipped relative to factor j's prior score. Requires t >= 1.
GuidanceResult coupled_guidance(std::size_t j, std::span<const Vec> noisy_states,
                                std::span<const AnalyticPrior> priors, const Vec& observation,
                                int t, const DiffusionSchedule& schedule,
                                const CouplingConfig& config);

}  // namespace facdiff
