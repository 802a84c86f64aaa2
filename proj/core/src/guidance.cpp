#include "facdiff/guidance.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace facdiff {

std::string_view to_string(Energy e) { return e == Energy::gaussian ? "gaussian" : "similarity"; }
std::string_view to_string(Space s) { return s == Space::vector ? "vector" : "latent"; }
std::string_view to_string(JacobianMode m) {
  return m == JacobianMode::exact ? "exact" : "straight_through";
}

Energy energy_from_string(std::string_view name) {
  if (name == "gaussian") return Energy::gaussian;
  if (name == "similarity") return Energy::similarity;
  throw std::invalid_argument("unknown energy: " + std::string(name));
}

Space space_from_string(std::string_view name) {
  if (name == "vector") return Space::vector;
  if (name == "latent") return Space::latent;
  throw std::invalid_argument("unknown space: " + std::string(name));
}

JacobianMode jacobian_mode_from_string(std::string_view name) {
  if (name == "exact") return JacobianMode::exact;
  if (name == "straight_through") return JacobianMode::straight_through;
  throw std::invalid_argument("unknown jacobian mode: " + std::string(name));
}

void CouplingConfig::validate() const {
  if (!(schedule.eta > 0.0)) throw std::invalid_argument("coupling: eta must be positive");
  if (!(lambda >= 0.0)) throw std::invalid_argument("coupling: lambda must be >= 0");
  if (!(cond_clip_ratio > 0.0)) throw std::invalid_argument("coupling: cond_clip_ratio must be > 0");
  if (schedule.kind == GuidanceKind::linear && !(schedule.eta_min > 0.0 && schedule.eta_max > 0.0)) {
    throw std::invalid_argument("coupling: linear schedule needs positive eta_min/eta_max");
  }
}

namespace {

void check_factors(std::span<const Vec> estimates, const Vec& observation, std::size_t j) {
  if (estimates.empty() || j >= estimates.size()) {
    throw std::invalid_argument("energy gradient: factor index out of range");
  }
  for (const auto& e : estimates) {
    if (e.size() != observation.size()) throw std::invalid_argument("energy gradient: dim mismatch");
  }
}

std::vector<Vec> decode_all(std::span<const Vec> z, std::span<const Mat> codebooks) {
  if (z.size() != codebooks.size()) throw std::invalid_argument("latent energy: K mismatch");
  std::vector<Vec> out;
  out.reserve(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i].size() != codebooks[i].cols()) throw std::invalid_argument("latent energy: dim mismatch");
    out.push_back(gemv(codebooks[i], z[i]));
  }
  return out;
}

// Gradients w.r.t. the D-dim composed factors; the latent forms pull these
// back through X_j^T.
Vec gaussian_core(std::span<const Vec> est, const Vec& obs, std::size_t j) {
  const Vec others = product_except(est, j, obs.size());
  const Vec composed = others.cwiseProduct(est[j]);
  flops::add(3ull * obs.size());
  return (obs - composed).cwiseProduct(others);
}

Vec similarity_core(std::span<const Vec> est, const Vec& obs, std::size_t j) {
  flops::add(static_cast<std::uint64_t>(obs.size()));
  return obs.cwiseProduct(product_except(est, j, obs.size()));
}

}  // namespace

Vec gaussian_energy_grad(std::span<const Vec> estimates, const Vec& observation, std::size_t j) {
  check_factors(estimates, observation, j);
  return gaussian_core(estimates, observation, j);
}

Vec similarity_energy_grad(std::span<const Vec> estimates, const Vec& noisy_state_j,
                           const Vec& observation, std::size_t j, double lambda) {
  check_factors(estimates, observation, j);
  if (noisy_state_j.size() != observation.size()) {
    throw std::invalid_argument("similarity gradient: noisy state dim mismatch");
  }
  return similarity_core(estimates, observation, j) - lambda * noisy_state_j;
}

Vec latent_gaussian_energy_grad(std::span<const Vec> z_estimates, std::span<const Mat> codebooks,
                                const Vec& observation, std::size_t j) {
  const auto decoded = decode_all(z_estimates, codebooks);
  check_factors(decoded, observation, j);
  return gemv_t(codebooks[j], gaussian_core(decoded, observation, j));
}

Vec latent_similarity_energy_grad(std::span<const Vec> z_estimates, std::span<const Mat> codebooks,
                                  const Vec& noisy_z_j, const Vec& observation, std::size_t j,
                                  double lambda) {
  const auto decoded = decode_all(z_estimates, codebooks);
  check_factors(decoded, observation, j);
  if (noisy_z_j.size() != codebooks[j].cols()) {
    throw std::invalid_argument("latent similarity gradient: noisy state dim mismatch");
  }
  return gemv_t(codebooks[j], similarity_core(decoded, observation, j)) - lambda * noisy_z_j;
}

GuidanceResult clip_guidance(Vec g, double reference_norm, double ratio) {
  GuidanceResult out;
  out.pre_clip_norm = g.norm();
  const double bound = ratio * reference_norm;
  if (out.pre_clip_norm > bound) {
    g *= out.pre_clip_norm > 0.0 ? bound / out.pre_clip_norm : 0.0;
    out.clipped = true;
  }
  out.value = std::move(g);
  return out;
}

GuidanceResult coupled_guidance_from(std::size_t j, std::span<const Vec> noisy_states,
                                     std::span<const AnalyticPrior> priors,
                                     std::span<const MixtureEval> evals,
                                     std::span<const Vec> decoded, const Vec& observation, int t,
                                     const DiffusionSchedule& schedule,
                                     const CouplingConfig& config) {
  if (t < 1) throw std::out_of_range("coupled_guidance: t must be >= 1");
  const auto K = priors.size();
  if (noisy_states.size() != K || evals.size() != K || decoded.size() != K || j >= K) {
    throw std::invalid_argument("coupled_guidance: factor count mismatch");
  }
  const AnalyticPrior& prior = priors[j];
  check_factors(decoded, observation, j);

  Vec g = config.energy == Energy::gaussian ? gaussian_core(decoded, observation, j)
                                            : similarity_core(decoded, observation, j);
  if (config.space == Space::latent) g = gemv_t(prior.codebook().scaled(), g);
  if (config.energy == Energy::similarity && config.lambda != 0.0) {
    g -= config.lambda * noisy_states[j];
  }

  if (config.jacobian_mode == JacobianMode::exact) g = tweedie_vjp(prior, evals[j], g);
  g *= guidance_scale(config.schedule, schedule, t).value;

  const double score_norm = score(evals[j], noisy_states[j]).norm();
  return clip_guidance(std::move(g), score_norm, config.cond_clip_ratio);
}

GuidanceResult coupled_guidance(std::size_t j, std::span<const Vec> noisy_states,
                                std::span<const AnalyticPrior> priors, const Vec& observation,
                                int t, const DiffusionSchedule& schedule,
                                const CouplingConfig& config) {
  if (noisy_states.size() != priors.size()) {
    throw std::invalid_argument("coupled_guidance: factor count mismatch");
  }
  std::vector<MixtureEval> evals;
  std::vector<Vec> decoded;
  for (std::size_t i = 0; i < priors.size(); ++i) {
    evals.push_back(evaluate(priors[i], noisy_states[i], t, schedule));
    decoded.push_back(priors[i].decode(tweedie(evals.back(), noisy_states[i])));
  }
  return coupled_guidance_from(j, noisy_states, priors, evals, decoded, observation, t, schedule,
                               config);
}

}  // namespace facdiff
