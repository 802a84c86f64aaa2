#include "facdiff/sampler.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace facdiff {

std::string_view to_string(Integrator v) { return v == Integrator::ode ? "ode" : "sde"; }
std::string_view to_string(RestartJump v) {
  return v == RestartJump::deterministic ? "deterministic" : "stochastic";
}
std::string_view to_string(UpdateOrder v) {
  return v == UpdateOrder::jacobi ? "jacobi" : "gauss_seidel";
}
std::string_view to_string(Readout v) {
  return v == Readout::best_of_restarts ? "best_of_restarts" : "final_restart";
}

Integrator integrator_from_string(std::string_view s) {
  if (s == "ode") return Integrator::ode;
  if (s == "sde") return Integrator::sde;
  throw std::invalid_argument("unknown integrator: " + std::string(s));
}
RestartJump restart_jump_from_string(std::string_view s) {
  if (s == "deterministic") return RestartJump::deterministic;
  if (s == "stochastic") return RestartJump::stochastic;
  throw std::invalid_argument("unknown restart jump: " + std::string(s));
}
UpdateOrder update_order_from_string(std::string_view s) {
  if (s == "jacobi") return UpdateOrder::jacobi;
  if (s == "gauss_seidel") return UpdateOrder::gauss_seidel;
  throw std::invalid_argument("unknown update order: " + std::string(s));
}
Readout readout_from_string(std::string_view s) {
  if (s == "best_of_restarts") return Readout::best_of_restarts;
  if (s == "final_restart") return Readout::final_restart;
  throw std::invalid_argument("unknown readout: " + std::string(s));
}

int SamplerConfig::restart_index() const {
  // The epsilon absorbs representation error in products like 0.1 * 50.
  return static_cast<int>(std::floor(rho * steps + 1e-9));
}

double SamplerConfig::restart_time() const {
  return static_cast<double>(restart_index()) / steps;
}

int SamplerConfig::iteration_budget() const { return restarts * restart_index(); }

void SamplerConfig::validate() const {
  if (steps < 2) throw std::invalid_argument("sampler: T must be >= 2");
  if (restarts < 1) throw std::invalid_argument("sampler: R must be >= 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("sampler: rho must be in [0,1]");
}

std::vector<AnalyticPrior> make_priors(const ProblemInstance& instance, Space space,
                                       double softmax_temp) {
  std::vector<AnalyticPrior> priors;
  priors.reserve(instance.factors());
  for (const auto& cb : instance.codebooks) {
    priors.push_back(space == Space::vector ? AnalyticPrior::vector_space(cb, softmax_temp)
                                            : AnalyticPrior::latent_space(cb, softmax_temp));
  }
  return priors;
}

std::vector<FactorState> init_states(std::span<const AnalyticPrior> priors) {
  std::vector<FactorState> out;
  out.reserve(priors.size());
  for (const auto& p : priors) out.push_back({p.center_mean(), 0, 0});
  return out;
}

Vec forward_jump(const Vec& state0, int tau, const DiffusionSchedule& schedule, RestartJump mode,
                 Rng& rng) {
  if (tau < 0 || tau > schedule.steps()) throw std::out_of_range("forward_jump: tau outside 0..T");
  Vec out = schedule.alpha(tau) * state0;
  if (mode == RestartJump::stochastic && tau > 0) {
    out += schedule.beta(tau) * standard_normal(state0.size(), rng);
  }
  return out;
}

namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

struct StepWork {
  std::vector<MixtureEval> evals;
  std::vector<Vec> decoded;
};

void refresh(StepWork& work, std::size_t i, std::span<const Vec> xs,
             std::span<const AnalyticPrior> priors, int t, const DiffusionSchedule& schedule) {
  work.evals[i] = evaluate(priors[i], xs[i], t, schedule);
  work.decoded[i] = priors[i].decode(tweedie(work.evals[i], xs[i]));
}

}  // namespace

std::vector<FactorState> reverse_step(std::span<const FactorState> states, int t,
                                      std::span<const AnalyticPrior> priors,
                                      const Vec& observation, const CouplingConfig& coupling,
                                      const DiffusionSchedule& schedule, Integrator integrator,
                                      Rng& rng, StepTelemetry* telemetry, UpdateOrder order) {
  if (t < 1 || t > schedule.steps()) throw std::out_of_range("reverse_step: t outside 1..T");
  const std::size_t K = priors.size();
  if (states.size() != K) throw std::invalid_argument("reverse_step: factor count mismatch");

  std::vector<Vec> xs;
  xs.reserve(K);
  for (const auto& s : states) xs.push_back(s.value);

  StepWork work{std::vector<MixtureEval>(K), std::vector<Vec>(K)};
  for (std::size_t i = 0; i < K; ++i) refresh(work, i, xs, priors, t, schedule);

  const double a = schedule.step_retention(t);
  const double inv_sqrt_a = 1.0 / std::sqrt(a);
  const double b = 1.0 - a;

  std::vector<Vec> next(K);
  StepTelemetry local;
  for (std::size_t j = 0; j < K; ++j) {
    const GuidanceResult g = coupled_guidance_from(j, xs, priors, work.evals, work.decoded,
                                                   observation, t, schedule, coupling);
    if (g.clipped) ++local.clip_activations;
    const Vec cond_score = score(work.evals[j], xs[j]) + g.value;
    if (integrator == Integrator::ode) {
      next[j] = (xs[j] + 0.5 * b * cond_score) * inv_sqrt_a;
    } else {
      next[j] = (xs[j] + b * cond_score) * inv_sqrt_a +
                std::sqrt(b) * standard_normal(xs[j].size(), rng);
    }
    if (!all_finite(next[j])) local.diverged = true;
    if (order == UpdateOrder::gauss_seidel && j + 1 < K && !local.diverged) {
      xs[j] = next[j];
      refresh(work, j, xs, priors, t, schedule);
    }
  }
  if (telemetry) *telemetry = local;

  std::vector<FactorState> out(K);
  for (std::size_t j = 0; j < K; ++j) {
    out[j] = {std::move(next[j]), t - 1, states[j].restart};
  }
  return out;
}

double RunTrace::clip_rate() const {
  return guidance_evaluations == 0
             ? 0.0
             : static_cast<double>(clip_activations) / static_cast<double>(guidance_evaluations);
}

std::string RunTrace::to_jsonl() const {
  std::ostringstream os;
  for (const auto& s : steps) {
    os << nlohmann::json{{"type", "step"}, {"restart", s.restart}, {"t", s.t},
                         {"state_norms", s.state_norms}, {"clipped", s.clipped}}
              .dump()
       << '\n';
  }
  for (const auto& c : candidates) {
    os << nlohmann::json{{"type", "candidate"}, {"restart", c.restart}, {"indices", c.indices},
                         {"similarity", c.similarity}}
              .dump()
       << '\n';
  }
  return os.str();
}

namespace {

// Cleanup of the denoised clean-time states.
CandidateRecord read_candidate(const ProblemInstance& instance,
                               std::span<const AnalyticPrior> priors,
                               std::span<const FactorState> states,
                               const DiffusionSchedule& schedule, std::vector<Vec>* estimates) {
  CandidateRecord cand;
  for (std::size_t j = 0; j < priors.size(); ++j) {
    Vec denoised = states[j].value;
    if (schedule.omega(0) > 0.0 && states[j].t == 0) {
      denoised = tweedie(evaluate(priors[j], states[j].value, 0, schedule), states[j].value);
    }
    cand.indices.push_back(priors[j].readout(denoised).index);
    if (estimates) estimates->push_back(std::move(denoised));
  }
  cand.similarity = reconstruction_similarity(instance, cand.indices);
  return cand;
}

}  // namespace

DecomposeResult decompose(const ProblemInstance& instance, std::span<const AnalyticPrior> priors,
                          const CouplingConfig& coupling, const SamplerConfig& sampler,
                          const DiffusionSchedule& schedule) {
  sampler.validate();
  coupling.validate();
  if (priors.size() != instance.factors()) {
    throw std::invalid_argument("decompose: one prior per factor required");
  }
  if (sampler.steps != schedule.steps()) {
    throw std::invalid_argument("decompose: sampler T differs from schedule T");
  }
  for (const auto& p : priors) {
    if (p.space() != coupling.space) throw std::invalid_argument("decompose: prior space mismatch");
  }

  DecomposeResult result;
  Rng rng(sampler.seed);
  std::vector<FactorState> clean = init_states(priors);
  const int tau = sampler.restart_index();

  auto finish = [&](const CandidateRecord& cand, std::vector<Vec> estimates) {
    result.solution.indices = cand.indices;
    result.solution.reconstruction_similarity = cand.similarity;
    result.solution.factor_estimates = std::move(estimates);
  };

  if (tau == 0) {
    result.degenerate_config = true;
    std::vector<Vec> est;
    finish(read_candidate(instance, priors, clean, schedule, &est), std::move(est));
    return result;
  }

  const flops::Scope work;
  bool have_best = false;
  CandidateRecord best;
  std::vector<Vec> best_estimates;

  for (int r = 0; r < sampler.restarts && !result.diverged; ++r) {
    std::vector<FactorState> xs(clean.size());
    for (std::size_t j = 0; j < clean.size(); ++j) {
      xs[j] = {forward_jump(clean[j].value, tau, schedule, sampler.restart_jump, rng), tau, r};
    }
    for (int t = tau; t >= 1; --t) {
      StepTelemetry tel;
      xs = reverse_step(xs, t, priors, instance.observation, coupling, schedule,
                        sampler.integrator, rng, &tel, sampler.update_order);
      ++result.reverse_steps;
      result.trace.clip_activations += static_cast<std::uint64_t>(tel.clip_activations);
      result.trace.guidance_evaluations += xs.size();
      if (sampler.record_trace) {
        StepRecord rec{r, t, {}, {}};
        for (const auto& x : xs) rec.state_norms.push_back(x.value.norm());
        rec.clipped.push_back(tel.clip_activations);
        result.trace.steps.push_back(std::move(rec));
      }
      if (tel.diverged) {
        result.diverged = true;
        result.divergence = {r, t, result.trace.clip_activations};
        break;
      }
    }
    if (result.diverged) break;
    clean = xs;

    std::vector<Vec> estimates;
    CandidateRecord cand = read_candidate(instance, priors, clean, schedule, &estimates);
    cand.restart = r;
    result.trace.candidates.push_back(cand);
    const bool take = sampler.readout == Readout::final_restart || !have_best ||
                      cand.similarity > best.similarity;
    if (take) {
      best = std::move(cand);
      best_estimates = std::move(estimates);
      have_best = true;
    }
  }
  result.flops = work.elapsed();

  if (have_best) {
    finish(best, std::move(best_estimates));
  } else {
    std::vector<Vec> est;
    finish(read_candidate(instance, priors, init_states(priors), schedule, &est), std::move(est));
  }
  result.solution.iterations_used = sampler.iteration_budget();
  return result;
}

std::vector<Vec> hard_coupled_step(std::span<const Vec> states, const Vec& observation, int t,
                                   std::span<const AnalyticPrior> priors,
                                   const DiffusionSchedule& schedule) {
  if (schedule.sigma0() != 0.0) throw std::invalid_argument("hard_coupled_step: requires sigma0 = 0");
  if (t < 1) throw std::out_of_range("hard_coupled_step: t must be >= 1");
  if (states.size() != priors.size() || states.empty()) {
    throw std::invalid_argument("hard_coupled_step: factor count mismatch");
  }
  std::vector<Vec> unbinders;
  for (std::size_t i = 0; i < priors.size(); ++i) {
    if (priors[i].space() != Space::vector) {
      throw std::invalid_argument("hard_coupled_step: requires vector-space priors");
    }
    const double s = priors[i].codebook().scale();
    unbinders.push_back(tweedie(priors[i], states[i], t, schedule) / (s * s));
  }
  std::vector<Vec> out;
  for (std::size_t j = 0; j < priors.size(); ++j) {
    out.push_back(observation.cwiseProduct(product_except(unbinders, j, observation.size())));
  }
  return out;
}

double hard_coupled_inverse_temperature(const AnalyticPrior& prior, int t,
                                        const DiffusionSchedule& schedule) {
  const double s = prior.codebook().scale();
  const double b2 = schedule.beta(t) * schedule.beta(t);
  return prior.softmax_temp() * schedule.alpha(t) / b2 * s * s;
}

}  // namespace facdiff
