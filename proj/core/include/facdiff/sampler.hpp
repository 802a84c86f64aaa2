#pragma once

// Reverse-time integration of K coupled analytic diffusions, the restart loop
// that refines factor estimates, and the hard-coupled degenerate update.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facdiff/guidance.hpp"
#include "facdiff/rng.hpp"
#include "facdiff/schedule.hpp"
#include "facdiff/score.hpp"
#include "facdiff/vsa.hpp"

namespace facdiff {

enum class Integrator { ode, sde };
enum class RestartJump { deterministic, stochastic };
enum class UpdateOrder { jacobi, gauss_seidel };
enum class Readout { best_of_restarts, final_restart };

std::string_view to_string(Integrator v);
std::string_view to_string(RestartJump v);
std::string_view to_string(UpdateOrder v);
std::string_view to_string(Readout v);
Integrator integrator_from_string(std::string_view s);
RestartJump restart_jump_from_string(std::string_view s);
UpdateOrder update_order_from_string(std::string_view s);
Readout readout_from_string(std::string_view s);

struct SamplerConfig {
  int steps = 50;  // T
  int restarts = 1;  // R
  double rho = 1.0;
  Integrator integrator = Integrator::ode;
  RestartJump restart_jump = RestartJump::deterministic;
  UpdateOrder update_order = UpdateOrder::jacobi;
  Readout readout = Readout::best_of_restarts;
  std::uint64_t seed = 0;
  bool record_trace = false;

  /// floor(rho * T): the step each restart jumps to.
  int restart_index() const;
  /// tau = floor(rho * T) / T.
  double restart_time() const;
  /// kappa = R * floor(rho * T): reverse steps per run.
  int iteration_budget() const;
  void validate() const;
};

struct FactorState {
  Vec value;
  int t = 0;
  int restart = 0;
};

/// Builds one prior per instance codebook.
std::vector<AnalyticPrior> make_priors(const ProblemInstance& instance, Space space,
                                       double softmax_temp);

/// Every factor starts at the mean of its prior's centers, t = 0.
std::vector<FactorState> init_states(std::span<const AnalyticPrior> priors);

/// Moves a clean state to step tau: alpha_tau x (deterministic) or
/// alpha_tau x + beta_tau eps (stochastic).
Vec forward_jump(const Vec& state0, int tau, const DiffusionSchedule& schedule, RestartJump mode,
                 Rng& rng);

struct StepTelemetry {
  int clip_activations = 0;
  bool diverged = false;
};

/// One reverse step t -> t-1 for all factors using score + coupled guidance.
///
/// The drift uses the per-step retention a_t = (alpha_t / alpha_{t-1})^2:
///   ode: x <- (x + (1 - a_t) s / 2) / sqrt(a_t)
///   sde: x <- (x + (1 - a_t) s) / sqrt(a_t) + sqrt(1 - a_t) z
std::vector<FactorState> reverse_step(std::span<const FactorState> states, int t,
                                      std::span<const AnalyticPrior> priors,
                                      const Vec& observation, const CouplingConfig& coupling,
                                      const DiffusionSchedule& schedule, Integrator integrator,
                                      Rng& rng, StepTelemetry* telemetry = nullptr,
                                      UpdateOrder order = UpdateOrder::jacobi);

struct StepRecord {
  int restart = 0;
  int t = 0;
  std::vector<double> state_norms;
  std::vector<int> clipped;
};

struct CandidateRecord {
  int restart = 0;
  std::vector<int> indices;
  double similarity = 0.0;
};

struct RunTrace {
  std::vector<StepRecord> steps;
  std::vector<CandidateRecord> candidates;
  std::uint64_t clip_activations = 0;
  std::uint64_t guidance_evaluations = 0;

  double clip_rate() const;
  /// One JSON object per line: step records, then candidates.
  std::string to_jsonl() const;
};

struct DivergenceReport {
  int restart = 0;
  int t = 0;
  std::uint64_t clip_activations = 0;
};

struct DecomposeResult {
  DecodedSolution solution;
  RunTrace trace;
  bool diverged = false;
  bool degenerate_config = false;
  DivergenceReport divergence;
  std::uint64_t flops = 0;  // work spent in reverse steps
  int reverse_steps = 0;
};

/// Restart loop: R times jump the current clean estimates to tau and
/// integrate back to 0; each pass is read out through cleanup of the
/// denoised final states and the best candidate by reconstruction similarity
/// is returned (or the last, for Readout::final_restart).
DecomposeResult decompose(const ProblemInstance& instance, std::span<const AnalyticPrior> priors,
                          const CouplingConfig& coupling, const SamplerConfig& sampler,
                          const DiffusionSchedule& schedule);

/// x_j <- obs * prod_{i != j} tweedie_i(x_i) / s_i^2 where s_i is codebook i's
/// scale (unit scale gives the plain unbinding). Requires vector-space priors
/// and sigma0 = 0.
std::vector<Vec> hard_coupled_step(std::span<const Vec> states, const Vec& observation, int t,
                                   std::span<const AnalyticPrior> priors,
                                   const DiffusionSchedule& schedule);

/// Inverse temperature of the attention update that one hard-coupled step
/// reproduces in raw bipolar units: softmax_temp * alpha_t / beta_t^2 * s^2.
/// Denoising the output of hard_coupled_step gives s times that update
/// applied to the raw estimates tweedie_i / s.
double hard_coupled_inverse_temperature(const AnalyticPrior& prior, int t,
                                        const DiffusionSchedule& schedule);

}  // namespace facdiff
