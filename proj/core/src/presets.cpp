#include <string>

#include "facdiff/experiment.hpp"

namespace facdiff {

namespace {

struct Tuned {
  Solver solver;
  double eta;
  GuidanceKind kind;
  double clip;
  double sigma0;
  double temp;
  double lambda;
  int steps;
  int restarts;
  double rho;
};

// Hyperparameters found by tuning each variant for D=1000, K=3, n=50 at a
// 100-iteration budget.
constexpr Tuned kTuned[] = {
    {Solver::gaussian, 0.0171, GuidanceKind::sigma, 2.81, 0.110, 13.63, 88.47, 50, 2, 1.0},
    {Solver::latent_gaussian, 0.0357, GuidanceKind::constant, 5.44, 0.314, 7.04, 41.86, 50, 14, 0.143},
    {Solver::similarity, 0.106, GuidanceKind::sigma, 1.44, 0.0408, 4.22, 82.8, 50, 20, 0.1},
    {Solver::latent_similarity, 0.0167, GuidanceKind::sigma, 2.40, 0.0317, 1.11, 36.33, 50, 20, 0.1},
};

}  // namespace

std::vector<std::string> preset_names() {
  return {"gaussian", "latent_gaussian", "similarity", "latent_similarity",
          "resonator", "attention", "als"};
}

ExperimentConfig preset(std::string_view name) {
  const Solver solver = solver_from_string(name);
  ExperimentConfig c;
  c.solver = solver;
  if (is_diffusion(solver)) {
    for (const auto& t : kTuned) {
      if (t.solver != solver) continue;
      c.coupling.schedule.eta = t.eta;
      c.coupling.schedule.kind = t.kind;
      c.coupling.cond_clip_ratio = t.clip;
      c.sigma0 = t.sigma0;
      c.softmax_temp = t.temp;
      c.coupling.lambda = t.lambda;
      c.steps = t.steps;
      c.sampler.restarts = t.restarts;
      c.sampler.rho = t.rho;
    }
    c.coupling.jacobian_mode = JacobianMode::exact;
    c.sampler.integrator = Integrator::ode;
    c.sampler.restart_jump = RestartJump::deterministic;
    c.sampler.update_order = UpdateOrder::jacobi;
    c.sampler.readout = Readout::best_of_restarts;
  }
  c.normalize();
  return c;
}

}  // namespace facdiff
