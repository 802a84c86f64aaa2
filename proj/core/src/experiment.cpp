#include "facdiff/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "json.hpp"

namespace facdiff {

std::string_view to_string(Solver s) {
  switch (s) {
    case Solver::resonator: return "resonator";
    case Solver::attention: return "attention";
    case Solver::als: return "als";
    case Solver::gaussian: return "gaussian";
    case Solver::latent_gaussian: return "latent_gaussian";
    case Solver::similarity: return "similarity";
    case Solver::latent_similarity: return "latent_similarity";
  }
  return "unknown";
}

Solver solver_from_string(std::string_view name) {
  for (Solver s : {Solver::resonator, Solver::attention, Solver::als, Solver::gaussian,
                   Solver::latent_gaussian, Solver::similarity, Solver::latent_similarity}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown solver: " + std::string(name));
}

bool is_diffusion(Solver s) {
  return s == Solver::gaussian || s == Solver::latent_gaussian || s == Solver::similarity ||
         s == Solver::latent_similarity;
}

double ExperimentConfig::codebook_scale() const {
  return codebook_norm / std::sqrt(static_cast<double>(dim));
}

long long ExperimentConfig::search_space() const {
  long long s = 1;
  for (int k = 0; k < factors; ++k) s *= size;
  return s;
}

void ExperimentConfig::normalize() {
  if (is_diffusion(solver)) {
    coupling.energy = (solver == Solver::gaussian || solver == Solver::latent_gaussian)
                          ? Energy::gaussian
                          : Energy::similarity;
    coupling.space = (solver == Solver::latent_gaussian || solver == Solver::latent_similarity)
                         ? Space::latent
                         : Space::vector;
  }
  sampler.steps = steps;
  baseline.iterations = iteration_budget;
}

void ExperimentConfig::validate() const {
  if (dim < 1 || size < 1 || factors < 1) throw ConfigError("D, n and K must be positive");
  if (m < 1) throw ConfigError("m must be >= 1");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (iteration_budget < 1) throw ConfigError("iteration_budget must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (!(codebook_norm > 0.0)) throw ConfigError("codebook_norm must be positive");
  try {
    if (is_diffusion(solver)) {
      build_schedule(steps, b_min, b_max, sigma0);
      coupling.validate();
      sampler.validate();
      if (!(softmax_temp > 0.0)) throw ConfigError("softmax_temp must be positive");
      if (sampler.steps != steps) throw ConfigError("sampler T out of sync; call normalize()");
      if (sampler.iteration_budget() > iteration_budget) {
        throw ConfigError("R * floor(rho * T) = " + std::to_string(sampler.iteration_budget()) +
                          " exceeds iteration_budget = " + std::to_string(iteration_budget));
      }
    } else {
      baseline.validate();
      if (baseline.iterations != iteration_budget) {
        throw ConfigError("baseline iterations must equal iteration_budget");
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

int size_for_search_space(double search_space, int factors) {
  if (!(search_space >= 1.0) || factors < 1) throw ConfigError("invalid search space");
  return static_cast<int>(std::lround(std::pow(search_space, 1.0 / factors)));
}

namespace {

int as_int(const KvValue& v) { return static_cast<int>(v.as_integer()); }

}  // namespace

void set_config_value(ExperimentConfig& c, std::string_view key, const KvValue& v) {
  try {
    if (key == "solver") c.solver = solver_from_string(v.text);
    else if (key == "D") c.dim = as_int(v);
    else if (key == "n") c.size = as_int(v);
    else if (key == "K") c.factors = as_int(v);
    else if (key == "m") c.m = as_int(v);
    else if (key == "search_space") c.size = size_for_search_space(v.as_number(), c.factors);
    else if (key == "trials") c.trials = as_int(v);
    else if (key == "iteration_budget") c.iteration_budget = as_int(v);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(v.as_integer());
    else if (key == "threads") c.threads = as_int(v);
    else if (key == "codebook_norm") c.codebook_norm = v.as_number();
    else if (key == "observation_scaling") {
      if (v.text == "product") c.observation_scaling = ObservationScaling::product;
      else if (v.text == "single") c.observation_scaling = ObservationScaling::single;
      else throw ConfigError("observation_scaling must be product or single");
    }
    else if (key == "schedule.T") c.steps = as_int(v);
    else if (key == "schedule.b_min") c.b_min = v.as_number();
    else if (key == "schedule.b_max") c.b_max = v.as_number();
    else if (key == "schedule.sigma0") c.sigma0 = v.as_number();
    else if (key == "prior.softmax_temp") c.softmax_temp = v.as_number();
    else if (key == "coupling.eta") c.coupling.schedule.eta = v.as_number();
    else if (key == "coupling.guidance_schedule") c.coupling.schedule.kind = guidance_kind_from_string(v.text);
    else if (key == "coupling.eta_min") c.coupling.schedule.eta_min = v.as_number();
    else if (key == "coupling.eta_max") c.coupling.schedule.eta_max = v.as_number();
    else if (key == "coupling.lambda") c.coupling.lambda = v.as_number();
    else if (key == "coupling.cond_clip_ratio") c.coupling.cond_clip_ratio = v.as_number();
    else if (key == "coupling.jacobian_mode") c.coupling.jacobian_mode = jacobian_mode_from_string(v.text);
    else if (key == "sampler.R") c.sampler.restarts = as_int(v);
    else if (key == "sampler.rho") c.sampler.rho = v.as_number();
    else if (key == "sampler.integrator") c.sampler.integrator = integrator_from_string(v.text);
    else if (key == "sampler.restart_jump") c.sampler.restart_jump = restart_jump_from_string(v.text);
    else if (key == "sampler.update_order") c.sampler.update_order = update_order_from_string(v.text);
    else if (key == "sampler.readout") c.sampler.readout = readout_from_string(v.text);
    else if (key == "baseline.attention_beta") c.baseline.attention_beta = v.as_number();
    else if (key == "baseline.normalize_logits") c.baseline.normalize_logits = v.as_bool();
    else if (key == "baseline.convergence_check") c.baseline.convergence_check = v.as_bool();
    else throw ConfigError("unknown config key: " + std::string(key));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
  c.normalize();
}

void apply_document(ExperimentConfig& config, const KvDocument& doc) {
  // search_space depends on K, so it is resolved after everything else.
  std::optional<KvValue> space;
  for (const auto& [k, v] : doc.entries()) {
    if (k == "search_space") {
      space = v;
      continue;
    }
    set_config_value(config, k, v);
  }
  if (space) set_config_value(config, "search_space", *space);
}

ExperimentConfig config_from_document(const KvDocument& doc) {
  ExperimentConfig config;
  if (const auto s = doc.get("solver")) {
    const Solver solver = solver_from_string(s->text);
    config = preset(to_string(solver));
  }
  apply_document(config, doc);
  config.normalize();
  config.validate();
  return config;
}

std::vector<std::pair<std::string, KvValue>> config_entries(const ExperimentConfig& c) {
  std::vector<std::pair<std::string, KvValue>> e;
  e.emplace_back("solver", kv_string(std::string(to_string(c.solver))));
  e.emplace_back("D", kv_integer(c.dim));
  e.emplace_back("n", kv_integer(c.size));
  e.emplace_back("K", kv_integer(c.factors));
  e.emplace_back("m", kv_integer(c.m));
  e.emplace_back("trials", kv_integer(c.trials));
  e.emplace_back("iteration_budget", kv_integer(c.iteration_budget));
  e.emplace_back("seed", kv_integer(static_cast<long long>(c.seed)));
  e.emplace_back("threads", kv_integer(c.threads));
  e.emplace_back("codebook_norm", kv_number(c.codebook_norm));
  e.emplace_back("observation_scaling",
                 kv_string(c.observation_scaling == ObservationScaling::product ? "product" : "single"));
  if (is_diffusion(c.solver)) {
    e.emplace_back("schedule.T", kv_integer(c.steps));
    e.emplace_back("schedule.b_min", kv_number(c.b_min));
    e.emplace_back("schedule.b_max", kv_number(c.b_max));
    e.emplace_back("schedule.sigma0", kv_number(c.sigma0));
    e.emplace_back("prior.softmax_temp", kv_number(c.softmax_temp));
    e.emplace_back("coupling.eta", kv_number(c.coupling.schedule.eta));
    e.emplace_back("coupling.guidance_schedule", kv_string(std::string(to_string(c.coupling.schedule.kind))));
    e.emplace_back("coupling.eta_min", kv_number(c.coupling.schedule.eta_min));
    e.emplace_back("coupling.eta_max", kv_number(c.coupling.schedule.eta_max));
    e.emplace_back("coupling.lambda", kv_number(c.coupling.lambda));
    e.emplace_back("coupling.cond_clip_ratio", kv_number(c.coupling.cond_clip_ratio));
    e.emplace_back("coupling.jacobian_mode", kv_string(std::string(to_string(c.coupling.jacobian_mode))));
    e.emplace_back("sampler.R", kv_integer(c.sampler.restarts));
    e.emplace_back("sampler.rho", kv_number(c.sampler.rho));
    e.emplace_back("sampler.integrator", kv_string(std::string(to_string(c.sampler.integrator))));
    e.emplace_back("sampler.restart_jump", kv_string(std::string(to_string(c.sampler.restart_jump))));
    e.emplace_back("sampler.update_order", kv_string(std::string(to_string(c.sampler.update_order))));
    e.emplace_back("sampler.readout", kv_string(std::string(to_string(c.sampler.readout))));
  } else {
    e.emplace_back("baseline.attention_beta", kv_number(c.baseline.attention_beta));
    e.emplace_back("baseline.normalize_logits", kv_bool(c.baseline.normalize_logits));
    e.emplace_back("baseline.convergence_check", kv_bool(c.baseline.convergence_check));
  }
  return e;
}

std::string config_to_text(const ExperimentConfig& config) {
  return to_kv_text(config_entries(config));
}

std::string TrialRecord::to_json() const {
  return nlohmann::json{{"trial", index},
                        {"seed", seed},
                        {"decoded", decoded},
                        {"truth", truth},
                        {"accuracy", accuracy},
                        {"reconstruction_similarity", reconstruction_similarity},
                        {"iterations_used", iterations_used},
                        {"wall_seconds", wall_seconds},
                        {"diverged", diverged},
                        {"clip_rate", clip_rate}}
      .dump();
}

bool TrialSummary::divergence_dominated() const {
  return !records.empty() && 2 * diverged > static_cast<int>(records.size());
}

std::uint64_t trial_seed(std::uint64_t seed, int index) {
  return derive_seed(seed, static_cast<std::uint64_t>(index));
}

ProblemInstance trial_instance(const ExperimentConfig& config, int index) {
  return random_instance(trial_seed(config.seed, index), config.dim, config.size, config.factors,
                         config.m, config.codebook_scale(), config.observation_scaling);
}

TrialRecord solve_instance(const ExperimentConfig& config, const ProblemInstance& instance,
                           std::uint64_t solver_seed) {
  TrialRecord rec;
  rec.seed = instance.seed;
  rec.truth = instance.true_indices;
  const auto start = std::chrono::steady_clock::now();

  if (is_diffusion(config.solver)) {
    const auto schedule = build_schedule(config.steps, config.b_min, config.b_max, config.sigma0);
    const auto priors = make_priors(instance, config.coupling.space, config.softmax_temp);
    SamplerConfig sampler = config.sampler;
    sampler.seed = solver_seed;
    const DecomposeResult res = decompose(instance, priors, config.coupling, sampler, schedule);
    rec.decoded = res.solution.indices;
    rec.reconstruction_similarity = res.solution.reconstruction_similarity;
    rec.iterations_used = res.solution.iterations_used;
    rec.diverged = res.diverged;
    rec.clip_rate = res.trace.clip_rate();
    rec.flops = res.flops;
    rec.work_iterations = res.reverse_steps;
  } else {
    BaselineConfig bc = config.baseline;
    bc.iterations = config.iteration_budget;
    BaselineResult res;
    switch (config.solver) {
      case Solver::resonator: res = resonator_run(instance, bc); break;
      case Solver::attention: res = attention_resonator_run(instance, bc); break;
      default: res = als_run(instance, bc); break;
    }
    rec.decoded = res.solution.indices;
    rec.reconstruction_similarity = res.solution.reconstruction_similarity;
    rec.iterations_used = res.solution.iterations_used;
    rec.flops = res.flops;
    rec.work_iterations = res.executed_iterations;
  }
  rec.accuracy = rec.diverged ? 0.0 : accuracy(rec.decoded, instance);
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < std::min(threads, count); ++w) {
      pool.emplace_back([&] {
        for (int i = next++; i < count && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            if (!failed.exchange(true)) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

std::pair<double, double> mean_and_stderr(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / values.size();
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (values.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(values.size()))};
}

TrialSummary run_trials(const ExperimentConfig& input) {
  ExperimentConfig config = input;
  config.normalize();
  config.validate();

  TrialSummary summary;
  summary.records.resize(static_cast<std::size_t>(config.trials));
  const auto start = std::chrono::steady_clock::now();
  parallel_for(config.trials, config.threads, [&](int i) {
    const ProblemInstance inst = trial_instance(config, i);
    TrialRecord rec = solve_instance(config, inst, derive_seed(trial_seed(config.seed, i), 7));
    rec.index = i;
    summary.records[static_cast<std::size_t>(i)] = std::move(rec);
  });
  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::vector<double> acc;
  double iters = 0.0;
  for (const auto& r : summary.records) {
    acc.push_back(r.accuracy);
    iters += r.iterations_used;
    if (r.diverged) ++summary.diverged;
  }
  std::tie(summary.mean_accuracy, summary.stderr_accuracy) = mean_and_stderr(acc);
  summary.mean_iterations = iters / config.trials;
  return summary;
}

CapacityResult capacity(const ExperimentConfig& config, const std::vector<int>& size_grid,
                        double threshold) {
  if (size_grid.empty()) throw ConfigError("capacity: empty n-grid");
  for (std::size_t i = 1; i < size_grid.size(); ++i) {
    if (size_grid[i] <= size_grid[i - 1]) throw ConfigError("capacity: n-grid must ascend");
  }
  CapacityResult out;
  for (int n : size_grid) {
    ExperimentConfig c = config;
    c.size = n;
    const TrialSummary s = run_trials(c);
    out.points.push_back({n, c.search_space(), s.mean_accuracy, s.stderr_accuracy});
    if (s.mean_accuracy < threshold) break;
    out.found = true;
    out.size = n;
    out.search_space = c.search_space();
  }
  return out;
}

}  // namespace facdiff
