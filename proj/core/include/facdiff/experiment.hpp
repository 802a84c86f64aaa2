#pragma once

// Experiment configuration and seeded trial execution shared by the bench
// CLI, sweeps, the tuner and the acceptance suite.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "facdiff/baselines.hpp"
#include "facdiff/guidance.hpp"
#include "facdiff/kv_config.hpp"
#include "facdiff/sampler.hpp"
#include "facdiff/schedule.hpp"
#include "facdiff/vsa.hpp"

namespace facdiff {

enum class Solver {
  resonator,
  attention,
  als,
  gaussian,
  latent_gaussian,
  similarity,
  latent_similarity,
};

std::string_view to_string(Solver s);
Solver solver_from_string(std::string_view name);
bool is_diffusion(Solver s);

/// Raised for invalid experiment configuration (bench exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  Solver solver = Solver::similarity;
  int dim = 1000;  // D
  int size = 50;   // n
  int factors = 3; // K
  int m = 1;       // superposition count; noise sigma = sqrt(m - 1)
  int trials = 200;
  int iteration_budget = 100;
  std::uint64_t seed = 1;
  int threads = 1;

  double codebook_norm = 1000.0;  // scaled column norm; scale = norm / sqrt(D)
  ObservationScaling observation_scaling = ObservationScaling::product;

  // Diffusion solvers.
  int steps = 50;  // T
  double b_min = 0.1;
  double b_max = 20.0;
  double sigma0 = 0.05;
  double softmax_temp = 1.0;
  CouplingConfig coupling;
  SamplerConfig sampler;

  // Baselines; iterations always follow iteration_budget.
  BaselineConfig baseline;

  double codebook_scale() const;
  long long search_space() const;
  /// Syncs derived fields (energy/space from solver, T, baseline N).
  void normalize();
  /// Throws ConfigError on inconsistent settings, including the iteration
  /// budget (R * floor(rho T) <= budget for diffusion solvers).
  void validate() const;
};

/// n = round(S^(1/K)).
int size_for_search_space(double search_space, int factors);

/// Applies one `key = value` setting; throws ConfigError for unknown keys or
/// malformed values. Keys mirror the config file layout (`coupling.eta`, ...).
void set_config_value(ExperimentConfig& config, std::string_view key, const KvValue& value);
void apply_document(ExperimentConfig& config, const KvDocument& doc);
ExperimentConfig config_from_document(const KvDocument& doc);
std::vector<std::pair<std::string, KvValue>> config_entries(const ExperimentConfig& config);
std::string config_to_text(const ExperimentConfig& config);

/// Tuned settings for the four diffusion variants (plus baseline defaults
/// for resonator/attention/als). Throws ConfigError for unknown names.
ExperimentConfig preset(std::string_view name);
std::vector<std::string> preset_names();

struct TrialRecord {
  int index = 0;
  std::uint64_t seed = 0;
  std::vector<int> decoded;
  std::vector<int> truth;
  double accuracy = 0.0;
  double reconstruction_similarity = 0.0;
  int iterations_used = 0;
  double wall_seconds = 0.0;
  bool diverged = false;
  double clip_rate = 0.0;
  std::uint64_t flops = 0;
  int work_iterations = 0;  // iterations the flop count covers

  std::string to_json() const;
};

struct TrialSummary {
  std::vector<TrialRecord> records;
  double mean_accuracy = 0.0;
  double stderr_accuracy = 0.0;
  int diverged = 0;
  double mean_iterations = 0.0;
  double wall_seconds = 0.0;

  bool divergence_dominated() const;
};

/// Seed of trial i.
std::uint64_t trial_seed(std::uint64_t seed, int index);

/// The instance trial i of `config` runs on.
ProblemInstance trial_instance(const ExperimentConfig& config, int index);

/// Runs the configured solver on one instance.
TrialRecord solve_instance(const ExperimentConfig& config, const ProblemInstance& instance,
                           std::uint64_t solver_seed);

/// Independent seeded trials on a work pool; results do not depend on the
/// thread count.
TrialSummary run_trials(const ExperimentConfig& config);

/// Mean and stderr (sample sd / sqrt(count)) of a list of accuracies.
std::pair<double, double> mean_and_stderr(const std::vector<double>& values);

struct CapacityPoint {
  int size = 0;
  long long search_space = 0;
  double mean_accuracy = 0.0;
  double stderr_accuracy = 0.0;
};

struct CapacityResult {
  bool found = false;
  int size = 0;
  long long search_space = 0;
  std::vector<CapacityPoint> points;
};

/// Scans an ascending n-grid and reports the largest n^K whose accuracy is at
/// least `threshold`; the scan stops at the first grid point that misses.
CapacityResult capacity(const ExperimentConfig& config, const std::vector<int>& size_grid,
                        double threshold = 0.95);

/// Runs `fn(i)` for i in [0, count) on `threads` workers.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace facdiff
