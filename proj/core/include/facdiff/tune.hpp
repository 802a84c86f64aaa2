#pragma once

// Seeded random search over diffusion hyperparameters.
//
// A space file names a solver, an `[objective]` section with the validation
// problem (defaults: D=1000, K=3, n=50, 100-iteration budget) and a `[space]`
// section keyed by config keys. Each `[space]` value is one of
//   [lo, hi]            numeric range (integers for schedule.T and sampler.R)
//   ["a", "b", ...]     categorical choices
//   scalar              fixed value
// Tunables missing from `[space]` fall back to default ranges.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "facdiff/experiment.hpp"
#include "facdiff/kv_config.hpp"
#include "facdiff/rng.hpp"

namespace facdiff {

struct ParamRange {
  std::string key;
  enum class Kind { uniform, log_uniform, integer, choice } kind = Kind::uniform;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::string> choices;

  bool fixed() const;
};

struct TuneSpace {
  ExperimentConfig objective;  // solver, validation problem, trials, seed
  std::vector<ParamRange> params;

  /// Default ranges for the nine tunables of the objective's solver.
  static TuneSpace defaults(Solver solver);
  /// Throws ConfigError on malformed entries.
  static TuneSpace from_document(const KvDocument& doc);

  /// A space where every tunable is pinned to the value in `config`.
  static TuneSpace pinned(const ExperimentConfig& config);
};

struct TuneCandidate {
  int index = 0;
  ExperimentConfig config;
  double mean_accuracy = 0.0;
  double stderr_accuracy = 0.0;

  std::string to_json() const;
};

struct TuneResult {
  ExperimentConfig best;
  double best_accuracy = 0.0;
  double best_stderr = 0.0;
  int best_index = 0;
  std::vector<TuneCandidate> candidates;
};

/// Draws one configuration from the space, rejecting draws that break
/// R * floor(rho T) <= iteration_budget or fail validation.
ExperimentConfig sample_config(const TuneSpace& space, Rng& rng);

/// Evaluates `budget` sampled configurations on the objective's trials and
/// keeps the most accurate (the earliest on ties). `progress` sees each
/// candidate as it finishes.
TuneResult tune(const TuneSpace& space, int budget, std::uint64_t seed,
                const std::function<void(const TuneCandidate&)>& progress = {});

}  // namespace facdiff
