#pragma once

// Parameter sweeps over experiment configs with CSV and JSONL output.
//
// Spec file layout:
//   name = "table1"
//   mode = "grid"            # grid | ode_vs_sde | capacity
//   solvers = ["resonator", "similarity"]
//   out = "results/table1.csv"
//   fit_budget = false       # budget := max R*floor(rho T) over diffusion solvers
//   [fixed]                  # config keys applied to every run
//   [axes]                   # config key = [values]; cartesian product, first axis outermost
//   [solver.<label>]         # per-solver overrides; `preset` or `config` pick the base
//
// An `n` axis given as "default" expands to default_size_grid(). In capacity
// mode the `n` axis is the scanned grid and the other axes form the points.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "facdiff/experiment.hpp"
#include "facdiff/kv_config.hpp"

namespace facdiff {

enum class SweepMode { grid, ode_vs_sde, capacity };

std::string_view to_string(SweepMode m);
SweepMode sweep_mode_from_string(std::string_view s);

using KvEntries = std::vector<std::pair<std::string, KvValue>>;

struct SweepSolver {
  std::string label;
  ExperimentConfig base;
  KvEntries overrides;
};

struct SweepAxis {
  std::string key;
  std::vector<KvValue> values;
};

struct SweepSpec {
  std::string name = "sweep";
  SweepMode mode = SweepMode::grid;
  std::vector<SweepSolver> solvers;
  KvEntries fixed;
  std::vector<SweepAxis> axes;
  std::string out;
  bool fit_budget = false;
  double capacity_threshold = 0.95;

  /// Throws ConfigError on unknown keys or malformed values. Relative
  /// `config` paths in solver sections resolve against `base_dir`.
  static SweepSpec from_document(const KvDocument& doc, const std::string& base_dir = "");
};

/// Log-spaced sizes 10^(i/10) rounded and deduplicated, 2 <= n <= 1000.
std::vector<int> default_size_grid();

struct SweepPoint {
  int index = 0;
  KvEntries values;  // one per axis, in axis order
};

/// Cartesian product of the axes (excluding `n` in capacity mode).
std::vector<SweepPoint> expand_points(const SweepSpec& spec);

/// The config `solver` runs at `point`, with `overrides` (CLI flags) applied last.
ExperimentConfig point_config(const SweepSpec& spec, const SweepSolver& solver,
                              const SweepPoint& point, const KvEntries& overrides = {});

struct SweepOutput {
  std::string csv;
  std::string jsonl;
  std::string metadata;  // JSON
  int diverged_trials = 0;
  int total_trials = 0;
};

/// Runs the sweep. Every solver at a point shares one iteration budget and no
/// trial may report more iterations than that budget.
SweepOutput run_sweep(const SweepSpec& spec, const KvEntries& overrides = {},
                      const std::function<void(const std::string&)>& log = {});

/// Melts a sweep CSV to long format: the non-metric columns, then `metric`
/// and `value`, one row per metric cell.
std::string long_format(std::string_view csv);

/// Formats a double with the shortest round-trip representation.
std::string format_number(double v);

}  // namespace facdiff
