#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "facdiff/experiment.hpp"
#include "facdiff/kv_config.hpp"
#include "facdiff/sweep.hpp"
#include "facdiff/tune.hpp"

namespace {

using namespace facdiff;

constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

struct Overrides {
  std::optional<long long> seed;
  std::optional<int> trials;
  std::optional<int> threads;
  std::string out;

  void attach(CLI::App* app) {
    app->add_option("--seed", seed, "Override the base seed");
    app->add_option("--trials", trials, "Override the trial count")->check(CLI::PositiveNumber);
    app->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app->add_option("--out", out, "Output path");
  }

  KvEntries entries() const {
    KvEntries e;
    if (seed) e.emplace_back("seed", kv_integer(*seed));
    if (trials) e.emplace_back("trials", kv_integer(*trials));
    if (threads) e.emplace_back("threads", kv_integer(*threads));
    return e;
  }

  void apply(ExperimentConfig& c) const {
    for (const auto& [k, v] : entries()) set_config_value(c, k, v);
    c.normalize();
  }
};

KvDocument load_document(const std::string& path) {
  try {
    return KvDocument::load(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

void write_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << text;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  p.replace_extension(suffix);
  return p.string();
}

int cmd_run(const std::string& config_path, const Overrides& ov) {
  ExperimentConfig c = config_from_document(load_document(config_path));
  ov.apply(c);
  c.validate();
  const TrialSummary s = run_trials(c);
  if (!ov.out.empty()) {
    std::string jsonl;
    for (const auto& r : s.records) jsonl += r.to_json() + '\n';
    write_file(ov.out, jsonl);
  }
  std::cout << "solver = \"" << to_string(c.solver) << "\"\n"
            << "trials = " << c.trials << '\n'
            << "mean_accuracy = " << format_number(s.mean_accuracy) << '\n'
            << "stderr = " << format_number(s.stderr_accuracy) << '\n'
            << "diverged = " << s.diverged << '\n'
            << "mean_iterations = " << format_number(s.mean_iterations) << '\n'
            << "wall_seconds = " << format_number(s.wall_seconds) << '\n';
  return s.divergence_dominated() ? kExitDiverged : 0;
}

int cmd_sweep(const std::string& spec_path, const Overrides& ov) {
  const SweepSpec spec = SweepSpec::from_document(
      load_document(spec_path), std::filesystem::path(spec_path).parent_path().string());
  const std::string out = ov.out.empty() ? spec.out : ov.out;
  if (out.empty()) throw ConfigError("sweep: no output path (set `out` or pass --out)");
  // Validate overrides against every point before running anything.
  for (const auto& p : expand_points(spec)) {
    for (const auto& s : spec.solvers) (void)point_config(spec, s, p, ov.entries());
  }
  const SweepOutput result =
      run_sweep(spec, ov.entries(), [](const std::string& line) { std::cerr << line << '\n'; });
  write_file(out, result.csv);
  write_file(with_suffix(out, ".jsonl"), result.jsonl);
  write_file(with_suffix(out, ".meta.json"), result.metadata);
  std::cout << out << '\n';
  return 2 * result.diverged_trials > result.total_trials ? kExitDiverged : 0;
}

int cmd_tune(const std::string& space_path, int budget, const Overrides& ov) {
  TuneSpace space = TuneSpace::from_document(load_document(space_path));
  ov.apply(space.objective);
  const std::uint64_t seed = space.objective.seed;
  std::string log;
  const TuneResult r = tune(space, budget, seed, [&](const TuneCandidate& c) {
    std::cerr << "candidate " << c.index << ": " << format_number(c.mean_accuracy) << '\n';
    log += c.to_json() + '\n';
  });
  std::ostringstream text;
  text << "# tuned: " << budget << " candidates, validation accuracy "
       << format_number(r.best_accuracy) << " +- " << format_number(r.best_stderr) << " on "
       << r.best.trials << " trials\n"
       << config_to_text(r.best);
  if (ov.out.empty()) {
    std::cout << text.str();
  } else {
    write_file(ov.out, text.str());
    write_file(with_suffix(ov.out, ".candidates.jsonl"), log);
    std::cout << ov.out << '\n';
  }
  return 0;
}

int cmd_preset(const std::string& name, bool emit, const Overrides& ov) {
  ExperimentConfig c = preset(name);
  ov.apply(c);
  const std::string text = config_to_text(c);
  if (!ov.out.empty()) write_file(ov.out, text);
  if (emit || ov.out.empty()) std::cout << text;
  return 0;
}

int cmd_plot_data(const std::string& results, const std::string& out) {
  std::ifstream f(results, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + results);
  std::stringstream buf;
  buf << f.rdbuf();
  const std::string text = long_format(buf.str());
  if (out.empty()) std::cout << text;
  else write_file(out, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factorization of bound hypervectors by coupled diffusion, with baselines"};
  app.require_subcommand(1);

  Overrides run_ov, sweep_ov, tune_ov, preset_ov;
  std::string config_path, spec_path, space_path, preset_name, results_path, plot_out;
  int budget = 0;
  bool emit = false;

  auto* run = app.add_subcommand("run", "Run seeded trials of one config");
  run->add_option("--config", config_path, "Config file")->required();
  run_ov.attach(run);

  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep");
  sweep->add_option("--spec", spec_path, "Sweep spec file")->required();
  sweep_ov.attach(sweep);

  auto* tune_cmd = app.add_subcommand("tune", "Random search over diffusion hyperparameters");
  tune_cmd->add_option("--space", space_path, "Search space file")->required();
  tune_cmd->add_option("--budget", budget, "Number of sampled configs")
      ->required()
      ->check(CLI::PositiveNumber);
  tune_ov.attach(tune_cmd);

  auto* preset_cmd = app.add_subcommand("preset", "Print a tuned preset config");
  preset_cmd->add_option("name", preset_name, "Preset name")->required();
  preset_cmd->add_flag("--emit", emit, "Write the config to stdout");
  preset_ov.attach(preset_cmd);

  auto* plot = app.add_subcommand("plot-data", "Reshape sweep results to long format");
  plot->add_option("results", results_path, "Sweep CSV")->required();
  plot->add_option("--out", plot_out, "Output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, run_ov);
    if (*sweep) return cmd_sweep(spec_path, sweep_ov);
    if (*tune_cmd) return cmd_tune(space_path, budget, tune_ov);
    if (*preset_cmd) return cmd_preset(preset_name, emit, preset_ov);
    if (*plot) return cmd_plot_data(results_path, plot_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
