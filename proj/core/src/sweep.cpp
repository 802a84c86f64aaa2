#include "facdiff/sweep.hpp"

#include <algorithm>
#include <filesystem>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace facdiff {

std::string_view to_string(SweepMode m) {
  switch (m) {
    case SweepMode::grid: return "grid";
    case SweepMode::ode_vs_sde: return "ode_vs_sde";
    case SweepMode::capacity: return "capacity";
  }
  return "unknown";
}

SweepMode sweep_mode_from_string(std::string_view s) {
  if (s == "grid") return SweepMode::grid;
  if (s == "ode_vs_sde") return SweepMode::ode_vs_sde;
  if (s == "capacity") return SweepMode::capacity;
  throw ConfigError("unknown sweep mode: " + std::string(s));
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<int> default_size_grid() {
  std::vector<int> grid;
  for (int i = 3; i <= 30; ++i) {
    const int n = static_cast<int>(std::lround(std::pow(10.0, i / 10.0)));
    if (grid.empty() || grid.back() != n) grid.push_back(n);
  }
  return grid;
}

namespace {

bool is_size_key(std::string_view key) { return key == "n"; }

std::vector<KvValue> expand_axis(const std::string& key, const KvValue& v) {
  if (is_size_key(key) && v.kind == KvValue::Kind::string && v.text == "default") {
    std::vector<KvValue> out;
    for (int n : default_size_grid()) out.push_back(kv_integer(n));
    return out;
  }
  if (v.kind != KvValue::Kind::array) return {v};
  if (v.items.empty()) throw ConfigError("sweep: axis " + key + " has no values");
  return v.items;
}

// search_space depends on K, so it is applied after every other key.
void apply_entries(ExperimentConfig& c, const KvEntries& entries, const KvValue** search_space) {
  for (const auto& [key, value] : entries) {
    if (key == "search_space") *search_space = &value;
    else set_config_value(c, key, value);
  }
}

std::string csv_value(const KvValue& v) {
  return v.kind == KvValue::Kind::array ? "\"" + v.as_text() + "\"" : v.as_text();
}

std::string join(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  return line + '\n';
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    else if (ch == ',' && !quoted) cells.push_back(std::exchange(cur, {}));
    else cur += ch;
  }
  cells.push_back(cur);
  return cells;
}

double mean_flops_per_iteration(const TrialSummary& s) {
  std::uint64_t flops = 0;
  std::uint64_t iters = 0;
  for (const auto& r : s.records) {
    flops += r.flops;
    iters += static_cast<std::uint64_t>(r.work_iterations);
  }
  return iters ? static_cast<double>(flops) / static_cast<double>(iters) : 0.0;
}

void check_budget(const TrialSummary& s, const ExperimentConfig& c, const std::string& label) {
  for (const auto& r : s.records) {
    if (r.iterations_used > c.iteration_budget) {
      throw std::logic_error("sweep: " + label + " used " + std::to_string(r.iterations_used) +
                             " iterations, over the shared budget of " +
                             std::to_string(c.iteration_budget));
    }
  }
}

nlohmann::ordered_json kv_json(const KvValue& v) {
  switch (v.kind) {
    case KvValue::Kind::number:
      return v.text.find_first_of(".eE") == std::string::npos ? nlohmann::ordered_json(v.as_integer())
                                                              : nlohmann::ordered_json(v.as_number());
    case KvValue::Kind::boolean: return v.as_bool();
    case KvValue::Kind::array: {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& i : v.items) arr.push_back(kv_json(i));
      return arr;
    }
    case KvValue::Kind::string: break;
  }
  return v.text;
}

nlohmann::ordered_json entries_json(const KvEntries& entries) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : entries) j[k] = kv_json(v);
  return j;
}

}  // namespace

SweepSpec SweepSpec::from_document(const KvDocument& doc, const std::string& base_dir) {
  SweepSpec spec;
  std::set<std::string> solver_labels;
  std::vector<std::string> labels;
  for (const auto& [key, value] : doc.entries()) {
    if (key == "name") spec.name = value.text;
    else if (key == "mode") spec.mode = sweep_mode_from_string(value.text);
    else if (key == "solvers") labels = value.as_list();
    else if (key == "out") spec.out = value.text;
    else if (key == "fit_budget") spec.fit_budget = value.as_bool();
    else if (key == "capacity_threshold") spec.capacity_threshold = value.as_number();
    else if (key.starts_with("fixed.")) spec.fixed.emplace_back(key.substr(6), value);
    else if (key.starts_with("axes.")) {
      const std::string axis = key.substr(5);
      spec.axes.push_back({axis, expand_axis(axis, value)});
    } else if (!key.starts_with("solver.")) {
      throw ConfigError("sweep: unknown key " + key);
    }
  }
  if (labels.empty()) throw ConfigError("sweep: solvers list is empty");
  if (spec.mode == SweepMode::capacity &&
      std::none_of(spec.axes.begin(), spec.axes.end(),
                   [](const SweepAxis& a) { return is_size_key(a.key); })) {
    spec.axes.push_back({"n", expand_axis("n", kv_string("default"))});
  }

  for (const auto& label : labels) {
    if (!solver_labels.insert(label).second) throw ConfigError("sweep: duplicate solver " + label);
    SweepSolver s;
    s.label = label;
    std::string base_preset = label;
    std::string base_file;
    for (auto& [key, value] : doc.section("solver." + label)) {
      if (key == "preset") base_preset = value.text;
      else if (key == "config") base_file = value.text;
      else s.overrides.emplace_back(key, value);
    }
    if (!base_file.empty()) {
      try {
        std::filesystem::path path(base_file);
        if (path.is_relative() && !base_dir.empty()) path = std::filesystem::path(base_dir) / path;
        s.base = config_from_document(KvDocument::load(path.string()));
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ConfigError("sweep: solver " + label + ": " + e.what());
      }
    } else {
      s.base = preset(base_preset);
    }
    spec.solvers.push_back(std::move(s));
  }

  // Fail fast on bad keys or values.
  for (const auto& point : expand_points(spec)) {
    for (const auto& s : spec.solvers) (void)point_config(spec, s, point);
  }
  return spec;
}

std::vector<SweepPoint> expand_points(const SweepSpec& spec) {
  std::vector<const SweepAxis*> axes;
  for (const auto& a : spec.axes) {
    if (spec.mode == SweepMode::capacity && is_size_key(a.key)) continue;
    axes.push_back(&a);
  }
  std::vector<SweepPoint> points(1);
  for (const SweepAxis* axis : axes) {
    std::vector<SweepPoint> next;
    for (const auto& p : points) {
      for (const auto& v : axis->values) {
        SweepPoint q = p;
        q.values.emplace_back(axis->key, v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  for (std::size_t i = 0; i < points.size(); ++i) points[i].index = static_cast<int>(i);
  return points;
}

ExperimentConfig point_config(const SweepSpec& spec, const SweepSolver& solver,
                              const SweepPoint& point, const KvEntries& overrides) {
  ExperimentConfig c = solver.base;
  const KvValue* search_space = nullptr;
  apply_entries(c, spec.fixed, &search_space);
  apply_entries(c, solver.overrides, &search_space);
  apply_entries(c, point.values, &search_space);
  apply_entries(c, overrides, &search_space);
  if (search_space) set_config_value(c, "search_space", *search_space);
  c.normalize();

  if (spec.fit_budget) {
    int budget = 0;
    for (const auto& other : spec.solvers) {
      if (!is_diffusion(other.base.solver)) continue;
      ExperimentConfig o = other.base;
      const KvValue* ignored = nullptr;
      apply_entries(o, spec.fixed, &ignored);
      apply_entries(o, other.overrides, &ignored);
      apply_entries(o, point.values, &ignored);
      apply_entries(o, overrides, &ignored);
      o.normalize();
      budget = std::max(budget, o.sampler.iteration_budget());
    }
    if (budget > 0) {
      c.iteration_budget = budget;
      c.normalize();
    }
  }
  c.validate();
  return c;
}

SweepOutput run_sweep(const SweepSpec& spec, const KvEntries& overrides,
                      const std::function<void(const std::string&)>& log) {
  SweepOutput out;
  const auto points = expand_points(spec);
  std::vector<std::string> axis_keys;
  for (const auto& a : spec.axes) {
    if (!(spec.mode == SweepMode::capacity && is_size_key(a.key))) axis_keys.push_back(a.key);
  }

  std::vector<std::string> header = {"point", "solver"};
  header.insert(header.end(), axis_keys.begin(), axis_keys.end());
  // Problem columns an axis already reports are left out.
  const std::vector<std::string> all_problem_cols = {"D", "n", "K", "m", "space_size", "trials",
                                                     "iteration_budget"};
  std::vector<std::string> problem_cols;
  std::vector<bool> keep_problem;
  for (const auto& col : all_problem_cols) {
    const bool keep = std::find(axis_keys.begin(), axis_keys.end(), col) == axis_keys.end();
    keep_problem.push_back(keep);
    if (keep) problem_cols.push_back(col);
  }
  switch (spec.mode) {
    case SweepMode::grid:
      header.insert(header.end(), problem_cols.begin(), problem_cols.end());
      header.insert(header.end(), {"mean_accuracy", "stderr", "diverged", "mean_iterations",
                                   "flops_per_iteration", "wall_seconds"});
      break;
    case SweepMode::ode_vs_sde:
      header.insert(header.end(), problem_cols.begin(), problem_cols.end());
      header.insert(header.end(), {"accuracy_ode", "stderr_ode", "accuracy_sde", "stderr_sde",
                                   "difference", "stderr_difference", "wall_seconds"});
      break;
    case SweepMode::capacity:
      for (const char* col : {"D", "K", "m", "trials", "iteration_budget"}) {
        if (std::find(axis_keys.begin(), axis_keys.end(), col) == axis_keys.end()) {
          header.push_back(col);
        }
      }
      header.insert(header.end(), {"found",
                                   "capacity_n", "capacity", "points_evaluated", "wall_seconds"});
      break;
  }
  std::string csv = join(header);
  std::string jsonl;

  std::vector<int> size_grid;
  for (const auto& a : spec.axes) {
    if (spec.mode == SweepMode::capacity && is_size_key(a.key)) {
      for (const auto& v : a.values) size_grid.push_back(static_cast<int>(v.as_integer()));
    }
  }
  std::sort(size_grid.begin(), size_grid.end());

  auto append_records = [&](const TrialSummary& s, const SweepPoint& p, const std::string& label,
                            std::string_view variant) {
    for (const auto& r : s.records) {
      auto j = nlohmann::ordered_json::parse(r.to_json());
      nlohmann::ordered_json row;
      row["point"] = p.index;
      row["solver"] = label;
      if (!variant.empty()) row["integrator"] = variant;
      for (const auto& [k, v] : p.values) row[k] = kv_json(v);
      for (auto it = j.begin(); it != j.end(); ++it) row[it.key()] = it.value();
      jsonl += row.dump() + '\n';
    }
    out.total_trials += static_cast<int>(s.records.size());
    out.diverged_trials += s.diverged;
  };

  for (const auto& point : points) {
    int shared_budget = -1;
    for (const auto& solver : spec.solvers) {
      ExperimentConfig c = point_config(spec, solver, point, overrides);
      if (shared_budget < 0) shared_budget = c.iteration_budget;
      if (c.iteration_budget != shared_budget) {
        throw ConfigError("sweep: solvers at point " + std::to_string(point.index) +
                          " have different iteration budgets");
      }
      std::vector<std::string> row = {std::to_string(point.index), solver.label};
      for (const auto& [k, v] : point.values) row.push_back(csv_value(v));
      const std::vector<std::string> all_problem = {
          std::to_string(c.dim),    std::to_string(c.size),   std::to_string(c.factors),
          std::to_string(c.m),      std::to_string(c.search_space()),
          std::to_string(c.trials), std::to_string(c.iteration_budget)};
      std::vector<std::string> problem;
      for (std::size_t i = 0; i < all_problem.size(); ++i) {
        if (keep_problem[i]) problem.push_back(all_problem[i]);
      }

      if (spec.mode == SweepMode::grid) {
        const TrialSummary s = run_trials(c);
        check_budget(s, c, solver.label);
        append_records(s, point, solver.label, "");
        row.insert(row.end(), problem.begin(), problem.end());
        row.insert(row.end(),
                   {format_number(s.mean_accuracy), format_number(s.stderr_accuracy),
                    std::to_string(s.diverged), format_number(s.mean_iterations),
                    format_number(mean_flops_per_iteration(s)), format_number(s.wall_seconds)});
        if (log) {
          log(solver.label + " point " + std::to_string(point.index) + ": " +
              format_number(s.mean_accuracy));
        }
      } else if (spec.mode == SweepMode::ode_vs_sde) {
        if (!is_diffusion(c.solver)) {
          throw ConfigError("sweep: ode_vs_sde needs diffusion solvers, got " + solver.label);
        }
        ExperimentConfig ode = c;
        ExperimentConfig sde = c;
        ode.sampler.integrator = Integrator::ode;
        sde.sampler.integrator = Integrator::sde;
        const TrialSummary a = run_trials(ode);
        const TrialSummary b = run_trials(sde);
        check_budget(a, ode, solver.label);
        check_budget(b, sde, solver.label);
        append_records(a, point, solver.label, "ode");
        append_records(b, point, solver.label, "sde");
        std::vector<double> diffs;
        for (std::size_t i = 0; i < a.records.size(); ++i) {
          diffs.push_back(a.records[i].accuracy - b.records[i].accuracy);
        }
        const auto [dmean, dse] = mean_and_stderr(diffs);
        row.insert(row.end(), problem.begin(), problem.end());
        row.insert(row.end(), {format_number(a.mean_accuracy), format_number(a.stderr_accuracy),
                               format_number(b.mean_accuracy), format_number(b.stderr_accuracy),
                               format_number(dmean), format_number(dse),
                               format_number(a.wall_seconds + b.wall_seconds)});
        if (log) {
          log(solver.label + " point " + std::to_string(point.index) + ": ode-sde " +
              format_number(dmean));
        }
      } else {
        const auto start = std::chrono::steady_clock::now();
        const CapacityResult r = capacity(c, size_grid, spec.capacity_threshold);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (const auto& cp : r.points) {
          nlohmann::ordered_json j;
          j["point"] = point.index;
          j["solver"] = solver.label;
          for (const auto& [k, v] : point.values) j[k] = kv_json(v);
          j["n"] = cp.size;
          j["search_space"] = cp.search_space;
          j["mean_accuracy"] = cp.mean_accuracy;
          j["stderr"] = cp.stderr_accuracy;
          jsonl += j.dump() + '\n';
          out.total_trials += c.trials;
        }
        const std::pair<const char*, int> cols[] = {{"D", c.dim},
                                                    {"K", c.factors},
                                                    {"m", c.m},
                                                    {"trials", c.trials},
                                                    {"iteration_budget", c.iteration_budget}};
        for (const auto& [name, value] : cols) {
          if (std::find(axis_keys.begin(), axis_keys.end(), name) == axis_keys.end()) {
            row.push_back(std::to_string(value));
          }
        }
        row.insert(row.end(), {r.found ? "true" : "false",
                               std::to_string(r.size), std::to_string(r.search_space),
                               std::to_string(r.points.size()), format_number(wall)});
        if (log) {
          log(solver.label + " point " + std::to_string(point.index) + ": capacity " +
              (r.found ? std::to_string(r.search_space) : std::string("not found")));
        }
      }
      csv += join(row);
    }
  }

  nlohmann::ordered_json meta;
  meta["name"] = spec.name;
  meta["mode"] = to_string(spec.mode);
  auto solvers = nlohmann::ordered_json::array();
  for (const auto& s : spec.solvers) {
    nlohmann::ordered_json sj;
    sj["label"] = s.label;
    sj["solver"] = to_string(s.base.solver);
    sj["overrides"] = entries_json(s.overrides);
    solvers.push_back(sj);
  }
  meta["solvers"] = solvers;
  meta["fixed"] = entries_json(spec.fixed);
  meta["overrides"] = entries_json(overrides);
  auto axes = nlohmann::ordered_json::object();
  for (const auto& a : spec.axes) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& v : a.values) arr.push_back(kv_json(v));
    axes[a.key] = arr;
  }
  meta["axes"] = axes;
  meta["default_size_grid"] = default_size_grid();
  if (spec.mode == SweepMode::capacity) {
    meta["size_grid"] = size_grid;
    meta["capacity_threshold"] = spec.capacity_threshold;
  }
  meta["fit_budget"] = spec.fit_budget;
  meta["points"] = points.size();

  out.csv = std::move(csv);
  out.jsonl = std::move(jsonl);
  out.metadata = meta.dump(2) + '\n';
  return out;
}

std::string long_format(std::string_view csv) {
  static const std::set<std::string, std::less<>> kMetrics = {
      "mean_accuracy", "stderr",       "diverged",          "mean_iterations",
      "flops_per_iteration", "wall_seconds", "accuracy_ode", "stderr_ode",
      "accuracy_sde",  "stderr_sde",   "difference",        "stderr_difference",
      "found",         "capacity_n",   "capacity",          "points_evaluated"};
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw ConfigError("plot-data: empty results file");
  const auto header = split_csv_line(line);
  std::vector<std::size_t> ids;
  std::vector<std::size_t> metrics;
  for (std::size_t i = 0; i < header.size(); ++i) {
    (kMetrics.contains(header[i]) ? metrics : ids).push_back(i);
  }
  if (metrics.empty()) throw ConfigError("plot-data: no metric columns in header");

  std::vector<std::string> out_header;
  for (auto i : ids) out_header.push_back(header[i]);
  out_header.insert(out_header.end(), {"metric", "value"});
  std::string out = join(out_header);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ConfigError("plot-data: line " + std::to_string(lineno) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header.size()));
    }
    std::vector<std::string> prefix;
    for (auto i : ids) {
      const bool needs_quotes = cells[i].find(',') != std::string::npos;
      prefix.push_back(needs_quotes ? "\"" + cells[i] + "\"" : cells[i]);
    }
    for (auto m : metrics) {
      auto row = prefix;
      row.push_back(header[m]);
      row.push_back(cells[m]);
      out += join(row);
    }
  }
  return out;
}

}  // namespace facdiff
