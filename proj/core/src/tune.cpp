#include "facdiff/tune.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "json.hpp"

namespace facdiff {

namespace {

using Kind = ParamRange::Kind;

const std::set<std::string, std::less<>> kLogKeys = {
    "coupling.eta", "schedule.sigma0", "coupling.lambda", "prior.softmax_temp"};
const std::set<std::string, std::less<>> kIntegerKeys = {"schedule.T", "sampler.R"};

constexpr int kMaxDraws = 100000;

ParamRange numeric(std::string key, double lo, double hi) {
  ParamRange p;
  p.key = std::move(key);
  p.lo = lo;
  p.hi = hi;
  if (kIntegerKeys.contains(p.key)) p.kind = Kind::integer;
  else if (kLogKeys.contains(p.key) && lo > 0.0) p.kind = Kind::log_uniform;
  else p.kind = Kind::uniform;
  return p;
}

ParamRange choice(std::string key, std::vector<std::string> choices) {
  ParamRange p;
  p.key = std::move(key);
  p.kind = Kind::choice;
  p.choices = std::move(choices);
  return p;
}

ParamRange from_value(const std::string& key, const KvValue& v) {
  if (v.kind == KvValue::Kind::array) {
    if (v.items.empty()) throw ConfigError("tune space: empty array for " + key);
    const bool all_numbers = std::all_of(v.items.begin(), v.items.end(), [](const KvValue& i) {
      return i.kind == KvValue::Kind::number;
    });
    if (all_numbers && v.items.size() == 2) {
      const double lo = v.items[0].as_number();
      const double hi = v.items[1].as_number();
      if (!(lo <= hi)) throw ConfigError("tune space: range for " + key + " has lo > hi");
      return numeric(key, lo, hi);
    }
    return choice(key, v.as_list());
  }
  if (v.kind == KvValue::Kind::number) return numeric(key, v.as_number(), v.as_number());
  return choice(key, {v.text});
}

KvValue draw(const ParamRange& p, Rng& rng) {
  switch (p.kind) {
    case Kind::choice: {
      std::uniform_int_distribution<std::size_t> pick(0, p.choices.size() - 1);
      const std::string& c = p.choices[pick(rng)];
      if (c == "true" || c == "false") return kv_bool(c == "true");
      return kv_string(c);
    }
    case Kind::integer: {
      std::uniform_int_distribution<long long> pick(std::llround(p.lo), std::llround(p.hi));
      return kv_integer(pick(rng));
    }
    case Kind::log_uniform: {
      if (p.lo == p.hi) return kv_number(p.lo);
      std::uniform_real_distribution<double> u(std::log(p.lo), std::log(p.hi));
      return kv_number(std::exp(u(rng)));
    }
    case Kind::uniform: {
      if (p.lo == p.hi) return kv_number(p.lo);
      std::uniform_real_distribution<double> u(p.lo, p.hi);
      return kv_number(u(rng));
    }
  }
  return {};
}

}  // namespace

bool ParamRange::fixed() const {
  return kind == Kind::choice ? choices.size() == 1 : lo == hi;
}

TuneSpace TuneSpace::defaults(Solver solver) {
  if (!is_diffusion(solver)) {
    throw ConfigError("tune: only diffusion solvers have tunables, got " +
                      std::string(to_string(solver)));
  }
  TuneSpace s;
  s.objective = preset(to_string(solver));
  s.objective.dim = 1000;
  s.objective.factors = 3;
  s.objective.size = 50;
  s.objective.m = 1;
  s.objective.trials = 20;
  s.objective.iteration_budget = 100;
  s.params = {
      numeric("coupling.eta", 1e-3, 10.0),
      choice("coupling.guidance_schedule", {"constant", "linear", "snr", "sigma"}),
      numeric("coupling.cond_clip_ratio", 1.0, 20.0),
      numeric("schedule.sigma0", 1e-4, 0.3),
      numeric("prior.softmax_temp", 1e-8, 20.0),
      numeric("coupling.lambda", 1e-2, 100.0),
      numeric("schedule.T", 25, 100),
      numeric("sampler.R", 1, 20),
      numeric("sampler.rho", 0.05, 1.0),
  };
  return s;
}

TuneSpace TuneSpace::from_document(const KvDocument& doc) {
  const auto solver_value = doc.get("solver");
  if (!solver_value) throw ConfigError("tune space: missing solver");
  TuneSpace s = defaults(solver_from_string(solver_value->text));
  for (const auto& [key, value] : doc.section("objective")) set_config_value(s.objective, key, value);
  for (const auto& [key, value] : doc.section("fixed")) set_config_value(s.objective, key, value);
  s.objective.normalize();

  for (const auto& [key, value] : doc.section("space")) {
    ParamRange p = from_value(key, value);
    // Probe the key against a scratch config so typos fail before tuning starts.
    ExperimentConfig probe = s.objective;
    Rng rng(0);
    set_config_value(probe, key, draw(p, rng));
    auto it = std::find_if(s.params.begin(), s.params.end(),
                           [&](const ParamRange& q) { return q.key == key; });
    if (it != s.params.end()) *it = std::move(p);
    else s.params.push_back(std::move(p));
  }
  return s;
}

TuneSpace TuneSpace::pinned(const ExperimentConfig& config) {
  TuneSpace s = defaults(config.solver);
  s.objective = config;
  for (auto& p : s.params) {
    for (const auto& [key, value] : config_entries(config)) {
      if (key == p.key) p = from_value(key, value);
    }
  }
  return s;
}

ExperimentConfig sample_config(const TuneSpace& space, Rng& rng) {
  for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
    ExperimentConfig c = space.objective;
    for (const auto& p : space.params) set_config_value(c, p.key, draw(p, rng));
    c.normalize();
    if (c.sampler.restart_index() < 1) continue;
    if (c.sampler.iteration_budget() > c.iteration_budget) continue;
    try {
      c.validate();
    } catch (const ConfigError&) {
      continue;
    }
    return c;
  }
  throw ConfigError("tune space admits no valid configuration within the iteration budget");
}

std::string TuneCandidate::to_json() const {
  nlohmann::ordered_json j;
  j["candidate"] = index;
  j["mean_accuracy"] = mean_accuracy;
  j["stderr"] = stderr_accuracy;
  for (const auto& [key, value] : config_entries(config)) {
    if (value.kind == KvValue::Kind::number) j[key] = value.as_number();
    else if (value.kind == KvValue::Kind::boolean) j[key] = value.as_bool();
    else j[key] = value.text;
  }
  return j.dump();
}

TuneResult tune(const TuneSpace& space, int budget, std::uint64_t seed,
                const std::function<void(const TuneCandidate&)>& progress) {
  if (budget < 1) throw ConfigError("tune: budget must be >= 1");
  Rng rng(derive_seed(seed, 0x7475));
  TuneResult result;
  for (int i = 0; i < budget; ++i) {
    TuneCandidate cand;
    cand.index = i;
    cand.config = sample_config(space, rng);
    const TrialSummary summary = run_trials(cand.config);
    cand.mean_accuracy = summary.mean_accuracy;
    cand.stderr_accuracy = summary.stderr_accuracy;
    if (i == 0 || cand.mean_accuracy > result.best_accuracy) {
      result.best = cand.config;
      result.best_accuracy = cand.mean_accuracy;
      result.best_stderr = cand.stderr_accuracy;
      result.best_index = i;
    }
    if (progress) progress(cand);
    result.candidates.push_back(std::move(cand));
  }
  return result;
}

}  // namespace facdiff
