#include <benchmark/benchmark.h>

#include <cmath>

#include "facdiff/baselines.hpp"
#include "facdiff/experiment.hpp"
#include "facdiff/guidance.hpp"
#include "facdiff/sampler.hpp"
#include "facdiff/score.hpp"

namespace {

using namespace facdiff;

// Args: D, n. K = 3 throughout.
ProblemInstance instance(const benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const int size = static_cast<int>(state.range(1));
  return random_instance(7, dim, size, 3, 1, 1000.0 / std::sqrt(double(dim)));
}

void sizes(benchmark::internal::Benchmark* b) {
  b->Args({1000, 22})->Args({1000, 50})->Args({2000, 100});
}

void BM_ScoreEvaluate(benchmark::State& state) {
  const auto inst = instance(state);
  const auto priors = make_priors(inst, Space::vector, 1e-6);
  const auto s = build_schedule(50, 0.1, 20.0, 0.05);
  Rng rng(1);
  const Vec x = standard_normal(inst.dim(), rng);
  for (auto _ : state) {
    const auto ev = evaluate(priors[0], x, 25, s);
    benchmark::DoNotOptimize(tweedie(ev, x));
  }
}
BENCHMARK(BM_ScoreEvaluate)->Apply(sizes);

void BM_TweedieVjp(benchmark::State& state) {
  const auto inst = instance(state);
  const auto priors = make_priors(inst, Space::vector, 1e-6);
  const auto s = build_schedule(50, 0.1, 20.0, 0.05);
  Rng rng(2);
  const Vec x = standard_normal(inst.dim(), rng);
  const Vec v = standard_normal(inst.dim(), rng);
  const auto ev = evaluate(priors[0], x, 25, s);
  for (auto _ : state) benchmark::DoNotOptimize(tweedie_vjp(priors[0], ev, v));
}
BENCHMARK(BM_TweedieVjp)->Apply(sizes);

void BM_ReverseStep(benchmark::State& state) {
  const auto inst = instance(state);
  const auto cfg = preset("similarity");
  const auto priors = make_priors(inst, Space::vector, 1e-6);
  const auto s = build_schedule(50, 0.1, 20.0, cfg.sigma0);
  Rng rng(3);
  std::vector<FactorState> xs;
  for (int j = 0; j < 3; ++j) xs.push_back({standard_normal(inst.dim(), rng), 25, 0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        reverse_step(xs, 25, priors, inst.observation, cfg.coupling, s, Integrator::ode, rng));
  }
}
BENCHMARK(BM_ReverseStep)->Apply(sizes);

void BM_ResonatorStep(benchmark::State& state) {
  const auto inst = instance(state);
  const auto books = raw_codebooks(inst);
  const Vec obs = raw_observation(inst);
  const auto x = mean_estimates(books);
  for (auto _ : state) benchmark::DoNotOptimize(resonator_step(books, obs, x));
}
BENCHMARK(BM_ResonatorStep)->Apply(sizes);

void BM_AttentionStep(benchmark::State& state) {
  const auto inst = instance(state);
  const auto books = raw_codebooks(inst);
  const Vec obs = raw_observation(inst);
  const auto x = mean_estimates(books);
  for (auto _ : state) benchmark::DoNotOptimize(attention_resonator_step(books, obs, x, 0.25));
}
BENCHMARK(BM_AttentionStep)->Apply(sizes);

void BM_AlsSolveFactor(benchmark::State& state) {
  const auto inst = instance(state);
  const auto books = raw_codebooks(inst);
  const Vec obs = raw_observation(inst);
  std::vector<Vec> z(3, Vec::Constant(inst.codebooks[0].size(), 0.1));
  for (auto _ : state) benchmark::DoNotOptimize(als_solve_factor(books, obs, z, 0));
}
BENCHMARK(BM_AlsSolveFactor)->Apply(sizes);

void BM_SimilarityTrial(benchmark::State& state) {
  ExperimentConfig c = preset("similarity");
  c.dim = static_cast<int>(state.range(0));
  c.size = static_cast<int>(state.range(1));
  c.factors = 3;
  c.normalize();
  const auto inst = trial_instance(c, 0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_instance(c, inst, 11));
}
BENCHMARK(BM_SimilarityTrial)->Args({1000, 22})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
