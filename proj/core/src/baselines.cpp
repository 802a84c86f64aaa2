#include "facdiff/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace facdiff {

void BaselineConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("baseline: iterations must be >= 1");
  if (!(attention_beta >= 0.0)) throw std::invalid_argument("baseline: attention beta must be >= 0");
}

std::vector<Mat> raw_codebooks(const ProblemInstance& instance) {
  std::vector<Mat> out;
  out.reserve(instance.factors());
  for (const auto& cb : instance.codebooks) out.push_back(cb.raw());
  return out;
}

Vec raw_observation(const ProblemInstance& instance) {
  return instance.observation / instance.observation_scale;
}

std::vector<Vec> mean_estimates(std::span<const Mat> codebooks) {
  std::vector<Vec> out;
  out.reserve(codebooks.size());
  for (const auto& X : codebooks) out.push_back(X.rowwise().mean());
  return out;
}

Vec bipolar_sign(const Vec& v) {
  return v.unaryExpr([](double e) { return e < 0.0 ? -1.0 : 1.0; });
}

std::vector<Vec> resonator_step(std::span<const Mat> codebooks, const Vec& observation,
                                std::span<const Vec> estimates) {
  std::vector<Vec> out;
  out.reserve(codebooks.size());
  for (std::size_t j = 0; j < codebooks.size(); ++j) {
    const Vec unbound = observation.cwiseProduct(product_except(estimates, j, observation.size()));
    out.push_back(bipolar_sign(gemv(codebooks[j], gemv_t(codebooks[j], unbound))));
  }
  return out;
}

namespace {

Vec softmax(const Vec& logits) {
  Vec e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

DecodedSolution read_solution(const ProblemInstance& instance, std::span<const Mat> codebooks,
                              std::vector<Vec> estimates, int iterations) {
  DecodedSolution sol;
  for (std::size_t j = 0; j < codebooks.size(); ++j) {
    // Negating an even number of factors leaves the product unchanged, so
    // the readout ignores sign.
    sol.indices.push_back(cleanup_magnitude(codebooks[j], estimates[j]).index);
  }
  sol.reconstruction_similarity = reconstruction_similarity(instance, sol.indices);
  sol.factor_estimates = std::move(estimates);
  sol.iterations_used = iterations;
  return sol;
}

bool same_states(std::span<const Vec> a, std::span<const Vec> b, double tol) {
  for (std::size_t j = 0; j < a.size(); ++j) {
    if ((a[j] - b[j]).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

template <typename Step>
BaselineResult iterate(const ProblemInstance& instance, const BaselineConfig& config, double tol,
                       Step step) {
  config.validate();
  const auto books = raw_codebooks(instance);
  const Vec obs = raw_observation(instance);
  std::vector<Vec> prev;
  std::vector<Vec> x = mean_estimates(books);

  BaselineResult res;
  const flops::Scope work;
  for (int it = 0; it < config.iterations; ++it) {
    std::vector<Vec> next = step(books, obs, x);
    ++res.executed_iterations;
    if (config.convergence_check) {
      if (same_states(next, x, tol)) {
        res.converged = true;
        x = std::move(next);
        break;
      }
      if (!prev.empty() && same_states(next, prev, tol)) {
        // Period-2 cycle: further iterations only alternate.
        res.oscillating = true;
        if ((config.iterations - it - 1) % 2 == 1) next = x;
        x = std::move(next);
        break;
      }
    }
    prev = std::move(x);
    x = std::move(next);
  }
  res.flops = work.elapsed();
  // A fixed point or 2-cycle reproduces the N-iteration result, so the
  // charged budget is always N.
  res.solution = read_solution(instance, books, std::move(x), config.iterations);
  return res;
}

}  // namespace

double attention_logit_scale(const BaselineConfig& config, Eigen::Index dim) {
  return config.normalize_logits ? config.attention_beta / static_cast<double>(dim)
                                 : config.attention_beta;
}

std::vector<Vec> attention_resonator_step(std::span<const Mat> codebooks, const Vec& observation,
                                          std::span<const Vec> estimates, double logit_scale) {
  std::vector<Vec> out;
  out.reserve(codebooks.size());
  for (std::size_t j = 0; j < codebooks.size(); ++j) {
    const Vec unbound = observation.cwiseProduct(product_except(estimates, j, observation.size()));
    const Vec weights = softmax(logit_scale * gemv_t(codebooks[j], unbound));
    out.push_back(gemv(codebooks[j], weights));
  }
  return out;
}

BaselineResult resonator_run(const ProblemInstance& instance, const BaselineConfig& config) {
  return iterate(instance, config, 0.0, [](const auto& books, const Vec& obs, const auto& x) {
    return resonator_step(books, obs, x);
  });
}

BaselineResult attention_resonator_run(const ProblemInstance& instance,
                                       const BaselineConfig& config) {
  const double scale = attention_logit_scale(config, instance.dim());
  return iterate(instance, config, 1e-12, [scale](const auto& books, const Vec& obs, const auto& x) {
    return attention_resonator_step(books, obs, x, scale);
  });
}

Vec als_solve_factor(std::span<const Mat> codebooks, const Vec& observation,
                     std::span<const Vec> z, std::size_t j, bool* rank_deficient) {
  if (j >= codebooks.size() || z.size() != codebooks.size()) {
    throw std::invalid_argument("als: factor index out of range");
  }
  std::vector<Vec> decoded;
  decoded.reserve(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    decoded.push_back(i == j ? Vec::Ones(observation.size()) : gemv(codebooks[i], z[i]));
  }
  const Vec others = product_except(decoded, j, observation.size());
  const Mat A = others.asDiagonal() * codebooks[j];
  const Eigen::CompleteOrthogonalDecomposition<Mat> cod(A);
  const auto n = static_cast<std::uint64_t>(A.cols());
  flops::add(4ull * static_cast<std::uint64_t>(A.rows()) * n * n);
  if (rank_deficient) *rank_deficient = cod.rank() < A.cols();
  return cod.solve(observation);
}

double als_residual(std::span<const Mat> codebooks, const Vec& observation, std::span<const Vec> z) {
  Vec composed = Vec::Ones(observation.size());
  for (std::size_t i = 0; i < z.size(); ++i) composed.array() *= (codebooks[i] * z[i]).array();
  return (observation - composed).norm();
}

BaselineResult als_run(const ProblemInstance& instance, const BaselineConfig& config) {
  config.validate();
  const auto books = raw_codebooks(instance);
  const Vec obs = raw_observation(instance);
  BaselineResult res;
  res.underdetermined = instance.dim() < books.front().cols();

  std::vector<Vec> z;
  for (const auto& X : books) z.push_back(Vec::Constant(X.cols(), 1.0 / X.cols()));

  const flops::Scope work;
  for (int it = 0; it < config.iterations; ++it) {
    for (std::size_t j = 0; j < books.size(); ++j) {
      bool deficient = false;
      z[j] = als_solve_factor(books, obs, z, j, &deficient);
      res.rank_deficient = res.rank_deficient || deficient;
    }
    ++res.executed_iterations;
  }
  res.flops = work.elapsed();

  DecodedSolution sol;
  for (std::size_t j = 0; j < books.size(); ++j) {
    // The product form is invariant to flipping the sign of two factors, so
    // decode by magnitude.
    sol.indices.push_back(argmax_index(z[j].cwiseAbs()));
    sol.factor_estimates.push_back(books[j] * z[j]);
  }
  sol.reconstruction_similarity = reconstruction_similarity(instance, sol.indices);
  sol.iterations_used = config.iterations;
  res.solution = std::move(sol);
  return res;
}

}  // namespace facdiff
