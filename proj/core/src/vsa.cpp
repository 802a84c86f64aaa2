#include "facdiff/vsa.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

#include "facdiff/rng.hpp"

namespace facdiff {

Codebook::Codebook(Mat raw, double scale) : raw_(std::move(raw)), scale_(scale) {
  if (!(scale_ > 0.0) || !std::isfinite(scale_)) {
    throw std::invalid_argument("codebook scale must be positive");
  }
  if (raw_.rows() < 1 || raw_.cols() < 1) {
    throw std::invalid_argument("codebook must be at least 1x1");
  }
  for (Eigen::Index i = 0; i < raw_.size(); ++i) {
    const double e = raw_.data()[i];
    if (e != 1.0 && e != -1.0) throw std::invalid_argument("codebook entries must be +-1");
  }
  scaled_ = scale_ * raw_;
}

double Codebook::column_norm() const noexcept {
  return scale_ * std::sqrt(static_cast<double>(raw_.rows()));
}

namespace {

std::string column_key(const Mat& m, Eigen::Index c) {
  std::string key(static_cast<std::size_t>(m.rows()), '+');
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (m(r, c) < 0) key[static_cast<std::size_t>(r)] = '-';
  }
  return key;
}

}  // namespace

std::vector<Codebook> generate_codebooks(std::uint64_t seed, int dim, int size, int factors,
                                         double scale) {
  if (dim < 1 || size < 1 || factors < 1) {
    throw std::invalid_argument("generate_codebooks: D, n and K must be positive");
  }
  if (!(scale > 0.0)) throw std::invalid_argument("generate_codebooks: scale must be positive");
  if (dim < 63 && static_cast<std::uint64_t>(size) > (1ull << dim)) {
    throw std::invalid_argument("generate_codebooks: n exceeds the number of distinct columns");
  }

  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<Codebook> out;
  out.reserve(static_cast<std::size_t>(factors));
  for (int k = 0; k < factors; ++k) {
    Mat raw(dim, size);
    std::set<std::string> seen;
    for (Eigen::Index c = 0; c < size; ++c) {
      // Resample a column until it differs from all earlier ones.
      for (;;) {
        for (Eigen::Index r = 0; r < dim; ++r) raw(r, c) = coin(rng) ? 1.0 : -1.0;
        if (seen.insert(column_key(raw, c)).second) break;
      }
    }
    out.emplace_back(std::move(raw), scale);
  }
  return out;
}

Vec bind(std::span<const Vec> vectors) {
  if (vectors.empty()) throw std::invalid_argument("bind: empty input");
  Vec out = vectors.front();
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    if (vectors[i].size() != out.size()) throw std::invalid_argument("bind: dimension mismatch");
    out.array() *= vectors[i].array();
  }
  return out;
}

ProblemInstance make_instance(std::vector<Codebook> codebooks, std::vector<int> true_indices,
                              int m, std::uint64_t seed, ObservationScaling scaling) {
  if (codebooks.empty()) throw std::invalid_argument("make_instance: need at least one codebook");
  if (m < 1) throw std::invalid_argument("make_instance: m must be >= 1");
  if (true_indices.size() != codebooks.size()) {
    throw std::invalid_argument("make_instance: one index per codebook required");
  }
  const Eigen::Index dim = codebooks.front().dim();
  std::vector<Vec> factors;
  for (std::size_t j = 0; j < codebooks.size(); ++j) {
    const auto& cb = codebooks[j];
    if (cb.dim() != dim) throw std::invalid_argument("make_instance: codebook dims differ");
    if (true_indices[j] < 0 || true_indices[j] >= cb.size()) {
      throw std::invalid_argument("make_instance: index out of range");
    }
    if (cb.scale() != codebooks.front().scale()) {
      throw std::invalid_argument("make_instance: codebook scales differ");
    }
    factors.emplace_back(cb.raw().col(true_indices[j]));
  }

  ProblemInstance inst;
  const double scale = codebooks.front().scale();
  inst.observation_scale = scaling == ObservationScaling::product
                               ? std::pow(scale, static_cast<double>(codebooks.size()))
                               : scale;
  inst.noise_sigma = std::sqrt(static_cast<double>(m - 1));
  inst.seed = seed;

  Vec clean = facdiff::bind(std::span<const Vec>(factors));
  if (inst.noise_sigma > 0.0) {
    Rng rng(seed);
    clean += inst.noise_sigma * standard_normal(dim, rng);
  }
  inst.observation = inst.observation_scale * clean;
  inst.codebooks = std::move(codebooks);
  inst.true_indices = std::move(true_indices);
  return inst;
}

ProblemInstance random_instance(std::uint64_t seed, int dim, int size, int factors, int m,
                                double scale, ObservationScaling scaling) {
  auto books = generate_codebooks(derive_seed(seed, 1), dim, size, factors, scale);
  Rng rng(derive_seed(seed, 2));
  std::uniform_int_distribution<int> pick(0, size - 1);
  std::vector<int> idx(static_cast<std::size_t>(factors));
  for (auto& i : idx) i = pick(rng);
  return make_instance(std::move(books), std::move(idx), m, derive_seed(seed, 3), scaling);
}

CleanupResult cleanup(const Mat& columns, const Vec& estimate) {
  if (columns.rows() != estimate.size()) throw std::invalid_argument("cleanup: dimension mismatch");
  const double enorm = estimate.norm();
  if (enorm == 0.0 || !std::isfinite(enorm)) return {0, 0.0, true};
  const Vec dots = gemv_t(columns, estimate);
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < dots.size(); ++c) {
    if (dots[c] > dots[best]) best = c;
  }
  const double cnorm = columns.col(best).norm();
  return {static_cast<int>(best), cnorm > 0 ? dots[best] / (cnorm * enorm) : 0.0, false};
}

CleanupResult cleanup_magnitude(const Mat& columns, const Vec& estimate) {
  if (columns.rows() != estimate.size()) throw std::invalid_argument("cleanup: dimension mismatch");
  const double enorm = estimate.norm();
  if (enorm == 0.0 || !std::isfinite(enorm)) return {0, 0.0, true};
  const Vec dots = gemv_t(columns, estimate);
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < dots.size(); ++c) {
    if (std::abs(dots[c]) > std::abs(dots[best])) best = c;
  }
  const double cnorm = columns.col(best).norm();
  return {static_cast<int>(best), cnorm > 0 ? dots[best] / (cnorm * enorm) : 0.0, false};
}

CleanupResult cleanup(const Codebook& codebook, const Vec& estimate) {
  return cleanup(codebook.raw(), estimate);
}

int argmax_index(const Vec& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<int>(best);
}

double cosine(const Vec& a, const Vec& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

double reconstruction_similarity(const ProblemInstance& instance, std::span<const int> indices) {
  Vec composed = Vec::Ones(instance.dim());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    composed.array() *= instance.codebooks[j].raw().col(indices[j]).array();
  }
  return cosine(composed, instance.observation);
}

double accuracy(std::span<const int> decoded, const ProblemInstance& instance) {
  if (decoded.size() != instance.true_indices.size() || decoded.empty()) {
    throw std::invalid_argument("accuracy: factor count mismatch");
  }
  int correct = 0;
  for (std::size_t j = 0; j < decoded.size(); ++j) {
    if (decoded[j] == instance.true_indices[j]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(decoded.size());
}

double accuracy(const DecodedSolution& solution, const ProblemInstance& instance) {
  return accuracy(solution.indices, instance);
}

}  // namespace facdiff
