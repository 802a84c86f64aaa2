#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

namespace facdiff {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Floating-point work accounting. Kernels that dominate the per-iteration
// cost of the solvers report the multiply-adds they execute here so that
// solvers can be compared by operation count instead of wall time.
namespace flops {

inline thread_local std::uint64_t counter = 0;

inline void add(std::uint64_t n) noexcept { counter += n; }
inline std::uint64_t read() noexcept { return counter; }
inline void reset() noexcept { counter = 0; }

// Captures the work performed by the current thread during its lifetime.
class Scope {
 public:
  Scope() noexcept : start_(counter) {}
  std::uint64_t elapsed() const noexcept { return counter - start_; }

 private:
  std::uint64_t start_;
};

}  // namespace flops

// Counted dense kernels.
inline Vec gemv_t(const Mat& m, const Vec& v) {
  flops::add(2ull * m.rows() * m.cols());
  return m.transpose() * v;
}

inline Vec gemv(const Mat& m, const Vec& v) {
  flops::add(2ull * m.rows() * m.cols());
  return m * v;
}

// m * w where w may be mostly exact zeros (saturated softmax weights); sparse
// weights touch only their nonzero columns.
inline Vec gemv_sparse(const Mat& m, const Vec& w) {
  std::uint64_t used = 0;
  for (Eigen::Index c = 0; c < w.size(); ++c) used += w[c] != 0.0;
  flops::add(2ull * m.rows() * used);
  if (4 * used > static_cast<std::uint64_t>(w.size())) return m * w;
  Vec out = Vec::Zero(m.rows());
  for (Eigen::Index c = 0; c < w.size(); ++c) {
    if (w[c] != 0.0) out.noalias() += w[c] * m.col(c);
  }
  return out;
}

// Elementwise product of every vector in `vs` except index `skip`.
inline Vec product_except(std::span<const Vec> vs, std::size_t skip, Eigen::Index dim) {
  Vec out = Vec::Ones(dim);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i != skip) out.array() *= vs[i].array();
  }
  flops::add(static_cast<std::uint64_t>(dim) * (vs.size() > 0 ? vs.size() - 1 : 0));
  return out;
}

}  // namespace facdiff
