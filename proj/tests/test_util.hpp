#pragma once

#include <cmath>
#include <functional>

#include "facdiff/linalg.hpp"
#include "facdiff/rng.hpp"
#include "facdiff/vsa.hpp"

namespace facdiff::testing {

// Central-difference gradient of a scalar function.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x;
    Vec b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

// Central-difference Jacobian J[:, i] = d f / d x_i.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h) {
  const Vec f0 = f(x);
  Mat j(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x;
    Vec b = x;
    a[i] += h;
    b[i] -= h;
    j.col(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return j;
}

inline double rel_err(const Vec& got, const Vec& want) {
  const double scale = std::max(want.norm(), 1e-300);
  return (got - want).norm() / scale;
}

inline Mat random_bipolar(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = coin(rng) ? 1.0 : -1.0;
  return m;
}

// Sylvester Hadamard matrix of order 2^k.
inline Mat hadamard(int order) {
  Mat h = Mat::Ones(1, 1);
  while (h.rows() < order) {
    const Eigen::Index r = h.rows();
    Mat next(2 * r, 2 * r);
    next << h, h, h, -h;
    h = next;
  }
  return h;
}

}  // namespace facdiff::testing
