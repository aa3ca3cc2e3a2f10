// Independent oracle implementations for tests: deliberately scalar,
// loop-based, and disjoint from the library's code paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "t2sg/numeric/matrix.hpp"
#include "t2sg/scene/types.hpp"

namespace oracles {

using t2sg::num::Matrix;

// scaled dot-product attention with optional additive bias, element by element
inline Matrix attention_oracle(const Matrix& x, const Matrix& wq, const Matrix& wk,
                               const Matrix& wv, const Matrix* add_bias) {
  const std::size_t n = x.rows(), d = x.cols();
  auto mm = [](const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
        c(i, j) = s;
      }
    return c;
  };
  const Matrix q = mm(x, wq), k = mm(x, wk), v = mm(x, wv);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix logits(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += q(i, c) * k(j, c);
      logits(i, j) = s * scale + (add_bias ? (*add_bias)(i, j) : 0.0);
    }
  Matrix out(n, d);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, logits(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      w[j] = std::exp(logits(i, j) - mx);
      sum += w[j];
    }
    for (std::size_t j = 0; j < n; ++j) w[j] /= sum;
    for (std::size_t c = 0; c < d; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += w[j] * v(j, c);
      out(i, c) = s;
    }
  }
  return out;
}

// exhaustive discrete Frechet by recursion over all monotone couplings
inline double frechet_recurse(const t2sg::scene::Centerline& p, const t2sg::scene::Centerline& q,
                              std::size_t i, std::size_t j) {
  const double d = t2sg::scene::l2_dist(p.points[i], q.points[j]);
  if (i == 0 && j == 0) return d;
  double reach;
  if (i == 0)
    reach = frechet_recurse(p, q, 0, j - 1);
  else if (j == 0)
    reach = frechet_recurse(p, q, i - 1, 0);
  else
    reach = std::min({frechet_recurse(p, q, i - 1, j), frechet_recurse(p, q, i, j - 1),
                      frechet_recurse(p, q, i - 1, j - 1)});
  return std::max(reach, d);
}

inline double frechet_bruteforce(const t2sg::scene::Centerline& p,
                                 const t2sg::scene::Centerline& q) {
  return frechet_recurse(p, q, p.size() - 1, q.size() - 1);
}

}  // namespace oracles
