#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "t2sg/scene/types.hpp"

namespace t2sg::eval {

// Discrete Fréchet distance between two polylines (Euclidean point metric),
// by dynamic programming over monotone couplings.
inline double discrete_frechet(const scene::Centerline& p, const scene::Centerline& q) {
  const std::size_t n = p.size(), m = q.size();
  if (n == 0 || m == 0) throw std::invalid_argument("discrete_frechet: empty polyline");
  std::vector<double> prev(m), cur(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double d = scene::l2_dist(p.points[0], q.points[j]);
    prev[j] = j == 0 ? d : std::max(prev[j - 1], d);
  }
  for (std::size_t i = 1; i < n; ++i) {
    cur[0] = std::max(prev[0], scene::l2_dist(p.points[i], q.points[0]));
    for (std::size_t j = 1; j < m; ++j) {
      const double reach = std::min({prev[j], prev[j - 1], cur[j - 1]});
      cur[j] = std::max(reach, scene::l2_dist(p.points[i], q.points[j]));
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

}  // namespace t2sg::eval
