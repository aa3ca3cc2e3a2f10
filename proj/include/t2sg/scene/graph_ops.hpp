#pragma once

#include <string>
#include <vector>

#include "t2sg/numeric/matrix.hpp"
#include "t2sg/scene/types.hpp"

namespace t2sg::scene {

// Spatial proximity matrix: inverse end-to-start distances, normalized by the
// mean over all N^2 entries. The diagonal (own end to own start) is computed
// like any other entry, not masked.
inline num::Matrix spm(const std::vector<Centerline>& centerlines, const SpmConfig& cfg = {}) {
  if (centerlines.empty()) throw std::invalid_argument("spm: need at least one centerline");
  if (cfg.epsilon <= 0.0) throw std::invalid_argument("spm: epsilon must be positive");
  const std::size_t n = centerlines.size();
  num::Matrix inv(n, n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point3& e = centerlines[i].end();
    for (std::size_t j = 0; j < n; ++j) {
      const Point3& s = centerlines[j].start();
      const double d =
          cfg.metric == SpmConfig::Metric::kL1 ? l1_dist(e, s) : l2_dist(e, s);
      inv(i, j) = 1.0 / (d + cfg.epsilon);
      sum += inv(i, j);
    }
  }
  const double mean = sum / static_cast<double>(n * n);
  return num::scale(inv, 1.0 / mean);
}

// Edge (i, j) iff the Euclidean gap from lane i's end point to lane j's start
// point is within tau, excluding self-loops.
inline EdgeSet gt_connectivity(const std::vector<Lane>& lanes, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("gt_connectivity: tau must be positive");
  EdgeSet edges;
  for (std::size_t i = 0; i < lanes.size(); ++i)
    for (std::size_t j = 0; j < lanes.size(); ++j) {
      if (i == j) continue;
      if (l2_dist(lanes[i].centerline.end(), lanes[j].centerline.start()) <= tau)
        edges.insert({i, j});
    }
  return edges;
}

// Structural validation; returns one message per violation, empty when ok.
inline std::vector<std::string> validate(const SceneGraph& g) {
  std::vector<std::string> violations;
  for (std::size_t i = 0; i < g.lanes.size(); ++i) {
    const auto& pts = g.lanes[i].centerline.points;
    if (pts.size() < 2) {
      violations.push_back("lane " + std::to_string(i) + ": fewer than 2 points");
      continue;
    }
    bool all_same = true;
    for (std::size_t k = 1; k < pts.size() && all_same; ++k)
      if (!(pts[k] == pts[0])) all_same = false;
    if (all_same) violations.push_back("lane " + std::to_string(i) + ": degenerate centerline");
  }
  for (const Edge& e : g.edges) {
    if (e.first == e.second)
      violations.push_back("self-loop at " + std::to_string(e.first));
    if (e.first >= g.lanes.size() || e.second >= g.lanes.size())
      violations.push_back("edge (" + std::to_string(e.first) + ", " + std::to_string(e.second) +
                           ") out of range");
  }
  return violations;
}

}  // namespace t2sg::scene
