#pragma once

#include <vector>

#include "t2sg/errors.hpp"
#include "t2sg/gen/detections.hpp"
#include "t2sg/numeric/matrix.hpp"

namespace t2sg::train {

using num::Matrix;

// Supervision for one sample, in query index space.
struct Targets {
  Matrix cls;       // N x |C_lc| one-hot; all-zero row = background
  Matrix reg;       // N x 3l normalized GT points; zero rows for background
  Matrix reg_mask;  // N x 1, matched queries only
  Matrix edge_target;  // N x N {0,1}
  Matrix edge_mask;    // N x N; diagonal always off
};

// Maps GT categories, normalized points, and GT edges through the detector
// assignment. Background queries get the all-zero class vector and are
// excluded from regression; edge pairs involving background target 0.
inline Targets assign_targets(const gen::DetectionSample& s, bool mask_bg_pairs = true) {
  const std::size_t n = s.num_queries();
  const std::size_t n_lanes = s.scene.lanes.size();
  const std::size_t l = n ? s.pred_centerlines[0].size() : 0;
  const gen::BevNormalizer norm = s.normalizer();

  Targets t;
  t.cls = Matrix(n, scene::kNumLaneCategories);
  t.reg = Matrix(n, 3 * l);
  t.reg_mask = Matrix(n, 1);
  t.edge_target = Matrix(n, n);
  t.edge_mask = Matrix(n, n, 1.0);

  std::vector<int> gt_to_query(n_lanes, -1);
  for (std::size_t q = 0; q < n; ++q) {
    const int g = s.assignment[q];
    if (g < 0) continue;
    if (static_cast<std::size_t>(g) >= n_lanes || gt_to_query[g] != -1)
      throw DataError("assign_targets: assignment is not one query per GT lane");
    gt_to_query[g] = static_cast<int>(q);
    const scene::Lane& lane = s.scene.lanes[g];
    t.cls(q, static_cast<std::size_t>(lane.category)) = 1.0;
    t.reg_mask(q, 0) = 1.0;
    for (std::size_t k = 0; k < lane.centerline.size(); ++k) {
      const scene::Point3 p = norm.normalize(lane.centerline.points[k]);
      t.reg(q, 3 * k + 0) = p.x;
      t.reg(q, 3 * k + 1) = p.y;
      t.reg(q, 3 * k + 2) = p.z;
    }
  }
  for (std::size_t g = 0; g < n_lanes; ++g)
    if (gt_to_query[g] == -1) throw DataError("assign_targets: GT lane without a query");

  for (const auto& e : s.scene.edges)
    t.edge_target(gt_to_query[e.first], gt_to_query[e.second]) = 1.0;

  for (std::size_t i = 0; i < n; ++i) {
    t.edge_mask(i, i) = 0.0;
    if (!mask_bg_pairs) continue;
    for (std::size_t j = 0; j < n; ++j)
      if (s.assignment[i] < 0 && s.assignment[j] < 0) t.edge_mask(i, j) = 0.0;
  }
  return t;
}

}  // namespace t2sg::train
