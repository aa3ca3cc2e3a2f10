#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace t2sg::scene {

// The 10 signal-semantic lane categories.
enum class LaneCategory {
  kLane = 0,
  kGoStraight,
  kTurnLeft,
  kTurnRight,
  kNoLeftTurn,
  kNoRightTurn,
  kUTurn,
  kNoUTurn,
  kSlightLeft,
  kSlightRight,
};

constexpr std::size_t kNumLaneCategories = 10;

inline const char* to_string(LaneCategory c) {
  switch (c) {
    case LaneCategory::kLane: return "lane";
    case LaneCategory::kGoStraight: return "go_straight";
    case LaneCategory::kTurnLeft: return "turn_left";
    case LaneCategory::kTurnRight: return "turn_right";
    case LaneCategory::kNoLeftTurn: return "no_left_turn";
    case LaneCategory::kNoRightTurn: return "no_right_turn";
    case LaneCategory::kUTurn: return "u_turn";
    case LaneCategory::kNoUTurn: return "no_u_turn";
    case LaneCategory::kSlightLeft: return "slight_left";
    case LaneCategory::kSlightRight: return "slight_right";
  }
  return "lane";
}

inline LaneCategory lane_category_from_string(const std::string& s) {
  for (std::size_t i = 0; i < kNumLaneCategories; ++i) {
    const auto c = static_cast<LaneCategory>(i);
    if (s == to_string(c)) return c;
  }
  throw std::invalid_argument("unknown lane category: " + s);
}

// Traffic-element categories: the lane categories plus the three lights.
enum class TeCategory {
  kLane = 0,
  kGoStraight,
  kTurnLeft,
  kTurnRight,
  kNoLeftTurn,
  kNoRightTurn,
  kUTurn,
  kNoUTurn,
  kSlightLeft,
  kSlightRight,
  kRed,
  kGreen,
  kYellow,
};

inline const char* to_string(TeCategory c) {
  if (static_cast<int>(c) < static_cast<int>(kNumLaneCategories))
    return to_string(static_cast<LaneCategory>(c));
  switch (c) {
    case TeCategory::kRed: return "red";
    case TeCategory::kGreen: return "green";
    case TeCategory::kYellow: return "yellow";
    default: return "lane";
  }
}

inline TeCategory te_category_from_string(const std::string& s) {
  if (s == "red") return TeCategory::kRed;
  if (s == "green") return TeCategory::kGreen;
  if (s == "yellow") return TeCategory::kYellow;
  return static_cast<TeCategory>(lane_category_from_string(s));
}

inline bool is_light(TeCategory c) {
  return c == TeCategory::kRed || c == TeCategory::kGreen || c == TeCategory::kYellow;
}

// True when the traffic element carries the same signal semantics as the lane.
inline bool same_signal(LaneCategory lane, TeCategory te) {
  return !is_light(te) && static_cast<int>(lane) == static_cast<int>(te);
}

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Point3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline double l1_dist(const Point3& a, const Point3& b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y) + std::abs(a.z - b.z);
}

inline double l2_dist(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Directed lane centerline: ordered 3D points, first = start, last = end.
struct Centerline {
  std::vector<Point3> points;

  const Point3& start() const { return points.front(); }
  const Point3& end() const { return points.back(); }
  std::size_t size() const { return points.size(); }
};

struct Lane {
  LaneCategory category = LaneCategory::kLane;
  Centerline centerline;
};

using Edge = std::pair<std::size_t, std::size_t>;
using EdgeSet = std::set<Edge>;

// The T2SG: categorized directed centerlines plus directed lane-to-lane
// connectivity, self-loop free.
struct SceneGraph {
  std::vector<Lane> lanes;
  EdgeSet edges;
};

// Front-view signal entity; bbox is an image-plane box (x1, y1, x2, y2).
struct TrafficElement {
  std::array<double, 4> bbox{};
  TeCategory category = TeCategory::kLane;
};

struct SpmConfig {
  double epsilon = 1e-6;
  enum class Metric { kL1, kL2 } metric = Metric::kL1;
};

}  // namespace t2sg::scene
