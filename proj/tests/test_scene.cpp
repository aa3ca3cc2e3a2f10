#include <catch2/catch_amalgamated.hpp>

#include "t2sg/numeric/rng.hpp"
#include "t2sg/scene/graph_ops.hpp"
#include "t2sg/scene/types.hpp"

using namespace t2sg;
using scene::Centerline;
using scene::Lane;
using scene::Point3;

namespace {

Centerline line2(Point3 a, Point3 b) { return Centerline{{a, b}}; }

std::vector<Centerline> translated(const std::vector<Centerline>& in, Point3 d) {
  std::vector<Centerline> out = in;
  for (auto& c : out)
    for (auto& p : c.points) p = p + d;
  return out;
}

std::vector<Centerline> scaled(const std::vector<Centerline>& in, double s) {
  std::vector<Centerline> out = in;
  for (auto& c : out)
    for (auto& p : c.points) p = p * s;
  return out;
}

}  // namespace

TEST_CASE("spm reproduces the two-lane hand case") {
  std::vector<Centerline> lanes{line2({0, 0, 0}, {1, 0, 0}), line2({2, 0, 0}, {3, 0, 0})};
  scene::SpmConfig cfg;  // epsilon 1e-6, l1
  num::Matrix a = scene::spm(lanes, cfg);

  // independent scalar evaluation with the epsilon correction accounted
  const double eps = cfg.epsilon;
  const double i00 = 1.0 / (1.0 + eps), i01 = 1.0 / (1.0 + eps);
  const double i10 = 1.0 / (3.0 + eps), i11 = 1.0 / (1.0 + eps);
  const double mean = (i00 + i01 + i10 + i11) / 4.0;
  CHECK(std::abs(a(0, 0) - i00 / mean) < 1e-9);
  CHECK(std::abs(a(0, 1) - i01 / mean) < 1e-9);
  CHECK(std::abs(a(1, 0) - i10 / mean) < 1e-9);
  CHECK(std::abs(a(1, 1) - i11 / mean) < 1e-9);

  // and the idealized eps->0 values hold to ~1e-6
  CHECK(a(0, 0) == Catch::Approx(1.2).margin(1e-6));
  CHECK(a(0, 1) == Catch::Approx(1.2).margin(1e-6));
  CHECK(a(1, 0) == Catch::Approx(0.4).margin(1e-6));
  CHECK(a(1, 1) == Catch::Approx(1.2).margin(1e-6));
}

TEST_CASE("spm single lane is its own mean") {
  std::vector<Centerline> lanes{line2({0, 0, 0}, {5, 0, 0})};
  num::Matrix a = scene::spm(lanes);
  CHECK(a(0, 0) == 1.0);
}

TEST_CASE("spm coincident end/start dominates its row") {
  std::vector<Centerline> lanes{line2({0, 0, 0}, {1, 0, 0}), line2({1, 0, 0}, {2, 0, 0})};
  scene::SpmConfig cfg;
  num::Matrix a = scene::spm(lanes, cfg);
  // pre-normalization entry (0,1) is 1/eps = 1e6; after normalization it must
  // dwarf every other entry
  CHECK(a(0, 1) > 100.0 * a(0, 0));
  CHECK(a(0, 1) > 100.0 * a(1, 0));
}

TEST_CASE("spm is invariant to rigid translation") {
  num::Rng rng(21);
  std::vector<Centerline> lanes;
  for (int i = 0; i < 5; ++i)
    lanes.push_back(line2({rng.uniform(-40, 40), rng.uniform(-40, 40), 0},
                          {rng.uniform(-40, 40), rng.uniform(-40, 40), 0}));
  num::Matrix a = scene::spm(lanes);
  num::Matrix b = scene::spm(translated(lanes, {13.7, -2.9, 4.2}));
  CHECK(num::max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("spm normalization cancels uniform scaling away from epsilon") {
  num::Rng rng(22);
  std::vector<Centerline> lanes;
  for (int i = 0; i < 4; ++i)
    lanes.push_back(line2({rng.uniform(-40, 40), rng.uniform(-40, 40), 0},
                          {rng.uniform(-40, 40), rng.uniform(-40, 40), 0}));
  num::Matrix a = scene::spm(lanes);
  num::Matrix b = scene::spm(scaled(lanes, 3.0));
  CHECK(num::max_abs_diff(a, b) < 1e-6);
}

TEST_CASE("gt_connectivity endpoint rule") {
  Lane a{scene::LaneCategory::kLane, line2({0, 0, 0}, {10, 0, 0})};
  Lane b{scene::LaneCategory::kLane, line2({10, 0, 0}, {20, 0, 0})};
  auto edges = scene::gt_connectivity({a, b}, 0.5);
  CHECK(edges == scene::EdgeSet{{0, 1}});

  Lane c{scene::LaneCategory::kLane, line2({11.0, 0, 0}, {20, 0, 0})};
  CHECK(scene::gt_connectivity({a, c}, 0.5).empty());

  // both directions only when both endpoint conditions hold independently
  Lane u{scene::LaneCategory::kLane, line2({0, 0, 0}, {5, 0, 0})};
  Lane v{scene::LaneCategory::kLane, line2({5, 0, 0}, {0, 0, 0})};
  auto both = scene::gt_connectivity({u, v}, 0.5);
  CHECK(both.count({0, 1}) == 1);
  CHECK(both.count({1, 0}) == 1);

  CHECK_THROWS(scene::gt_connectivity({a, b}, 0.0));
}

TEST_CASE("validate flags structural violations") {
  scene::SceneGraph g;
  g.lanes.push_back({scene::LaneCategory::kLane, line2({0, 0, 0}, {1, 0, 0})});
  g.lanes.push_back({scene::LaneCategory::kLane, line2({1, 0, 0}, {2, 0, 0})});
  g.edges.insert({0, 1});
  CHECK(scene::validate(g).empty());

  scene::SceneGraph self = g;
  self.edges.insert({1, 1});
  auto v1 = scene::validate(self);
  REQUIRE(v1.size() == 1);
  CHECK(v1[0].find("self-loop at 1") != std::string::npos);

  scene::SceneGraph oob = g;
  oob.edges.insert({0, 9});
  auto v2 = scene::validate(oob);
  REQUIRE(v2.size() == 1);
  CHECK(v2[0].find("out of range") != std::string::npos);

  scene::SceneGraph degenerate;
  degenerate.lanes.push_back({scene::LaneCategory::kLane, Centerline{{{1, 1, 1}, {1, 1, 1}}}});
  CHECK(!scene::validate(degenerate).empty());
}

TEST_CASE("lane category round trips") {
  for (std::size_t i = 0; i < scene::kNumLaneCategories; ++i) {
    const auto c = static_cast<scene::LaneCategory>(i);
    CHECK(scene::lane_category_from_string(scene::to_string(c)) == c);
  }
  CHECK_THROWS(scene::lane_category_from_string("bogus"));
  CHECK(scene::te_category_from_string("red") == scene::TeCategory::kRed);
  CHECK(scene::same_signal(scene::LaneCategory::kTurnLeft, scene::TeCategory::kTurnLeft));
  CHECK(!scene::same_signal(scene::LaneCategory::kTurnLeft, scene::TeCategory::kRed));
}
