#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <map>

#include "t2sg/gen/dataset_io.hpp"
#include "t2sg/gen/detections.hpp"
#include "t2sg/gen/scenario.hpp"
#include "t2sg/scene/graph_ops.hpp"

using namespace t2sg;
using gen::ScenarioKind;
using gen::ScenarioSpec;

namespace {

ScenarioSpec base_spec(ScenarioKind kind, std::uint64_t seed) {
  ScenarioSpec s;
  s.kind = kind;
  s.seed = seed;
  return s;
}

std::map<scene::LaneCategory, int> category_counts(const scene::SceneGraph& g) {
  std::map<scene::LaneCategory, int> counts;
  for (const auto& lane : g.lanes) counts[lane.category]++;
  return counts;
}

const char* tmp_path(const char* name) {
  static std::string p;
  p = std::string("/tmp/t2sg_test_") + name;
  return p.c_str();
}

}  // namespace

TEST_CASE("straight scene: two chained lanes") {
  auto g = gen::generate_scene(base_spec(ScenarioKind::kStraight, 3));
  REQUIRE(g.lanes.size() == 2);
  REQUIRE(g.edges == scene::EdgeSet{{0, 1}});
  for (const auto& lane : g.lanes)
    CHECK((lane.category == scene::LaneCategory::kLane ||
           lane.category == scene::LaneCategory::kGoStraight));
  CHECK(scene::validate(g).empty());
  for (const auto& lane : g.lanes) CHECK(lane.centerline.size() == 11);
}

TEST_CASE("crossroad with one lane per arm: hand-enumerated layout") {
  auto g = gen::generate_scene(base_spec(ScenarioKind::kCrossroad, 17));
  // 4 incoming + 4 outgoing + 4*3 connectors
  REQUIRE(g.lanes.size() == 20);
  // incoming->connector and connector->outgoing per connector
  REQUIRE(g.edges.size() == 24);

  auto counts = category_counts(g);
  CHECK(counts[scene::LaneCategory::kTurnLeft] == 4);
  CHECK(counts[scene::LaneCategory::kTurnRight] == 4);
  CHECK(counts[scene::LaneCategory::kGoStraight] == 4);
  CHECK(counts[scene::LaneCategory::kLane] == 4);       // outgoing arms
  CHECK(counts[scene::LaneCategory::kNoUTurn] == 4);    // incoming arms
  CHECK(scene::validate(g).empty());
}

TEST_CASE("t_junction produces the no-turn categories") {
  auto g = gen::generate_scene(base_spec(ScenarioKind::kTJunction, 9));
  auto counts = category_counts(g);
  // 3 incoming + 3 outgoing + 6 connectors
  REQUIRE(g.lanes.size() == 12);
  CHECK(counts[scene::LaneCategory::kNoLeftTurn] == 1);
  CHECK(counts[scene::LaneCategory::kNoRightTurn] == 1);
  CHECK(counts[scene::LaneCategory::kNoUTurn] == 1);
  CHECK(scene::validate(g).empty());
}

TEST_CASE("declared connectivity matches gt_connectivity for every kind") {
  for (auto kind : {ScenarioKind::kStraight, ScenarioKind::kTJunction, ScenarioKind::kCrossroad,
                    ScenarioKind::kMultiway}) {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 44ULL}) {
      ScenarioSpec spec = base_spec(kind, seed);
      spec.multiway_arms = 5;
      auto g = gen::generate_scene(spec);
      CHECK(scene::validate(g).empty());
      CHECK(scene::gt_connectivity(g.lanes, 0.5) == g.edges);
    }
  }
}

TEST_CASE("lanes_per_arm scales the layout without breaking connectivity") {
  ScenarioSpec spec = base_spec(ScenarioKind::kCrossroad, 5);
  spec.lanes_per_arm = 2;
  auto g = gen::generate_scene(spec);
  REQUIRE(g.lanes.size() == 40);
  CHECK(scene::gt_connectivity(g.lanes, 0.5) == g.edges);
}

TEST_CASE("same seed twice is byte-identical") {
  ScenarioSpec spec = base_spec(ScenarioKind::kMultiway, 123);
  spec.noise_sigma = 0.2;
  spec.distractor_count = 3;
  auto s1 = gen::perturb_detections(gen::generate_scene(spec), spec, 7);
  auto s2 = gen::perturb_detections(gen::generate_scene(spec), spec, 7);
  CHECK(gen::sample_to_json(s1).dump() == gen::sample_to_json(s2).dump());
}

TEST_CASE("different seeds give distinct geometry") {
  ScenarioSpec a = base_spec(ScenarioKind::kStraight, 1);
  ScenarioSpec b = base_spec(ScenarioKind::kStraight, 2);
  CHECK(gen::sample_to_json(gen::perturb_detections(gen::generate_scene(a), a)).dump() !=
        gen::sample_to_json(gen::perturb_detections(gen::generate_scene(b), b)).dump());
}

TEST_CASE("zero noise and zero distractors reproduce GT exactly") {
  ScenarioSpec spec = base_spec(ScenarioKind::kTJunction, 11);
  auto g = gen::generate_scene(spec);
  auto s = gen::perturb_detections(g, spec, 0);
  REQUIRE(s.pred_centerlines.size() == g.lanes.size());
  for (std::size_t i = 0; i < g.lanes.size(); ++i) {
    CHECK(s.assignment[i] == static_cast<int>(i));
    for (std::size_t k = 0; k < g.lanes[i].centerline.size(); ++k)
      CHECK(s.pred_centerlines[i].points[k] == g.lanes[i].centerline.points[k]);
  }
}

TEST_CASE("gaussian noise matches the half-normal mean displacement") {
  ScenarioSpec spec = base_spec(ScenarioKind::kCrossroad, 31);
  spec.noise_sigma = 0.2;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    spec.seed = seed;
    auto g = gen::generate_scene(spec);
    auto s = gen::perturb_detections(g, spec, 0);
    for (std::size_t i = 0; i < g.lanes.size(); ++i)
      for (std::size_t k = 0; k < g.lanes[i].centerline.size(); ++k) {
        const auto d = s.pred_centerlines[i].points[k] - g.lanes[i].centerline.points[k];
        sum += std::abs(d.x) + std::abs(d.y) + std::abs(d.z);
        count += 3;
      }
  }
  REQUIRE(count > 10000);
  const double expected = 0.2 * std::sqrt(2.0 / 3.14159265358979323846);
  CHECK(sum / static_cast<double>(count) == Catch::Approx(expected).epsilon(0.05));
}

TEST_CASE("distractors become background queries") {
  ScenarioSpec spec = base_spec(ScenarioKind::kStraight, 8);
  spec.distractor_count = 5;
  auto g = gen::generate_scene(spec);
  auto s = gen::perturb_detections(g, spec, 0);
  CHECK(s.num_queries() == g.lanes.size() + 5);
  int background = 0;
  for (int a : s.assignment)
    if (a < 0) ++background;
  CHECK(background == 5);
  CHECK(s.queries.rows() == s.num_queries());
  CHECK(s.queries.cols() == spec.feature_dim);
}

TEST_CASE("dataset round trip is lossless") {
  ScenarioSpec spec = base_spec(ScenarioKind::kMultiway, 77);
  spec.noise_sigma = 0.17;
  spec.distractor_count = 2;
  std::vector<gen::DetectionSample> samples;
  for (int i = 0; i < 3; ++i) {
    spec.seed = 100 + i;
    samples.push_back(gen::perturb_detections(gen::generate_scene(spec), spec, i));
  }
  const char* path = tmp_path("roundtrip.jsonl");
  gen::write_dataset(samples, path, {{"note", "test"}});
  nlohmann::json echo;
  auto loaded = gen::read_dataset(path, &echo);
  CHECK(echo.at("note") == "test");
  REQUIRE(loaded.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(gen::sample_to_json(loaded[i]).dump() == gen::sample_to_json(samples[i]).dump());
    CHECK(num::max_abs_diff(loaded[i].queries, samples[i].queries) == 0.0);
  }
  std::remove(path);
}

TEST_CASE("truncated line reports its line number") {
  ScenarioSpec spec = base_spec(ScenarioKind::kStraight, 1);
  auto s = gen::perturb_detections(gen::generate_scene(spec), spec, 0);
  const char* path = tmp_path("truncated.jsonl");
  {
    std::ofstream out(path);
    out << nlohmann::json{{"format_version", 1}, {"config", nlohmann::json::object()}}.dump()
        << "\n";
    out << gen::sample_to_json(s).dump() << "\n";
    std::string full = gen::sample_to_json(s).dump();
    out << full.substr(0, full.size() / 2) << "\n";
  }
  try {
    gen::read_dataset(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::remove(path);
}

TEST_CASE("version mismatch is an explicit error") {
  const char* path = tmp_path("version.jsonl");
  {
    std::ofstream out(path);
    out << nlohmann::json{{"format_version", 99}}.dump() << "\n";
  }
  try {
    gen::read_dataset(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("format_version") != std::string::npos);
  }
  std::remove(path);
}

TEST_CASE("ramp option exercises the z coordinate consistently") {
  ScenarioSpec spec = base_spec(ScenarioKind::kCrossroad, 4);
  spec.ramp_slope = 0.05;
  auto g = gen::generate_scene(spec);
  bool any_nonzero_z = false;
  for (const auto& lane : g.lanes)
    for (const auto& p : lane.centerline.points) {
      CHECK(p.z == Catch::Approx(0.05 * p.x).margin(1e-12));
      if (p.z != 0.0) any_nonzero_z = true;
    }
  CHECK(any_nonzero_z);
  CHECK(scene::gt_connectivity(g.lanes, 0.5) == g.edges);
}
