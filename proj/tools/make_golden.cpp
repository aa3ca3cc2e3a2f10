// Regenerates tests/data/golden_forward.json after intentional numeric
// changes. Usage: make_golden <output-path>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "t2sg/gen/detections.hpp"
#include "t2sg/gen/scenario.hpp"
#include "t2sg/model/checkpoint.hpp"
#include "t2sg/model/topoformer.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_golden <output.json>\n";
    return 1;
  }
  using namespace t2sg;
  const std::uint64_t sample_seed = 5, model_seed = 1;

  gen::ScenarioSpec spec;
  spec.kind = gen::ScenarioKind::kTJunction;
  spec.seed = sample_seed;
  spec.noise_sigma = 0.1;
  spec.distractor_count = 2;
  auto sample = gen::perturb_detections(gen::generate_scene(spec), spec, 0);

  model::ModelConfig c;
  c.d = 16;
  c.n_blocks = 2;
  c.d_in = 40;
  c.init_seed = model_seed;
  model::Model m = model::make_model(c);

  num::Tape t;
  auto out = model::model_forward(t, m, sample, 0, true);

  nlohmann::json j;
  j["sample_seed"] = sample_seed;
  j["model_seed"] = model_seed;
  j["e_a"] = model::matrix_to_json(out.e_a);
  j["e_cf"] = model::matrix_to_json(out.e_cf);
  j["cls"] = model::matrix_to_json(out.cls_logits);
  j["reg"] = model::matrix_to_json(out.reg_points);
  std::ofstream f(argv[1]);
  f << j.dump() << "\n";
  std::cout << "wrote " << argv[1] << "\n";
  return 0;
}
