#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "oracles.hpp"
#include "t2sg/gen/detections.hpp"
#include "t2sg/gen/scenario.hpp"
#include "t2sg/model/checkpoint.hpp"
#include "t2sg/model/topoformer.hpp"

using namespace t2sg;
using model::AttnLayer;
using model::CilMode;
using model::ModelConfig;
using model::SpmMode;
using num::Matrix;
using num::Rng;
using num::Tape;
using num::Value;

namespace {

AttnLayer random_layer(Rng& rng, std::size_t d, std::size_t ffn) {
  ModelConfig c;
  c.d = d;
  c.ffn_width = ffn;
  return model::detail::make_attn_layer(rng, c, "t");
}

ModelConfig small_config(std::uint64_t seed = 1) {
  ModelConfig c;
  c.d = 16;
  c.n_blocks = 1;
  c.d_in = 40;
  c.init_seed = seed;
  return c;
}

gen::DetectionSample small_sample(std::uint64_t seed = 5) {
  gen::ScenarioSpec spec;
  spec.kind = gen::ScenarioKind::kTJunction;
  spec.seed = seed;
  spec.noise_sigma = 0.1;
  spec.distractor_count = 2;
  return gen::perturb_detections(gen::generate_scene(spec), spec, 0);
}

bool row_stochastic(const Matrix& a, double tol = 1e-12) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (a(i, j) < 0.0) return false;
      sum += a(i, j);
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("gsa mode=off equals mode=add with zero SPM, bit for bit") {
  Rng rng(31);
  AttnLayer layer = random_layer(rng, 8, 16);
  const Matrix x = rng.gaussian_matrix(5, 8);
  const Matrix zero(5, 5);
  Tape t;
  auto off = model::gsa_forward(t, layer, t.constant(x), zero, SpmMode::kOff);
  auto add = model::gsa_forward(t, layer, t.constant(x), zero, SpmMode::kAdd);
  CHECK(num::max_abs_diff(t.value(off.out), t.value(add.out)) == 0.0);
  CHECK(num::max_abs_diff(t.value(off.attn), t.value(add.attn)) == 0.0);
}

TEST_CASE("gsa agrees with the scalar attention oracle") {
  Rng rng(32);
  for (int it = 0; it < 25; ++it) {
    const std::size_t n = 3, d = 6;
    AttnLayer layer = random_layer(rng, d, 2 * d);
    const Matrix x = rng.gaussian_matrix(n, d);
    const Matrix a_spm = rng.gaussian_matrix(n, n, 0.0, 0.5);
    Tape t;
    auto got = model::gsa_forward(t, layer, t.constant(x), a_spm, SpmMode::kAdd);
    const Matrix want =
        oracles::attention_oracle(x, layer.wq.value, layer.wk.value, layer.wv.value, &a_spm);
    CHECK(num::max_abs_diff(t.value(got.out), want) < 1e-10);
  }
}

TEST_CASE("gsa with a single query is a fixed point of softmax") {
  Rng rng(33);
  AttnLayer layer = random_layer(rng, 4, 8);
  const Matrix x = rng.gaussian_matrix(1, 4);
  Tape t;
  auto got = model::gsa_forward(t, layer, t.constant(x), Matrix(1, 1), SpmMode::kAdd);
  CHECK(t.value(got.attn)(0, 0) == 1.0);
  CHECK(num::max_abs_diff(t.value(got.out), num::matmul(x, layer.wv.value)) < 1e-14);
}

TEST_CASE("lal residual survives a zeroed FFN output layer") {
  Rng rng(34);
  AttnLayer layer = random_layer(rng, 6, 12);
  // zero final FFN layer: encoder output reduces to norm(x)
  layer.ffn2.w.value = Matrix(12, 6);
  layer.ffn2.b.value = Matrix(1, 6);
  const Matrix x = rng.gaussian_matrix(4, 6);
  Tape t;
  Value out = model::lal_forward(t, layer, t.constant(x), Matrix(4, 4), SpmMode::kAdd,
                                 model::NormScheme::kPostCombined);
  Value norm_only =
      t.layer_norm(t.constant(x), t.leaf(layer.norm_gain), t.leaf(layer.norm_bias));
  CHECK(num::max_abs_diff(t.value(out), t.value(norm_only)) == 0.0);
  CHECK(t.value(out).rows() == 4);
  CHECK(t.value(out).cols() == 6);
}

TEST_CASE("csa zero policy ignores the Q/K path entirely") {
  Rng rng(35);
  AttnLayer layer = random_layer(rng, 8, 16);
  const Matrix x = rng.gaussian_matrix(5, 8);
  const Matrix a_spm = rng.gaussian_matrix(5, 5);
  Rng policy_rng(1);

  Tape t1;
  auto before = model::csa_forward(t1, layer, t1.constant(x), a_spm, SpmMode::kAdd,
                                   CilMode::kZero, policy_rng);
  const Matrix attn_before = t1.value(before.attn);
  // attention must be exactly row_softmax(A_SPM)
  CHECK(num::max_abs_diff(attn_before, num::row_softmax_value(a_spm)) == 0.0);

  // perturb W_Q and W_K: counterfactual attention must not move
  for (std::size_t i = 0; i < layer.wq.value.size(); ++i) layer.wq.value.data()[i] += 0.37;
  for (std::size_t i = 0; i < layer.wk.value.size(); ++i) layer.wk.value.data()[i] -= 0.21;
  Tape t2;
  Rng policy_rng2(1);
  auto after = model::csa_forward(t2, layer, t2.constant(x), a_spm, SpmMode::kAdd, CilMode::kZero,
                                  policy_rng2);
  CHECK(num::max_abs_diff(attn_before, t2.value(after.attn)) < 1e-12);
}

TEST_CASE("csa zero policy with zero SPM averages the value rows uniformly") {
  Rng rng(36);
  AttnLayer layer = random_layer(rng, 6, 12);
  const Matrix x = rng.gaussian_matrix(4, 6);
  Rng policy_rng(1);
  Tape t;
  auto got =
      model::csa_forward(t, layer, t.constant(x), Matrix(4, 4), SpmMode::kAdd, CilMode::kZero,
                         policy_rng);
  const Matrix xv = num::matmul(x, layer.wv.value);
  for (std::size_t j = 0; j < xv.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < xv.rows(); ++i) mean += xv(i, j);
    mean /= static_cast<double>(xv.rows());
    for (std::size_t i = 0; i < xv.rows(); ++i)
      CHECK(t.value(got.out)(i, j) == Catch::Approx(mean).margin(1e-12));
  }
}

TEST_CASE("csa mean policy equals zero policy when logits are constant") {
  Rng rng(37);
  AttnLayer layer = random_layer(rng, 6, 12);
  layer.wq.value = Matrix(6, 6);  // constant (zero) logits
  const Matrix x = rng.gaussian_matrix(4, 6);
  const Matrix a_spm = rng.gaussian_matrix(4, 4);
  Rng r1(1), r2(1);
  Tape t;
  auto mean_out =
      model::csa_forward(t, layer, t.constant(x), a_spm, SpmMode::kAdd, CilMode::kMean, r1);
  auto zero_out =
      model::csa_forward(t, layer, t.constant(x), a_spm, SpmMode::kAdd, CilMode::kZero, r2);
  CHECK(num::max_abs_diff(t.value(mean_out.attn), t.value(zero_out.attn)) < 1e-12);
}

TEST_CASE("edge head ranges, zero final layer, permutation equivariance") {
  Rng rng(38);
  ModelConfig c = small_config();
  model::Model m = model::make_model(c);
  const std::size_t n = 5;
  const Matrix x = rng.gaussian_matrix(n, c.d);

  Tape t;
  auto scores = model::edge_head_forward(t, m.edge_head, t.constant(x));
  const Matrix e = t.value(scores.prob);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(e(i, j) >= 0.0);
      CHECK(e(i, j) < 1.0);
      if (i == j) CHECK(e(i, j) == 0.0);
    }

  model::Model zeroed = model::make_model(c);
  zeroed.edge_head.g3.w.value = Matrix(zeroed.edge_head.g3.w.value.rows(), 1);
  zeroed.edge_head.g3.b.value = Matrix(1, 1);
  Tape t2;
  const Matrix e0 = t2.value(model::edge_head_forward(t2, zeroed.edge_head, t2.constant(x)).prob);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) CHECK(e0(i, j) == (i == j ? 0.0 : 0.5));

  // permuting rows permutes the score matrix on both axes
  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  Matrix xp(n, c.d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c.d; ++j) xp(i, j) = x(perm[i], j);
  Tape t3;
  const Matrix ep = t3.value(model::edge_head_forward(t3, m.edge_head, t3.constant(xp)).prob);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      CHECK(ep(i, j) == Catch::Approx(e(perm[i], perm[j])).margin(1e-12));
}

TEST_CASE("model_forward shapes and cil_mode=off identity") {
  auto sample = small_sample();
  ModelConfig c = small_config();
  c.cil_mode = CilMode::kOff;
  model::Model m = model::make_model(c);
  Tape t;
  auto out = model::model_forward(t, m, sample, 0, true);
  const std::size_t n = sample.num_queries();
  CHECK(out.e_a.rows() == n);
  CHECK(out.e_a.cols() == n);
  CHECK(out.cls_logits.cols() == 10);
  CHECK(out.reg_points.cols() == 33);
  CHECK(num::max_abs_diff(out.e_a, out.e_cf) == 0.0);
}

TEST_CASE("factual and counterfactual branches share weights") {
  auto sample = small_sample();
  ModelConfig c = small_config();
  model::Model m = model::make_model(c);
  Tape t0;
  auto base = model::model_forward(t0, m, sample, 0, true);

  // perturbing any parameter moves both branches
  m.cil[0].wv.value.data()[3] += 0.25;
  Tape t1;
  auto moved = model::model_forward(t1, m, sample, 0, true);
  CHECK(num::max_abs_diff(base.e_a, moved.e_a) > 0.0);
  CHECK(num::max_abs_diff(base.e_cf, moved.e_cf) > 0.0);
}

TEST_CASE("every attention matrix in both branches is row-stochastic") {
  auto sample = small_sample();
  ModelConfig c = small_config();
  c.n_blocks = 2;
  for (auto mode : {CilMode::kZero, CilMode::kMean, CilMode::kRandom}) {
    c.cil_mode = mode;
    model::Model m = model::make_model(c);
    Tape t;
    auto out = model::model_forward(t, m, sample, 3, true);
    REQUIRE(out.attn_factual.size() == 4);
    REQUIRE(out.attn_cf.size() == 4);
    for (const auto& a : out.attn_factual) CHECK(row_stochastic(a));
    for (const auto& a : out.attn_cf) CHECK(row_stochastic(a));
  }
}

TEST_CASE("relabeling queries permutes edge scores consistently") {
  auto sample = small_sample(9);
  ModelConfig c = small_config();
  model::Model m = model::make_model(c);
  Tape t;
  auto base = model::model_forward(t, m, sample, 0, true);

  const std::size_t n = sample.num_queries();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = (i + 3) % n;
  gen::DetectionSample permuted = sample;
  for (std::size_t i = 0; i < n; ++i) {
    permuted.pred_centerlines[i] = sample.pred_centerlines[perm[i]];
    permuted.assignment[i] = sample.assignment[perm[i]];
  }
  permuted.queries = gen::build_queries(permuted);
  Tape t2;
  auto moved = model::model_forward(t2, m, permuted, 0, true);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      CHECK(moved.e_a(i, j) == Catch::Approx(base.e_a(perm[i], perm[j])).margin(1e-9));
}

TEST_CASE("golden forward replay") {
  const std::string golden_path = std::string(T2SG_TEST_DATA_DIR) + "/golden_forward.json";
  std::ifstream probe(golden_path);
  REQUIRE(probe.good());
  nlohmann::json golden;
  probe >> golden;

  auto sample = small_sample(golden.at("sample_seed").get<std::uint64_t>());
  ModelConfig c = small_config(golden.at("model_seed").get<std::uint64_t>());
  c.n_blocks = 2;
  model::Model m = model::make_model(c);
  Tape t;
  auto out = model::model_forward(t, m, sample, 0, true);
  CHECK(num::max_abs_diff(out.e_a, model::matrix_from_json(golden.at("e_a"))) < 1e-12);
  CHECK(num::max_abs_diff(out.e_cf, model::matrix_from_json(golden.at("e_cf"))) < 1e-12);
  CHECK(num::max_abs_diff(out.cls_logits, model::matrix_from_json(golden.at("cls"))) < 1e-12);
  CHECK(num::max_abs_diff(out.reg_points, model::matrix_from_json(golden.at("reg"))) < 1e-12);
}

TEST_CASE("infer threshold semantics and validity") {
  auto sample = small_sample();
  ModelConfig c = small_config();
  c.node_threshold = 0.0;  // keep everything: thresholds on edges are under test
  model::Model m = model::make_model(c);

  // sigmoid scores are < 1, so threshold 1.0 with >= semantics keeps nothing
  auto empty_edges = model::infer(m, sample, 1.0);
  CHECK(empty_edges.edges.empty());

  auto full = model::infer(m, sample, 1e-12);
  const std::size_t n = sample.num_queries();
  CHECK(full.edges.size() == n * (n - 1));  // complete digraph minus diagonal
  CHECK(scene::validate(full).empty());

  CHECK_THROWS_AS(model::infer(m, sample, 0.0), ConfigError);
}

TEST_CASE("checkpoint save/load round trip is exact") {
  ModelConfig c = small_config(77);
  c.n_blocks = 2;
  c.cil_mode = CilMode::kMean;
  model::Model m = model::make_model(c);
  // move weights away from init to make the round trip meaningful
  Rng rng(5);
  for (num::Parameter* p : m.parameters())
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value.data()[i] += rng.gaussian(0, 0.1);

  const char* path = "/tmp/t2sg_test_ckpt.json";
  model::save_checkpoint(m, path, {{"note", 7}});
  auto loaded = model::load_checkpoint(path);
  CHECK(loaded.extra.at("note") == 7);
  CHECK(loaded.model.config.cil_mode == CilMode::kMean);
  auto orig_params = m.parameters();
  auto new_params = loaded.model.parameters();
  REQUIRE(orig_params.size() == new_params.size());
  for (std::size_t i = 0; i < orig_params.size(); ++i) {
    CHECK(orig_params[i]->name == new_params[i]->name);
    CHECK(num::max_abs_diff(orig_params[i]->value, new_params[i]->value) == 0.0);
  }
  std::remove(path);
}

TEST_CASE("model rejects mismatched feature width") {
  auto sample = small_sample();
  ModelConfig c = small_config();
  c.d_in = 13;
  model::Model m = model::make_model(c);
  Tape t;
  CHECK_THROWS_AS(model::model_forward(t, m, sample, 0, true), num::dim_error);
}
