#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "modeljoin/errors.hpp"
#include "modeljoin/evaluation.hpp"
#include "modeljoin/learned_model.hpp"
#include "modeljoin/model_io.hpp"
#include "modeljoin/synth.hpp"

using namespace modeljoin;

namespace {

TableData small_table(std::uint64_t seed, int rows, int ndv1, int ndv2, int ndp) {
  SynthSpec spec;
  spec.rows = rows;
  spec.ndv_first = ndv1;
  spec.ndv_second = ndv2;
  spec.distinct_pairs = ndp;
  spec.seed = seed;
  return gen_table(spec);
}

TableMeta two_ja_meta(const std::string& id = "t0") {
  return mjt::make_meta(id, {"att0", "att1"},
                        {{"att0", JaPosition::First}, {"att1", JaPosition::Second}});
}

LearnedConfig quick_config(int clusters, std::uint64_t seed = 1) {
  LearnedConfig cfg;
  cfg.clusters = clusters;
  cfg.seed = seed;
  cfg.embedding.dim = 8;
  cfg.embedding.epochs = 2;
  cfg.network.hidden = 12;
  cfg.network.epochs = 2;
  cfg.network.lr = 0.01;
  return cfg;
}

}  // namespace

TEST_CASE("mixture of cluster heads weighted by stored shares") {
  // Two hand-made uniform heads over two values each, blended 50/50.
  EmbeddingTable emb;
  emb.dim = 2;
  emb.input = Eigen::MatrixXd::Zero(1, 2);
  emb.output = Eigen::MatrixXd::Zero(1, 2);
  emb.tokens = {EmbeddingTable::tag(0, "x")};
  emb.index = {{emb.tokens[0], 0}};

  ClusterMap clusters;
  clusters.cluster_count = 2;
  clusters.members = {{"y0", "y1"}, {"y2", "y3"}};
  clusters.final_assignment = {{"y0", 0}, {"y1", 0}, {"y2", 1}, {"y3", 1}};
  clusters.weights = {{"x", {{0, 0.5}, {1, 0.5}}}};

  std::vector<CDGNetwork> nets(2);
  nets[0].uniform_head = true;
  nets[0].output_values = {"y0", "y1"};
  nets[1].uniform_head = true;
  nets[1].output_values = {"y2", "y3"};

  TableMeta meta = two_ja_meta();
  meta.row_count = 4;
  auto model = assemble_learned_model(meta, quick_config(2), emb, clusters, nets,
                                      {{"x", 4.0}}, {{"y0", 1.0}, {"y1", 1.0}, {"y2", 1.0},
                                                     {"y3", 1.0}},
                                      {}, {}, false, 4);
  ProbMap cond = model->cond_second_given_first("x");
  REQUIRE(cond.size() == 4);
  for (const auto& [v, p] : cond) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("one cluster: the conditional is that network's softmax") {
  TableData data = small_table(3, 120, 8, 8, 16);
  auto model = train_learned_model(data, two_ja_meta(), quick_config(1));
  CHECK(!model->exact_heads());
  REQUIRE(model->networks().size() == 1);
  const CDGNetwork& net = model->networks()[0];
  const Eigen::VectorXd probs = net.forward(model->embeddings().vec(0, "v0"));
  ProbMap cond = model->cond_second_given_first("v0");
  for (std::size_t i = 0; i < net.output_values.size(); ++i) {
    const auto it = cond.find(net.output_values[i]);
    const double expected = probs(static_cast<Eigen::Index>(i));
    if (it == cond.end()) {
      CHECK(expected == 0.0);
    } else {
      CHECK(it->second == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("assembled conditionals normalize for every conditioning value") {
  TableData data = small_table(5, 400, 20, 20, 60);
  auto model = train_learned_model(data, two_ja_meta(), quick_config(4));
  for (const auto& [dv, f] : model->first_ja_freqs()) {
    ProbMap cond = model->cond_second_given_first(dv);
    double mass = 0.0;
    for (const auto& [sv, p] : cond) mass += p;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("cluster count at the distinct-pair count gives exact heads") {
  TableData data = small_table(7, 200, 10, 10, 30);
  TableMeta meta = two_ja_meta();
  auto exact = build_exact(data, meta);
  auto model = train_learned_model(data, meta, quick_config(30));
  CHECK(model->exact_heads());
  CHECK(model->networks().empty());

  for (const auto& [dv, f0] : exact->first_ja_freqs()) {
    const ProbMap a = model->cond_second_given_first(dv);
    const ProbMap b = exact->cond_second_given_first(dv);
    REQUIRE(a.size() == b.size());
    for (const auto& [sv, p] : b) CHECK(a.at(sv) == doctest::Approx(p).epsilon(1e-12));
  }

  GenerativeConfusion c = generative_fscore(*model, *exact, 200, 0.95, 3);
  CHECK(c.mean_sampled == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.median == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("training is reproducible down to the serialized bytes") {
  TableData data = small_table(9, 150, 8, 8, 20);
  auto a = train_learned_model(data, two_ja_meta(), quick_config(3, 42));
  auto b = train_learned_model(data, two_ja_meta(), quick_config(3, 42));
  CHECK(model_to_json_text(*a) == model_to_json_text(*b));

  auto c = train_learned_model(data, two_ja_meta(), quick_config(3, 43));
  CHECK(model_to_json_text(*a) != model_to_json_text(*c));
}

TEST_CASE("learned models round-trip through the container") {
  TableData data = small_table(11, 100, 6, 6, 12);
  auto model = train_learned_model(data, two_ja_meta(), quick_config(2));
  const std::string text = model_to_json_text(*model);
  auto reloaded = model_from_json_text(text);
  CHECK(model_to_json_text(*reloaded) == text);
  for (const auto& [dv, f] : model->first_ja_freqs()) {
    CHECK(reloaded->cond_second_given_first(dv) == model->cond_second_given_first(dv));
  }
  CHECK(reloaded->distinct_pair_count() == model->distinct_pair_count());
}

TEST_CASE("unseen conditioning values: hard error or marginal fallback") {
  TableData data = small_table(13, 100, 6, 6, 12);
  auto strict = train_learned_model(data, two_ja_meta(), quick_config(2));
  try {
    strict->cond_second_given_first("never-seen");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Capability);
  }

  LearnedConfig cfg = quick_config(2);
  cfg.fallback_marginal = true;
  auto soft = train_learned_model(data, two_ja_meta(), cfg);
  ProbMap marginal = soft->cond_second_given_first("never-seen");
  double mass = 0.0;
  for (const auto& [sv, p] : marginal) mass += p;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(marginal.size() == soft->second_ja_freqs().size());
}

TEST_CASE("single-JA tables cannot take the learned backend") {
  TableData data;
  data.header = {"a", "b"};
  data.rows = {{"a0", "b0"}};
  try {
    train_learned_model(data, mjt::make_meta("t", {"a", "b"}, {{"a", JaPosition::First}}),
                        quick_config(1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parameter);
  }
}

TEST_CASE("learned model drives the full join pipeline") {
  // Replace one middle model of the demo query with a learned one and check
  // the pipeline still runs and normalizes.
  mjt::TestDb db = mjt::demo_db();
  TableMeta d3_meta = db.catalog.tables.at("d3");
  auto learned = train_learned_model(db.data.at("d3"), d3_meta, quick_config(1, 5));
  db.registry.bind("d3", learned, "learned");

  SkeletonBuild build = build_skeleton(db.resolve());
  CHECK(!build.graph.all_exact);
  InferenceResult result = run_inference(build.graph);
  CHECK(result.join_size > 0.0);
  CHECK(!result.exact);

  SamplerOptions opt;
  opt.seed = 1;
  SampleMatrix mat = generate_join_sample(build, result, 500, opt);
  CHECK(mat.row_count() == 500);
}
