#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "modeljoin/errors.hpp"
#include "modeljoin/sampler.hpp"

using namespace modeljoin;

namespace {

struct Pipeline {
  mjt::TestDb db;
  SkeletonBuild build;
  InferenceResult result;
};

Pipeline demo_pipeline(bool select_nonjas = false) {
  Pipeline p{mjt::demo_db(select_nonjas), {}, {}};
  p.build = build_skeleton(p.db.resolve());
  p.result = run_inference(p.build.graph);
  return p;
}

double share_of(const std::vector<Token>& column, const Token& value) {
  std::size_t hits = 0;
  for (const auto& v : column) hits += v == value ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(column.size());
}

}  // namespace

TEST_CASE("root sampling follows the join frequencies") {
  SUBCASE("singleton support forces every draw") {
    Pipeline p = demo_pipeline();
    std::vector<Token> col = sample_root(p.result.root(), 200, 42);
    for (const auto& v : col) CHECK(v == "b3");
  }
  SUBCASE("empty root with positive n is an empty-join error") {
    try {
      sample_root(FreqMap{}, 5, 1);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::EmptyJoin);
    }
  }
  SUBCASE("n of zero is an empty column") {
    CHECK(sample_root(FreqMap{{"x", 1.0}}, 0, 1).empty());
  }
  SUBCASE("binomial concentration at 3:1 odds") {
    const FreqMap root{{"x", 1.0}, {"y", 3.0}};
    std::vector<Token> col = sample_root(root, 40000, 7);
    CHECK(share_of(col, "y") == doctest::Approx(0.75).epsilon(0.014));
  }
}

TEST_CASE("conditional steps match the hand-derived chain") {
  Pipeline p = demo_pipeline();
  DiscreteDistribution d_given_b3 = conditional_step(p.build.graph, 1, "b3", p.result);
  REQUIRE(d_given_b3.values == std::vector<Token>{"d2"});
  CHECK(d_given_b3.probs[0] == doctest::Approx(1.0).epsilon(1e-12));

  DiscreteDistribution e_given_d2 = conditional_step(p.build.graph, 2, "d2", p.result);
  REQUIRE(e_given_d2.values == std::vector<Token>{"e1", "e2"});
  CHECK(e_given_d2.probs[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(e_given_d2.probs[1] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(e_given_d2.prob_of("e3") == 0.0);
}

TEST_CASE("skeleton generation on the demo query") {
  Pipeline p = demo_pipeline();
  SamplerOptions opt;
  opt.seed = 11;
  SampleMatrix mat = generate_skeleton(p.build.graph, p.result, 8000, opt);

  CHECK(mat.columns == std::vector<std::string>{"d1.B", "d2.D", "d3.E"});
  REQUIRE(mat.row_count() == 8000);
  std::vector<Token> e_col;
  for (const auto& row : mat.rows) {
    CHECK(row[0] == "b3");
    CHECK(row[1] == "d2");
    e_col.push_back(row[2]);
  }
  CHECK(share_of(e_col, "e2") == doctest::Approx(0.75).epsilon(0.027));

  SUBCASE("n = 1 emits a tuple of the exact join") {
    SampleMatrix one = generate_skeleton(p.build.graph, p.result, 1, opt);
    const auto truth = p.db.oracle().skeleton_counts();
    CHECK(truth.count(one.rows[0]) == 1);
  }
  SUBCASE("n = 0 is a header-only matrix") {
    CHECK(generate_skeleton(p.build.graph, p.result, 0, opt).rows.empty());
  }
}

TEST_CASE("single-node skeletons sample the shared attribute directly") {
  // d3 |x| d4 on E: one node, two anchors, no conditional steps.
  mjt::TestDb db = mjt::demo_db();
  db.query.tables = {"d3", "d4"};
  db.query.join_conditions = {{{"d3", "E"}, {"d4", "E"}}};
  db.query.selected_attrs = {{"d3", "D"}, {"d4", "F"}};
  db.query.sources = {{"d3", SourceRef{SourceRef::Kind::Model, "d3"}},
                      {"d4", SourceRef{SourceRef::Kind::Model, "d4"}}};
  SkeletonBuild build = build_skeleton(db.resolve());
  InferenceResult result = run_inference(build.graph);
  REQUIRE(result.join_size == 4.0);

  SamplerOptions opt;
  opt.seed = 23;
  SampleMatrix mat = generate_join_sample(build, result, 6000, opt);
  CHECK(mat.columns == std::vector<std::string>{"d3.E", "d3.D", "d4.F"});

  std::vector<Token> e_col;
  for (const auto& row : mat.rows) {
    e_col.push_back(row[0]);
    if (row[0] == "e2") CHECK(row[1] == "d2");  // only (d2, e2) exists in d3
    if (row[0] == "e1") CHECK(row[2] == "f1");  // only (e1, f1) exists in d4
  }
  CHECK(share_of(e_col, "e2") == doctest::Approx(0.75).epsilon(0.03));

  // Analytic probabilities match the oracle on the single-node chain too.
  const OracleJoin oracle = db.oracle();
  for (const auto& [tuple, count] : oracle.skeleton_counts()) {
    const double p = analytic_tuple_probability(build.graph, result, tuple);
    CHECK(p == doctest::Approx(static_cast<double>(count) / 4.0).epsilon(1e-12));
  }
}

TEST_CASE("rows are independent streams: prefixes coincide") {
  Pipeline p = demo_pipeline();
  mjt::TestDb db = mjt::random_chain_db_nonempty(5, 4, 10, 80, 20);
  SkeletonBuild build = build_skeleton(db.resolve());
  InferenceResult result = run_inference(build.graph);
  SamplerOptions opt;
  opt.seed = 99;
  SampleMatrix small = generate_skeleton(build.graph, result, 100, opt);
  SampleMatrix large = generate_skeleton(build.graph, result, 500, opt);
  for (std::size_t r = 0; r < 100; ++r) CHECK(small.rows[r] == large.rows[r]);
}

TEST_CASE("worker count never changes the sample") {
  mjt::TestDb db = mjt::random_chain_db_nonempty(6, 4, 12, 90, 20);
  SkeletonBuild build = build_skeleton(db.resolve());
  InferenceResult result = run_inference(build.graph);
  SamplerOptions one;
  one.seed = 123;
  one.workers = 1;
  SamplerOptions four = one;
  four.workers = 4;
  SampleMatrix a = generate_skeleton(build.graph, result, 6000, one);
  SampleMatrix b = generate_skeleton(build.graph, result, 6000, four);
  CHECK(a.rows == b.rows);
}

TEST_CASE("analytic tuple probability equals oracle share") {
  for (std::uint64_t seed = 20; seed < 26; ++seed) {
    mjt::TestDb db = mjt::random_chain_db_nonempty(seed, 3 + static_cast<int>(seed % 3), 14, 90);
    SkeletonBuild build = build_skeleton(db.resolve());
    InferenceResult result = run_inference(build.graph);
    const OracleJoin oracle = db.oracle();
    const auto truth = oracle.skeleton_counts();

    double total_mass = 0.0;
    for (const auto& [tuple, count] : truth) {
      const double p = analytic_tuple_probability(build.graph, result, tuple);
      const double expected = static_cast<double>(count) / static_cast<double>(oracle.total);
      CHECK(std::abs(p - expected) <= 1e-9);
      total_mass += p;
    }
    CHECK(total_mass == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("non-JA attachment conditions on the same-table JAs") {
  Pipeline p = demo_pipeline(true);
  SamplerOptions opt;
  opt.seed = 17;
  SampleMatrix mat = generate_join_sample(p.build, p.result, 3000, opt);
  CHECK(mat.columns == std::vector<std::string>{"d1.B", "d2.D", "d3.E", "d1.A", "d2.C", "d4.F"});

  std::vector<Token> a_col, f_given_e2;
  for (const auto& row : mat.rows) {
    CHECK(row[4] == "c2");  // only d2 row with (b3, d2) carries c2
    a_col.push_back(row[3]);
    if (row[2] == "e1") CHECK(row[5] == "f1");
    if (row[2] == "e2") f_given_e2.push_back(row[5]);
  }
  CHECK(share_of(a_col, "a2") == doctest::Approx(0.5).epsilon(0.06));
  CHECK(share_of(f_given_e2, "f2") == doctest::Approx(1.0 / 3).epsilon(0.09));

  SUBCASE("no attachments leaves the matrix unchanged") {
    Pipeline bare = demo_pipeline(false);
    SampleMatrix skel = generate_skeleton(bare.build.graph, bare.result, 50, opt);
    SampleMatrix full = generate_join_sample(bare.build, bare.result, 50, opt);
    CHECK(skel.rows == full.rows);
    CHECK(skel.columns == full.columns);
  }
}

TEST_CASE("empty join refuses to sample") {
  Pipeline p = demo_pipeline();
  InferenceResult empty = p.result;
  empty.join_size = 0.0;
  empty.levels[0].freqs.clear();
  try {
    generate_join_sample(p.build, empty, 10, SamplerOptions{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyJoin);
  }
}

TEST_CASE("rejection filters candidates by eliminated-edge pair frequency") {
  SUBCASE("no eliminated edges is the identity") {
    Pipeline p = demo_pipeline();
    SamplerOptions opt;
    opt.seed = 3;
    SampleMatrix mat = generate_skeleton(p.build.graph, p.result, 64, opt);
    SampleMatrix same = reject_cyclic(mat, {}, 64, opt.seed);
    CHECK(same.rows == mat.rows);
  }

  SUBCASE("triangle query accepts only tuples of the cyclic join") {
    mjt::TestDb db = mjt::triangle_db_nonempty(31, 6, 60, 30);
    SkeletonBuild build = build_skeleton(db.resolve());
    REQUIRE(build.eliminated.size() == 1);
    InferenceResult result = run_inference(build.graph);

    SamplerOptions opt;
    opt.seed = 8;
    SampleMatrix mat = generate_join_sample(build, result, 3000, opt);
    REQUIRE(mat.row_count() == 3000);

    const auto truth = db.oracle().skeleton_counts();
    std::set<TupleKey> support;
    for (const auto& [t, c] : truth) support.insert(t);
    for (const auto& row : mat.rows) CHECK(support.count(row) == 1);

    // Distribution check against a same-size oracle sample.
    SampleMatrix reference = oracle_uniform_sample(db.oracle(), 3000, 1234);
    KSReport report = ks_two_sample(mat.rows, reference.rows, 0.01);
    CHECK(report.uniform_retained);
  }

  SUBCASE("zero pair frequency rejects the candidate") {
    mjt::TestDb db = mjt::triangle_db_nonempty(31, 6, 60, 30);
    SkeletonBuild build = build_skeleton(db.resolve());
    InferenceResult result = run_inference(build.graph);
    SamplerOptions opt;
    opt.seed = 8;
    SampleMatrix mat = generate_skeleton(build.graph, result, 200, opt);

    // Rewrite one endpoint so the eliminated pair can never be satisfied.
    const int node = build.eliminated[0].first_node;
    for (auto& row : mat.rows) row[static_cast<std::size_t>(node)] = "absent";
    SampleMatrix none = reject_cyclic(mat, build.eliminated, 200, opt.seed);
    CHECK(none.rows.empty());
  }

  SUBCASE("an impossible cycle exhausts the budget") {
    // The eliminated table's pairs never match the residual chain's output.
    mjt::TestDb db;
    mjt::add_table(db, mjt::make_meta("t1", {"X", "Y"},
                                      {{"X", JaPosition::First}, {"Y", JaPosition::Second}}),
                   {{"x0", "y0"}, {"x1", "y1"}}, {"X", "Y"});
    mjt::add_table(db, mjt::make_meta("t2", {"Y", "Z"},
                                      {{"Y", JaPosition::First}, {"Z", JaPosition::Second}}),
                   {{"y0", "z0"}, {"y1", "z1"}}, {"Y", "Z"});
    mjt::add_table(db, mjt::make_meta("t3", {"Z", "X"},
                                      {{"Z", JaPosition::First}, {"X", JaPosition::Second}}),
                   {{"z0", "x1"}, {"z1", "x0"}}, {"Z", "X"});
    db.query.join_conditions = {{{"t1", "X"}, {"t3", "X"}},
                                {{"t1", "Y"}, {"t2", "Y"}},
                                {{"t2", "Z"}, {"t3", "Z"}}};
    SkeletonBuild build = build_skeleton(db.resolve());
    REQUIRE(build.eliminated.size() == 1);
    InferenceResult result = run_inference(build.graph);
    SamplerOptions opt;
    opt.seed = 5;
    opt.reject_budget = 4000;
    try {
      generate_join_sample(build, result, 10, opt);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::BudgetExceeded);
      CHECK(std::string(e.what()).find("rate") != std::string::npos);
    }
  }
}

TEST_CASE("empirical uniformity against the oracle, a few seeds") {
  mjt::TestDb db = mjt::random_chain_db_nonempty(42, 4, 14, 100, 100);
  SkeletonBuild build = build_skeleton(db.resolve());
  InferenceResult result = run_inference(build.graph);
  const OracleJoin oracle = db.oracle();

  int retained = 0;
  for (std::uint64_t trial = 0; trial < 3; ++trial) {
    SamplerOptions opt;
    opt.seed = 1000 + trial;
    SampleMatrix mine = generate_skeleton(build.graph, result, 20000, opt);
    SampleMatrix ref = oracle_uniform_sample(oracle, 20000, 5000 + trial);
    retained += ks_two_sample(mine.rows, ref.rows, 0.01).uniform_retained ? 1 : 0;
  }
  CHECK(retained == 3);
}
