#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "modeljoin/cli.hpp"
#include "modeljoin/model_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using modeljoin::run_cli;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("modeljoin_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  fs::path operator/(const std::string& name) const { return path / name; }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Demo dataset: four chained tables with an 8-tuple join.
void write_demo_dataset(const fs::path& dir) {
  fs::create_directories(dir);
  write_file(dir / "d1.csv", "A,B\na1,b1\na1,b2\na2,b3\na3,b3\n");
  write_file(dir / "d2.csv", "B,C,D\nb1,c1,d1\nb1,c2,d1\nb3,c2,d1\nb3,c2,d2\n");
  write_file(dir / "d3.csv", "D,E\nd2,e1\nd2,e2\nd2,e3\nd1,e3\n");
  write_file(dir / "d4.csv", "E,F\ne1,f1\ne2,f1\ne2,f1\ne2,f2\n");
  write_file(dir / "meta.json", R"({"tables": [
    {"name": "d1", "attributes": ["A","B"],
     "join_attrs": [{"attr":"B","position":"first"}]},
    {"name": "d2", "attributes": ["B","C","D"],
     "join_attrs": [{"attr":"B","position":"first"},{"attr":"D","position":"second"}]},
    {"name": "d3", "attributes": ["D","E"],
     "join_attrs": [{"attr":"D","position":"first"},{"attr":"E","position":"second"}]},
    {"name": "d4", "attributes": ["E","F"],
     "join_attrs": [{"attr":"E","position":"first"}]}
  ]})");
}

const char* kDemoQuery = R"({
  "tables": [
    {"name": "d1", "model": "d1.model.json"},
    {"name": "d2", "model": "d2.model.json"},
    {"name": "d3", "model": "d3.model.json"},
    {"name": "d4", "model": "d4.model.json"}
  ],
  "joins": [
    {"left": "d1.B", "right": "d2.B"},
    {"left": "d2.D", "right": "d3.D"},
    {"left": "d3.E", "right": "d4.E"}
  ]
})";

// Runs ingest + learn for all four demo tables; returns the dataset dir.
fs::path prepare_demo(const TempDir& tmp) {
  const fs::path raw = tmp / "raw";
  const fs::path ds = tmp / "ds";
  write_demo_dataset(raw);
  REQUIRE(run_cli({"ingest", "--meta", (raw / "meta.json").string(), "--data", raw.string(),
                   "--out", ds.string()}) == 0);
  for (const std::string t : {"d1", "d2", "d3", "d4"}) {
    REQUIRE(run_cli({"learn", "--meta", (ds / "meta.json").string(), "--table", t, "--backend",
                     "exact", "--out", (ds / (t + ".model.json")).string()}) == 0);
  }
  write_file(ds / "query.json", kDemoQuery);
  return ds;
}

}  // namespace

TEST_CASE("ingest validates and canonicalizes a dataset") {
  TempDir tmp;
  const fs::path raw = tmp / "raw";
  const fs::path ds = tmp / "ds";
  write_demo_dataset(raw);
  CHECK(run_cli({"ingest", "--meta", (raw / "meta.json").string(), "--data", raw.string(),
                 "--out", ds.string()}) == 0);
  const json meta = json::parse(read_file(ds / "meta.json"));
  for (const auto& t : meta["tables"]) CHECK(t["row_count"].get<int>() == 4);

  SUBCASE("a missing column is a schema error") {
    write_file(raw / "d3.csv", "D\nd2\n");
    CHECK(run_cli({"ingest", "--meta", (raw / "meta.json").string(), "--data", raw.string(),
                   "--out", (tmp / "ds2").string()}) == 2);
  }
  SUBCASE("a header-only file ingests as a zero-row table") {
    write_file(raw / "d3.csv", "D,E\n");
    CHECK(run_cli({"ingest", "--meta", (raw / "meta.json").string(), "--data", raw.string(),
                   "--out", (tmp / "ds3").string()}) == 0);
    const json meta2 = json::parse(read_file(tmp / "ds3" / "meta.json"));
    CHECK(meta2["tables"][2]["row_count"].get<int>() == 0);
  }
}

TEST_CASE("learn writes models whose manifests describe the build") {
  TempDir tmp;
  const fs::path ds = prepare_demo(tmp);

  const json d3 = json::parse(read_file(ds / "d3.model.json"));
  CHECK(d3["manifest"]["kind"] == "exact");
  CHECK(d3["manifest"]["table"] == "d3");
  CHECK(d3["manifest"]["table_size"] == 4);
  CHECK(d3["manifest"]["distinct_pairs"] == 4);

  SUBCASE("learned backend with one cluster stores one network") {
    REQUIRE(run_cli({"learn", "--meta", (ds / "meta.json").string(), "--table", "d3",
                     "--backend", "learned", "--clusters", "1", "--embed-dim", "8",
                     "--epochs", "2", "--sg-epochs", "2", "--unseen-marginal", "--out",
                     (ds / "d3.learned.json").string()}) == 0);
    const json doc = json::parse(read_file(ds / "d3.learned.json"));
    CHECK(doc["manifest"]["kind"] == "learned");
    CHECK(doc["manifest"]["build"]["fallback_marginal"] == true);
    CHECK(doc["payload"]["exact_heads"] == false);
    CHECK(doc["payload"]["clusters"]["count"] == 1);
    CHECK(doc["payload"]["networks"].size() == 1);
  }
  SUBCASE("a cluster count between NDV and NDP is a parameter error") {
    // d3 has 3 distinct second values and 4 distinct pairs.
    CHECK(run_cli({"learn", "--meta", (ds / "meta.json").string(), "--table", "d3",
                   "--backend", "learned", "--clusters", "10", "--out",
                   (ds / "bad.json").string()}) == 0);  // 10 >= NDP: exact heads
    const json doc = json::parse(read_file(ds / "bad.json"));
    CHECK(doc["payload"]["exact_heads"] == true);

    // A genuine gap needs NDV < C < NDP; build a wider synthetic table.
    CHECK(run_cli({"synth", "table", "--rows", "60", "--ndv1", "5", "--ndv2", "5", "--ndp",
                   "15", "--table", "w", "--out", (ds / "w.csv").string(), "--meta-out",
                   (ds / "w.meta.json").string()}) == 0);
    CHECK(run_cli({"learn", "--meta", (ds / "w.meta.json").string(), "--data", ds.string(),
                   "--table", "w", "--backend", "learned", "--clusters", "10", "--out",
                   (ds / "w.model.json").string()}) == 8);
  }
}

TEST_CASE("join reports the exact join size") {
  TempDir tmp;
  const fs::path ds = prepare_demo(tmp);
  const fs::path report = ds / "report.json";
  CHECK(run_cli({"join", "--meta", (ds / "meta.json").string(), "--query",
                 (ds / "query.json").string(), "--out", report.string()}) == 0);
  const json doc = json::parse(read_file(report));
  CHECK(doc["join_size"] == 8.0);
  CHECK(doc["exact"] == true);
  CHECK(doc["cyclic"] == false);
  CHECK(doc["levels"].size() == 3);

  SUBCASE("rerunning any command reproduces its artifacts byte for byte") {
    const fs::path report2 = ds / "report2.json";
    REQUIRE(run_cli({"join", "--meta", (ds / "meta.json").string(), "--query",
                     (ds / "query.json").string(), "--out", report2.string()}) == 0);
    CHECK(read_file(report2) == read_file(report));

    REQUIRE(run_cli({"learn", "--meta", (ds / "meta.json").string(), "--table", "d3",
                     "--backend", "learned", "--clusters", "1", "--embed-dim", "8", "--epochs",
                     "2", "--sg-epochs", "2", "--seed", "6", "--out",
                     (ds / "m1.json").string()}) == 0);
    REQUIRE(run_cli({"learn", "--meta", (ds / "meta.json").string(), "--table", "d3",
                     "--backend", "learned", "--clusters", "1", "--embed-dim", "8", "--epochs",
                     "2", "--sg-epochs", "2", "--seed", "6", "--out",
                     (ds / "m2.json").string()}) == 0);
    CHECK(read_file(ds / "m1.json") == read_file(ds / "m2.json"));
  }

  SUBCASE("disjoint join attributes report size zero") {
    // change the data, then re-ingest and re-learn: sizes live in metadata
    const fs::path raw2 = tmp / "raw2";
    const fs::path ds2 = tmp / "ds2";
    write_demo_dataset(raw2);
    write_file(raw2 / "d4.csv", "E,F\ne9,f1\n");
    REQUIRE(run_cli({"ingest", "--meta", (raw2 / "meta.json").string(), "--data", raw2.string(),
                     "--out", ds2.string()}) == 0);
    for (const std::string t : {"d1", "d2", "d3", "d4"}) {
      REQUIRE(run_cli({"learn", "--meta", (ds2 / "meta.json").string(), "--table", t,
                       "--backend", "exact", "--out",
                       (ds2 / (t + ".model.json")).string()}) == 0);
    }
    write_file(ds2 / "query.json", kDemoQuery);
    CHECK(run_cli({"join", "--meta", (ds2 / "meta.json").string(), "--query",
                   (ds2 / "query.json").string(), "--out", report.string()}) == 0);
    CHECK(json::parse(read_file(report))["join_size"] == 0.0);

    // and sampling such a join is an empty-join error (distinct exit code)
    CHECK(run_cli({"sample", "--meta", (ds2 / "meta.json").string(), "--query",
                   (ds2 / "query.json").string(), "--n", "5", "--seed", "1", "--out",
                   (ds2 / "s.csv").string()}) == 6);
  }
  SUBCASE("unknown table in the query is a resolution error") {
    std::string q = kDemoQuery;
    q.replace(q.find("\"d1\""), 4, "\"d9\"");
    write_file(ds / "bad.json", q);
    CHECK(run_cli({"join", "--meta", (ds / "meta.json").string(), "--query",
                   (ds / "bad.json").string()}) == 3);
  }
}

TEST_CASE("sample writes deterministic artifacts with a manifest") {
  TempDir tmp;
  const fs::path ds = prepare_demo(tmp);
  auto sample_args = [&](const std::string& out, const std::string& seed,
                         const std::string& workers) {
    return std::vector<std::string>{"sample", "--meta", (ds / "meta.json").string(), "--query",
                                    (ds / "query.json").string(), "--n", "10", "--seed", seed,
                                    "--workers", workers, "--out", (ds / out).string()};
  };
  REQUIRE(run_cli(sample_args("a.csv", "9", "1")) == 0);

  const std::string content = read_file(ds / "a.csv");
  CHECK(content.substr(0, content.find('\n')) == "d1.B,d2.D,d3.E");
  std::size_t lines = 0;
  for (char c : content) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 11);  // header + 10 rows
  CHECK(content.find("b3,d2,e") != std::string::npos);

  const json manifest = json::parse(read_file(ds / "a.csv.manifest.json"));
  CHECK(manifest["seed"] == 9);
  CHECK(manifest["n"] == 10);

  SUBCASE("same seed gives byte-identical output") {
    REQUIRE(run_cli(sample_args("b.csv", "9", "1")) == 0);
    CHECK(read_file(ds / "b.csv") == content);
  }
  SUBCASE("different seed gives different output") {
    REQUIRE(run_cli(sample_args("c.csv", "10", "1")) == 0);
    CHECK(read_file(ds / "c.csv") != content);
  }
  SUBCASE("n of zero writes a header-only file") {
    auto args = sample_args("z.csv", "9", "1");
    args[6] = "0";  // the value slot of --n
    REQUIRE(run_cli(args) == 0);
    CHECK(read_file(ds / "z.csv") == "d1.B,d2.D,d3.E\n");
  }
}

TEST_CASE("oracle sampling and the KS evaluation close the loop") {
  TempDir tmp;
  const fs::path ds = prepare_demo(tmp);

  // model-backed sample
  REQUIRE(run_cli({"sample", "--meta", (ds / "meta.json").string(), "--query",
                   (ds / "query.json").string(), "--n", "4000", "--seed", "3", "--out",
                   (ds / "mine.csv").string()}) == 0);
  // oracle sample of the same query (raw data referenced by the dataset)
  REQUIRE(run_cli({"sample", "--meta", (ds / "meta.json").string(), "--query",
                   (ds / "query.json").string(), "--n", "4000", "--seed", "4", "--oracle",
                   "--out", (ds / "truth.csv").string()}) == 0);

  const fs::path report = ds / "ks.json";
  CHECK(run_cli({"evaluate", "ks", "--sample", (ds / "mine.csv").string(), "--against",
                 (ds / "truth.csv").string(), "--alpha", "0.01", "--out", report.string()}) == 0);
  const json doc = json::parse(read_file(report));
  CHECK(doc["uniform_retained"] == true);
  CHECK(doc["n"] == 4000);
}

TEST_CASE("fscore evaluation matches the perturbation knob") {
  TempDir tmp;
  const fs::path ds = prepare_demo(tmp);
  REQUIRE(run_cli({"learn", "--meta", (ds / "meta.json").string(), "--table", "d3", "--backend",
                   "exact", "--perturb", "0.03", "--seed", "5", "--out",
                   (ds / "d3.p.json").string()}) == 0);
  const fs::path report = ds / "f.json";
  CHECK(run_cli({"evaluate", "fscore", "--model", (ds / "d3.p.json").string(), "--meta",
                 (ds / "meta.json").string(), "--table", "d3", "--n", "500", "--alpha", "0.95",
                 "--seed", "2", "--out", report.string()}) == 0);
  const json doc = json::parse(read_file(report));
  CHECK(doc["mean_fscore"].get<double>() == doctest::Approx(0.97).epsilon(1e-9));
  for (const auto& c : doc["per_condition"]) {
    CHECK(c["fscore"].get<double>() == doctest::Approx(0.97).epsilon(1e-9));
  }
}

TEST_CASE("synth selfjoin emits a ready-to-learn fixture") {
  TempDir tmp;
  const fs::path dir = tmp / "fix";
  REQUIRE(run_cli({"synth", "selfjoin", "--rows", "200", "--ndv1", "20", "--ndv2", "20",
                   "--ndp", "40", "--ways", "3", "--table", "s", "--seed", "8", "--out",
                   dir.string()}) == 0);
  REQUIRE(run_cli({"learn", "--meta", (dir / "meta.json").string(), "--table", "s_1",
                   "--backend", "exact", "--out", (dir / "s.model.json").string()}) == 0);
  CHECK(run_cli({"join", "--meta", (dir / "meta.json").string(), "--query",
                 (dir / "query.json").string(), "--out", (dir / "r.json").string()}) == 0);
  const json doc = json::parse(read_file(dir / "r.json"));
  CHECK(doc["join_size"].get<double>() > 0.0);
}

TEST_CASE("worker counts do not change sample bytes") {
  TempDir tmp;
  const fs::path ds = prepare_demo(tmp);
  auto args = [&](const std::string& out, const std::string& workers) {
    return std::vector<std::string>{"sample", "--meta", (ds / "meta.json").string(), "--query",
                                    (ds / "query.json").string(), "--n", "5000", "--seed", "11",
                                    "--workers", workers, "--out", (ds / out).string()};
  };
  REQUIRE(run_cli(args("w1.csv", "1")) == 0);
  REQUIRE(run_cli(args("w4.csv", "4")) == 0);
  CHECK(read_file(ds / "w1.csv") == read_file(ds / "w4.csv"));
}
