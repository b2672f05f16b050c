#include "modeljoin/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "modeljoin/catalog.hpp"
#include "modeljoin/csv.hpp"
#include "modeljoin/errors.hpp"
#include "modeljoin/evaluation.hpp"
#include "modeljoin/inference.hpp"
#include "modeljoin/join_graph.hpp"
#include "modeljoin/learned_model.hpp"
#include "modeljoin/logging.hpp"
#include "modeljoin/model_io.hpp"
#include "modeljoin/sampler.hpp"
#include "modeljoin/synth.hpp"
#include "modeljoin/table_model.hpp"

namespace modeljoin {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve_against(const std::string& base_dir, const fs::path& fallback_dir,
                         const std::string& raw) {
  fs::path p(raw);
  if (p.is_absolute()) return p;
  if (!base_dir.empty()) return fs::path(base_dir) / p;
  return fallback_dir / p;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) raise(ErrorKind::Io, "write failed for " + path.string());
}

fs::path table_csv_path(const TableMeta& meta, const fs::path& dir) {
  return dir / (meta.data_path ? *meta.data_path : meta.table_id + ".csv");
}

// Loads the per-table models named by the query, building exact indexes on the
// fly for raw-data sources. Catalog row counts are synced from the sources.
ModelRegistry build_registry(const JoinQuery& query, Catalog& catalog, const RunConfig& cfg) {
  const fs::path query_dir = fs::path(cfg.query_path).parent_path();
  ModelRegistry registry;
  std::map<std::string, std::shared_ptr<TableModel>> by_path;

  for (const auto& table_id : query.tables) {
    catalog.require(table_id);
    TableMeta& meta = catalog.tables.at(table_id);
    const SourceRef& src = query.sources.at(table_id);
    std::shared_ptr<TableModel> model;
    if (src.kind == SourceRef::Kind::Model) {
      const fs::path path = resolve_against(cfg.models_dir, query_dir, src.path);
      auto it = by_path.find(path.string());
      if (it == by_path.end()) {
        it = by_path.emplace(path.string(), load_model(path)).first;
      }
      if (meta.row_count == 0) meta.row_count = it->second->table_size();
      model = rebind_model(it->second, meta);
    } else {
      const fs::path path = resolve_against(cfg.data_dir, query_dir, src.path);
      TableData data = read_csv(path);
      meta.row_count = static_cast<std::int64_t>(data.rows.size());
      model = build_exact(data, meta);
    }
    registry.bind(table_id, model, model->kind());
  }
  return registry;
}

std::map<std::string, TableData> load_all_raw(const JoinQuery& query, const Catalog& catalog,
                                              const RunConfig& cfg) {
  const fs::path query_dir = fs::path(cfg.query_path).parent_path();
  std::map<std::string, TableData> out;
  for (const auto& table_id : query.tables) {
    const TableMeta& meta = catalog.require(table_id);
    const SourceRef& src = query.sources.at(table_id);
    fs::path path;
    if (src.kind == SourceRef::Kind::Data) {
      path = resolve_against(cfg.data_dir, query_dir, src.path);
    } else if (meta.data_path) {
      path = resolve_against(cfg.data_dir, fs::path(cfg.meta_path).parent_path(),
                             *meta.data_path);
    } else {
      raise(ErrorKind::Resolution,
            table_id + ": oracle sampling needs raw data, but none is referenced");
    }
    TableData data = read_csv(path);
    data.name = table_id;
    out.emplace(table_id, std::move(data));
  }
  return out;
}

json sample_manifest(const RunConfig& cfg, bool oracle) {
  return json{{"command", cfg.command}, {"seed", cfg.seed},     {"n", cfg.n},
              {"workers", cfg.workers}, {"query", cfg.query_path}, {"meta", cfg.meta_path},
              {"oracle", oracle}};
}

int cmd_ingest(const RunConfig& cfg) {
  Catalog catalog = load_metadata(cfg.meta_path);
  const fs::path data_dir(cfg.data_dir);
  const fs::path out_dir(cfg.out_path);
  fs::create_directories(out_dir);

  for (const auto& id : catalog.order) {
    TableMeta& meta = catalog.tables.at(id);
    TableData data = read_csv(table_csv_path(meta, data_dir));
    if (data.header != meta.attributes) {
      raise(ErrorKind::Schema, id + ": data header does not match the declared attributes");
    }
    for (const Row& row : data.rows) {
      for (const Token& tok : row) validate_token(tok, id);
    }
    meta.row_count = static_cast<std::int64_t>(data.rows.size());
    meta.data_path = id + ".csv";
    write_csv(out_dir / *meta.data_path, data.header, data.rows);
  }
  save_metadata(out_dir / "meta.json", catalog);
  std::cout << "ingested " << catalog.order.size() << " tables into " << out_dir.string() << "\n";
  return 0;
}

int cmd_learn(const RunConfig& cfg, const std::string& table, const std::string& backend,
              double perturb_eps, bool unseen_marginal) {
  Catalog catalog = load_metadata(cfg.meta_path);
  const TableMeta& meta = catalog.require(table);
  const fs::path data_dir =
      cfg.data_dir.empty() ? fs::path(cfg.meta_path).parent_path() : fs::path(cfg.data_dir);
  TableData data = read_csv(table_csv_path(meta, data_dir));

  std::shared_ptr<TableModel> model;
  if (backend == "exact") {
    std::shared_ptr<ExactNestedIndex> exact = build_exact(data, meta);
    model = perturb_eps > 0.0 ? perturb_exact(exact, perturb_eps, cfg.seed) : exact;
  } else if (backend == "learned") {
    LearnedConfig lc;
    lc.clusters = cfg.clusters;
    lc.seed = cfg.seed;
    lc.fallback_marginal = unseen_marginal;
    lc.embedding.dim = cfg.embed_dim;
    lc.embedding.negatives = cfg.negatives;
    lc.embedding.epochs = cfg.sg_epochs;
    lc.network.hidden = cfg.hidden;
    lc.network.epochs = cfg.epochs;
    lc.network.lr = cfg.lr;
    model = train_learned_model(data, meta, lc);
  } else {
    raise(ErrorKind::Parameter, "backend must be exact or learned");
  }
  save_model(cfg.out_path, *model);
  std::cout << "wrote " << backend << " model for " << table << " (" << data.rows.size()
            << " rows) to " << cfg.out_path << "\n";
  return 0;
}

json inference_report(const RunConfig& cfg, const SkeletonBuild& build,
                      const InferenceResult& result) {
  json levels = json::array();
  for (const auto& level : result.levels) {
    double mass = 0.0;
    for (const auto& [dv, f] : level.freqs) mass += f;
    levels.push_back(json{{"node", build.graph.nodes[static_cast<std::size_t>(level.level)].label},
                          {"support", level.freqs.size()},
                          {"mass", mass}});
  }
  json eliminated = json::array();
  for (const auto& e : build.eliminated) eliminated.push_back(e.table_id);
  // No timings in the artifact: rerunning a command must reproduce it byte
  // for byte.
  return json{{"command", "join"},
              {"seed", cfg.seed},
              {"join_size", result.join_size},
              {"exact", result.exact},
              {"cyclic", !build.eliminated.empty()},
              {"levels", levels},
              {"eliminated", eliminated},
              {"cond_pairs_visited", result.stats.cond_pairs_visited}};
}

int cmd_join(const RunConfig& cfg, const std::optional<std::string>& root) {
  Catalog catalog = load_metadata(cfg.meta_path);
  JoinQuery query = load_query(cfg.query_path);
  ModelRegistry registry = build_registry(query, catalog, cfg);
  ResolvedQuery rq = resolve_query(query, catalog, registry);
  SkeletonBuild build = build_skeleton(rq, root);
  InferenceResult result = run_inference(build.graph);

  const json report = inference_report(cfg, build, result);
  std::cout << report.dump(2) << "\n";
  if (!cfg.out_path.empty()) write_text(cfg.out_path, report.dump(2) + "\n");
  return 0;
}

int cmd_sample(const RunConfig& cfg, const std::optional<std::string>& root, bool oracle_mode) {
  Catalog catalog = load_metadata(cfg.meta_path);
  JoinQuery query = load_query(cfg.query_path);

  SampleMatrix sample;
  if (oracle_mode) {
    const std::map<std::string, TableData> raw = load_all_raw(query, catalog, cfg);
    OracleOptions opt;
    opt.cap = cfg.oracle_cap;
    const OracleJoin oracle = oracle_join(raw, query, catalog, opt);
    if (oracle.total == 0 && cfg.n > 0) {
      raise(ErrorKind::EmptyJoin, "the join result is empty; nothing to sample");
    }
    sample = oracle_uniform_sample(oracle, cfg.n, cfg.seed);
  } else {
    ModelRegistry registry = build_registry(query, catalog, cfg);
    ResolvedQuery rq = resolve_query(query, catalog, registry);
    SkeletonBuild build = build_skeleton(rq, root);
    InferenceResult result = run_inference(build.graph);
    SamplerOptions opt;
    opt.seed = cfg.seed;
    opt.workers = cfg.workers;
    opt.reject_budget = cfg.reject_budget;
    sample = generate_join_sample(build, result, cfg.n, opt);
  }

  write_csv(cfg.out_path, sample.columns, sample.rows);
  write_text(cfg.out_path + ".manifest.json", sample_manifest(cfg, oracle_mode).dump(2) + "\n");
  std::cout << "wrote " << sample.row_count() << " rows to " << cfg.out_path << "\n";
  return 0;
}

std::vector<TupleKey> read_sample_tuples(const fs::path& path,
                                         std::vector<std::string>* header_out = nullptr) {
  TableData data = read_csv(path);
  if (header_out) *header_out = data.header;
  std::vector<TupleKey> out;
  out.reserve(data.rows.size());
  for (auto& row : data.rows) out.push_back(std::move(row));
  return out;
}

int cmd_evaluate_ks(const RunConfig& cfg, const std::string& sample_path,
                    const std::string& against_path) {
  std::vector<std::string> header_a, header_b;
  const std::vector<TupleKey> a = read_sample_tuples(sample_path, &header_a);
  const std::vector<TupleKey> b = read_sample_tuples(against_path, &header_b);
  if (header_a != header_b) {
    raise(ErrorKind::Parameter, "sample files have different column layouts");
  }
  const KSReport report = ks_two_sample(a, b, cfg.alpha);

  json cdf = json::array();
  for (const auto& [tuple, fa, fb] : report.cdf_points) {
    cdf.push_back(json{{"tuple", tuple}, {"cdf_a", fa}, {"cdf_b", fb}});
  }
  const json doc{{"command", "evaluate-ks"},
                 {"seed", cfg.seed},
                 {"statistic", report.statistic},
                 {"n", report.n},
                 {"m", report.m},
                 {"alpha", report.alpha},
                 {"c_alpha", report.c_alpha},
                 {"critical_value", report.critical},
                 {"uniform_retained", report.uniform_retained},
                 {"cdf", cdf}};
  std::cout << "KS statistic " << report.statistic << " vs critical " << report.critical << ": "
            << (report.uniform_retained ? "uniformity retained" : "uniformity rejected") << "\n";
  if (!cfg.out_path.empty()) write_text(cfg.out_path, doc.dump(2) + "\n");
  return 0;
}

int cmd_evaluate_fscore(const RunConfig& cfg, const std::string& model_path,
                        const std::string& table) {
  Catalog catalog = load_metadata(cfg.meta_path);
  const TableMeta& meta = catalog.require(table);
  const fs::path data_dir =
      cfg.data_dir.empty() ? fs::path(cfg.meta_path).parent_path() : fs::path(cfg.data_dir);
  TableData data = read_csv(table_csv_path(meta, data_dir));
  std::shared_ptr<ExactNestedIndex> truth = build_exact(data, meta);
  std::shared_ptr<TableModel> model = load_model(model_path);

  const std::size_t n = cfg.n ? cfg.n : 10000;
  const GenerativeConfusion confusion = generative_fscore(*model, *truth, n, cfg.alpha, cfg.seed);

  json conditions = json::array();
  for (const auto& c : confusion.per_condition) {
    conditions.push_back(json{{"value", c.value}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn},
                              {"fscore", c.fscore}});
  }
  const json doc{{"command", "evaluate-fscore"},
                 {"seed", cfg.seed},
                 {"model", model_path},
                 {"table", table},
                 {"sample_size", n},
                 {"mean_fscore", confusion.mean_sampled},
                 {"median_fscore", confusion.median},
                 {"confidence", confusion.confidence},
                 {"wilson_low", confusion.wilson_low},
                 {"wilson_high", confusion.wilson_high},
                 {"per_condition", conditions}};
  std::cout << "mean F-score " << confusion.mean_sampled << " (" << confusion.wilson_low << ", "
            << confusion.wilson_high << "), median " << confusion.median << "\n";
  if (!cfg.out_path.empty()) write_text(cfg.out_path, doc.dump(2) + "\n");
  return 0;
}

int cmd_synth_table(const RunConfig& cfg, const SynthSpec& spec, const std::string& meta_out) {
  TableData data = gen_table(spec);
  write_csv(cfg.out_path, data.header, data.rows);
  if (!meta_out.empty()) {
    Catalog catalog;
    TableMeta meta = synth_table_meta(spec);
    meta.data_path = fs::path(cfg.out_path).filename().string();
    catalog.order.push_back(meta.table_id);
    catalog.tables[meta.table_id] = meta;
    save_metadata(meta_out, catalog);
  }
  std::cout << "wrote " << data.rows.size() << " rows to " << cfg.out_path << "\n";
  return 0;
}

int cmd_synth_selfjoin(const RunConfig& cfg, const SynthSpec& spec, int ways) {
  const fs::path out_dir(cfg.out_path);
  fs::create_directories(out_dir);

  TableData data = gen_table(spec);
  write_csv(out_dir / (spec.table_id + ".csv"), data.header, data.rows);

  // Every alias points at one shared model file; learn it from the table CSV.
  SourceRef source;
  source.kind = SourceRef::Kind::Model;
  source.path = spec.table_id + ".model.json";
  SelfJoinFixture fixture = gen_selfjoin_fixture(spec, ways, source);
  for (const auto& id : fixture.catalog.order) {
    fixture.catalog.tables.at(id).data_path = spec.table_id + ".csv";
  }
  save_metadata(out_dir / "meta.json", fixture.catalog);

  json tables = json::array();
  for (const auto& id : fixture.query.tables) {
    tables.push_back(json{{"name", id}, {"model", source.path}});
  }
  json joins = json::array();
  for (const auto& cond : fixture.query.join_conditions) {
    joins.push_back(json{{"left", cond.left.qualified()}, {"right", cond.right.qualified()}});
  }
  write_text(out_dir / "query.json", json{{"tables", tables}, {"joins", joins}}.dump(2) + "\n");
  std::cout << "wrote " << ways << "-way self-join fixture to " << out_dir.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"model-join engine: join per-table models and sample the join result"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string table, backend = "exact", sample_path, against_path, model_path, meta_out;
  std::optional<std::string> root;
  double perturb_eps = 0.0;
  bool oracle_mode = false;
  bool unseen_marginal = false;
  SynthSpec spec;
  int ways = 3;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", cfg.seed, "master seed; all randomness derives from it");
    cmd->add_option("--out", cfg.out_path, "output path");
  };

  CLI::App* ingest = app.add_subcommand("ingest", "validate CSVs against metadata");
  ingest->add_option("--meta", cfg.meta_path, "metadata document")->required();
  ingest->add_option("--data", cfg.data_dir, "directory holding the raw CSV files")->required();
  ingest->add_option("--out", cfg.out_path, "dataset directory to write")->required();

  CLI::App* learn = app.add_subcommand("learn", "build a per-table model");
  learn->add_option("--meta", cfg.meta_path, "dataset metadata")->required();
  learn->add_option("--data", cfg.data_dir, "data directory (defaults next to metadata)");
  learn->add_option("--table", table, "table to model")->required();
  learn->add_option("--backend", backend, "exact | learned");
  learn->add_option("--perturb", perturb_eps, "total-variation distance for a perturbed model");
  learn->add_option("--clusters", cfg.clusters, "final cluster count C");
  learn->add_option("--embed-dim", cfg.embed_dim, "embedding dimension N");
  learn->add_option("--negatives", cfg.negatives, "negative samples per positive");
  learn->add_option("--epochs", cfg.epochs, "network training epochs");
  learn->add_option("--sg-epochs", cfg.sg_epochs, "embedding training epochs");
  learn->add_option("--lr", cfg.lr, "network learning rate");
  learn->add_option("--hidden", cfg.hidden, "hidden layer width");
  learn->add_flag("--unseen-marginal", unseen_marginal,
                  "learned models answer unseen conditioning values with the marginal");
  learn->add_option("--seed", cfg.seed, "master seed");
  learn->add_option("--out", cfg.out_path, "model file to write")->required();

  CLI::App* join = app.add_subcommand("join", "run inference and report the join size");
  join->add_option("--meta", cfg.meta_path, "dataset metadata")->required();
  join->add_option("--query", cfg.query_path, "query document")->required();
  join->add_option("--models", cfg.models_dir, "base directory for model references");
  join->add_option("--data", cfg.data_dir, "base directory for raw-data references");
  join->add_option("--root", root, "skeleton root node");
  add_common(join);

  CLI::App* sample = app.add_subcommand("sample", "generate a uniform sample of the join");
  sample->add_option("--meta", cfg.meta_path, "dataset metadata")->required();
  sample->add_option("--query", cfg.query_path, "query document")->required();
  sample->add_option("--models", cfg.models_dir, "base directory for model references");
  sample->add_option("--data", cfg.data_dir, "base directory for raw-data references");
  sample->add_option("--n", cfg.n, "sample size")->required();
  sample->add_option("--workers", cfg.workers, "sampler worker threads");
  sample->add_option("--reject-budget", cfg.reject_budget,
                     "candidate budget for cyclic rejection (0 = auto)");
  sample->add_option("--oracle-cap", cfg.oracle_cap, "row cap for --oracle materialization");
  sample->add_flag("--oracle", oracle_mode,
                   "sample the brute-force join of the raw tables instead of the models");
  sample->add_option("--root", root, "skeleton root node");
  sample->add_option("--seed", cfg.seed, "master seed");
  sample->add_option("--out", cfg.out_path, "sample CSV to write")->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "quality instruments");
  evaluate->require_subcommand(1);
  CLI::App* ks = evaluate->add_subcommand("ks", "two-sample KS uniformity test");
  ks->add_option("--sample", sample_path, "generated sample CSV")->required();
  ks->add_option("--against", against_path, "reference sample CSV")->required();
  ks->add_option("--alpha", cfg.alpha, "significance level");
  add_common(ks);
  CLI::App* fscore = evaluate->add_subcommand("fscore", "generative F-score of a model");
  fscore->add_option("--model", model_path, "model file")->required();
  fscore->add_option("--meta", cfg.meta_path, "dataset metadata")->required();
  fscore->add_option("--data", cfg.data_dir, "data directory (defaults next to metadata)");
  fscore->add_option("--table", table, "table the model covers")->required();
  fscore->add_option("--n", cfg.n, "conditioning sample size (default 10000)");
  CLI::Option* fscore_alpha =
      fscore->add_option("--alpha", cfg.alpha, "confidence level for the Wilson interval");
  add_common(fscore);

  CLI::App* synth = app.add_subcommand("synth", "synthetic data generators");
  synth->require_subcommand(1);
  auto add_spec = [&](CLI::App* cmd) {
    cmd->add_option("--rows", spec.rows, "row count")->required();
    cmd->add_option("--ndv1", spec.ndv_first, "distinct values in the first JA")->required();
    cmd->add_option("--ndv2", spec.ndv_second, "distinct values in the second JA")->required();
    cmd->add_option("--ndp", spec.distinct_pairs, "distinct (first, second) pairs")->required();
    cmd->add_option("--zipf", spec.zipf_exponent, "Zipf exponent for pair multiplicities");
    cmd->add_option("--table", spec.table_id, "table name");
    cmd->add_option("--seed", spec.seed, "generator seed");
  };
  CLI::App* synth_table = synth->add_subcommand("table", "one controlled two-column table");
  add_spec(synth_table);
  synth_table->add_option("--meta-out", meta_out, "also write a metadata document");
  synth_table->add_option("--out", cfg.out_path, "CSV to write")->required();
  CLI::App* synth_self = synth->add_subcommand("selfjoin", "n-way self-join fixture");
  add_spec(synth_self);
  synth_self->add_option("--ways", ways, "number of chained copies");
  synth_self->add_option("--out", cfg.out_path, "fixture directory to write")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (ingest->parsed()) {
      cfg.command = "ingest";
      return cmd_ingest(cfg);
    }
    if (learn->parsed()) {
      cfg.command = "learn";
      return cmd_learn(cfg, table, backend, perturb_eps, unseen_marginal);
    }
    if (join->parsed()) {
      cfg.command = "join";
      return cmd_join(cfg, root);
    }
    if (sample->parsed()) {
      cfg.command = "sample";
      return cmd_sample(cfg, root, oracle_mode);
    }
    if (evaluate->parsed()) {
      if (ks->parsed()) {
        cfg.command = "evaluate-ks";
        return cmd_evaluate_ks(cfg, sample_path, against_path);
      }
      cfg.command = "evaluate-fscore";
      if (fscore_alpha->count() == 0) cfg.alpha = 0.95;  // confidence, not significance
      return cmd_evaluate_fscore(cfg, model_path, table);
    }
    if (synth->parsed()) {
      if (synth_table->parsed()) {
        cfg.command = "synth-table";
        return cmd_synth_table(cfg, spec, meta_out);
      }
      cfg.command = "synth-selfjoin";
      return cmd_synth_selfjoin(cfg, spec, ways);
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(ErrorKind::Internal);
  }
  return 0;
}

}  // namespace modeljoin
