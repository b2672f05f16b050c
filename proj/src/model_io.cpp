#include "modeljoin/model_io.hpp"

#include <fstream>

#include <json.hpp>

#include "modeljoin/errors.hpp"
#include "modeljoin/learned_model.hpp"

namespace modeljoin {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json freq_map_to_json(const FreqMap& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[k] = v;
  return out;
}

FreqMap freq_map_from_json(const json& j) {
  FreqMap out;
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value().get<double>();
  return out;
}

json nested_to_json(const std::map<Token, FreqMap>& m) {
  json out = json::object();
  for (const auto& [k, inner] : m) out[k] = freq_map_to_json(inner);
  return out;
}

std::map<Token, FreqMap> nested_from_json(const json& j) {
  std::map<Token, FreqMap> out;
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = freq_map_from_json(it.value());
  return out;
}

json cond_store_to_json(const ExactNestedIndex::CondStore& store) {
  json out = json::object();
  for (const auto& [attr, masks] : store) {
    json mask_obj = json::object();
    for (const auto& [mask, keys] : masks) mask_obj[mask] = nested_to_json(keys);
    out[attr] = mask_obj;
  }
  return out;
}

ExactNestedIndex::CondStore cond_store_from_json(const json& j) {
  ExactNestedIndex::CondStore out;
  for (auto attr_it = j.begin(); attr_it != j.end(); ++attr_it) {
    for (auto mask_it = attr_it.value().begin(); mask_it != attr_it.value().end(); ++mask_it) {
      out[attr_it.key()][mask_it.key()] = nested_from_json(mask_it.value());
    }
  }
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

json meta_to_json(const TableMeta& meta) {
  json jas = json::array();
  for (const auto& ja : meta.join_attrs) {
    jas.push_back({{"attr", ja.attr},
                   {"position", ja.position == JaPosition::First ? "first" : "second"}});
  }
  return json{{"table", meta.table_id},
              {"table_size", meta.row_count},
              {"attributes", meta.attributes},
              {"join_attrs", jas}};
}

TableMeta meta_from_json(const json& j) {
  TableMeta meta;
  meta.table_id = j.at("table").get<std::string>();
  meta.row_count = j.at("table_size").get<std::int64_t>();
  for (const auto& a : j.at("attributes")) meta.attributes.push_back(a.get<std::string>());
  for (const auto& ja : j.at("join_attrs")) {
    JaDecl decl;
    decl.attr = ja.at("attr").get<std::string>();
    decl.position =
        ja.at("position").get<std::string>() == "first" ? JaPosition::First : JaPosition::Second;
    meta.join_attrs.push_back(decl);
  }
  meta.validate();
  return meta;
}

json learned_config_to_json(const LearnedConfig& cfg) {
  return json{{"clusters", cfg.clusters},
              {"fallback_marginal", cfg.fallback_marginal},
              {"seed", cfg.seed},
              {"embedding",
               {{"dim", cfg.embedding.dim},
                {"context", cfg.embedding.context},
                {"negatives", cfg.embedding.negatives},
                {"noise_exponent", cfg.embedding.noise_exponent},
                {"epochs", cfg.embedding.epochs},
                {"lr", cfg.embedding.lr},
                {"seed", cfg.embedding.seed}}},
              {"network",
               {{"hidden", cfg.network.hidden},
                {"hidden_layers", cfg.network.hidden_layers},
                {"epochs", cfg.network.epochs},
                {"lr", cfg.network.lr},
                {"batch", cfg.network.batch},
                {"seed", cfg.network.seed}}}};
}

LearnedConfig learned_config_from_json(const json& j) {
  LearnedConfig cfg;
  cfg.clusters = j.at("clusters").get<int>();
  cfg.fallback_marginal = j.at("fallback_marginal").get<bool>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  const json& e = j.at("embedding");
  cfg.embedding.dim = e.at("dim").get<int>();
  cfg.embedding.context = e.at("context").get<int>();
  cfg.embedding.negatives = e.at("negatives").get<int>();
  cfg.embedding.noise_exponent = e.at("noise_exponent").get<double>();
  cfg.embedding.epochs = e.at("epochs").get<int>();
  cfg.embedding.lr = e.at("lr").get<double>();
  cfg.embedding.seed = e.at("seed").get<std::uint64_t>();
  const json& n = j.at("network");
  cfg.network.hidden = n.at("hidden").get<int>();
  cfg.network.hidden_layers = n.at("hidden_layers").get<int>();
  cfg.network.epochs = n.at("epochs").get<int>();
  cfg.network.lr = n.at("lr").get<double>();
  cfg.network.batch = n.at("batch").get<int>();
  cfg.network.seed = n.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

// Serializer with access to the exact index internals.
class ModelCodec {
 public:
  static json exact_payload(const ExactNestedIndex& m) {
    return json{{"first_ja_freqs", freq_map_to_json(m.first_freqs_)},
                {"second_ja_freqs", freq_map_to_json(m.second_freqs_)},
                {"pair_counts", nested_to_json(m.pair_counts_)},
                {"cond_store", cond_store_to_json(m.cond_store_)},
                {"distinct_pairs", m.distinct_pairs_},
                {"max_pair_freq", m.max_pair_freq_}};
  }

  static std::shared_ptr<ExactNestedIndex> exact_from(const TableMeta& meta, const json& payload) {
    auto model = std::shared_ptr<ExactNestedIndex>(new ExactNestedIndex(meta));
    model->first_freqs_ = freq_map_from_json(payload.at("first_ja_freqs"));
    model->second_freqs_ = freq_map_from_json(payload.at("second_ja_freqs"));
    model->pair_counts_ = nested_from_json(payload.at("pair_counts"));
    model->cond_store_ = cond_store_from_json(payload.at("cond_store"));
    model->distinct_pairs_ = payload.at("distinct_pairs").get<std::int64_t>();
    model->max_pair_freq_ = payload.at("max_pair_freq").get<double>();
    return model;
  }
};

namespace {

json embedding_to_json(const EmbeddingTable& emb) {
  return json{{"dim", emb.dim},
              {"tokens", emb.tokens},
              {"input", matrix_to_json(emb.input)},
              {"output", matrix_to_json(emb.output)}};
}

EmbeddingTable embedding_from_json(const json& j) {
  EmbeddingTable emb;
  emb.dim = j.at("dim").get<int>();
  for (const auto& t : j.at("tokens")) emb.tokens.push_back(t.get<std::string>());
  for (std::size_t i = 0; i < emb.tokens.size(); ++i) emb.index[emb.tokens[i]] = static_cast<int>(i);
  emb.input = matrix_from_json(j.at("input"));
  emb.output = matrix_from_json(j.at("output"));
  return emb;
}

json clusters_to_json(const ClusterMap& c) {
  json temp = json::object(), fin = json::object(), weights = json::object();
  for (const auto& [v, t] : c.temporary) temp[v] = t;
  for (const auto& [v, f] : c.final_assignment) fin[v] = f;
  for (const auto& [dv, w] : c.weights) {
    json inner = json::object();
    for (const auto& [cluster, share] : w) inner[std::to_string(cluster)] = share;
    weights[dv] = inner;
  }
  json members = json::array();
  for (const auto& m : c.members) members.push_back(m);
  return json{{"count", c.cluster_count},
              {"temporary", temp},
              {"final", fin},
              {"members", members},
              {"weights", weights}};
}

ClusterMap clusters_from_json(const json& j) {
  ClusterMap c;
  c.cluster_count = j.at("count").get<int>();
  for (auto it = j.at("temporary").begin(); it != j.at("temporary").end(); ++it) {
    c.temporary[it.key()] = it.value().get<int>();
  }
  for (auto it = j.at("final").begin(); it != j.at("final").end(); ++it) {
    c.final_assignment[it.key()] = it.value().get<int>();
  }
  for (const auto& m : j.at("members")) {
    std::vector<Token> bucket;
    for (const auto& v : m) bucket.push_back(v.get<std::string>());
    c.members.push_back(bucket);
  }
  for (auto it = j.at("weights").begin(); it != j.at("weights").end(); ++it) {
    for (auto w = it.value().begin(); w != it.value().end(); ++w) {
      c.weights[it.key()][std::stoi(w.key())] = w.value().get<double>();
    }
  }
  return c;
}

json networks_to_json(const std::vector<CDGNetwork>& nets) {
  json out = json::array();
  for (const auto& net : nets) {
    json weights = json::array(), biases = json::array();
    for (const auto& w : net.weights) weights.push_back(matrix_to_json(w));
    for (const auto& b : net.biases) biases.push_back(vector_to_json(b));
    out.push_back(json{{"values", net.output_values},
                       {"uniform", net.uniform_head},
                       {"weights", weights},
                       {"biases", biases}});
  }
  return out;
}

std::vector<CDGNetwork> networks_from_json(const json& j) {
  std::vector<CDGNetwork> nets;
  for (const auto& n : j) {
    CDGNetwork net;
    for (const auto& v : n.at("values")) net.output_values.push_back(v.get<std::string>());
    net.uniform_head = n.at("uniform").get<bool>();
    for (const auto& w : n.at("weights")) net.weights.push_back(matrix_from_json(w));
    for (const auto& b : n.at("biases")) net.biases.push_back(vector_from_json(b));
    nets.push_back(std::move(net));
  }
  return nets;
}

// Delegating wrapper that presents a model under a query alias.
class AliasedModel final : public TableModel {
 public:
  AliasedModel(std::shared_ptr<const TableModel> inner, TableMeta alias_meta)
      : TableModel(std::move(alias_meta)), inner_(std::move(inner)) {}

  bool exact() const override { return inner_->exact(); }
  std::string kind() const override { return inner_->kind(); }
  const FreqMap& first_ja_freqs() const override { return inner_->first_ja_freqs(); }
  const FreqMap& second_ja_freqs() const override { return inner_->second_ja_freqs(); }
  ProbMap cond_second_given_first(const Token& dv) const override {
    return inner_->cond_second_given_first(dv);
  }
  ProbMap cond_nonja(const std::string& attr, const JaObservation& given) const override {
    return inner_->cond_nonja(attr, given);
  }
  std::int64_t distinct_pair_count() const override { return inner_->distinct_pair_count(); }
  double max_pair_freq() const override { return inner_->max_pair_freq(); }

 private:
  std::shared_ptr<const TableModel> inner_;
};

}  // namespace

std::string model_to_json_text(const TableModel& model) {
  json doc;
  doc["format"] = "modeljoin-model";
  doc["version"] = kFormatVersion;

  json manifest = meta_to_json(model.meta());
  manifest["distinct_pairs"] = model.distinct_pair_count();

  if (const auto* exact = dynamic_cast<const ExactNestedIndex*>(&model)) {
    manifest["kind"] = "exact";
    doc["payload"] = ModelCodec::exact_payload(*exact);
  } else if (const auto* perturbed = dynamic_cast<const PerturbedModel*>(&model)) {
    manifest["kind"] = "exact";
    manifest["perturb"] = {{"epsilon", perturbed->epsilon()}, {"seed", perturbed->seed()}};
    doc["payload"] = ModelCodec::exact_payload(*perturbed->base());
  } else if (const auto* learned = dynamic_cast<const LearnedTableModel*>(&model)) {
    manifest["kind"] = "learned";
    manifest["build"] = learned_config_to_json(learned->config());
    json payload;
    payload["first_ja_freqs"] = freq_map_to_json(learned->first_ja_freqs());
    payload["second_ja_freqs"] = freq_map_to_json(learned->second_ja_freqs());
    payload["cond_store"] = cond_store_to_json(learned->cond_store());
    payload["exact_heads"] = learned->exact_heads();
    if (learned->exact_heads()) {
      payload["exact_pairs"] = nested_to_json(learned->exact_pairs());
    } else {
      payload["embedding"] = embedding_to_json(learned->embeddings());
      payload["clusters"] = clusters_to_json(learned->clusters());
      payload["networks"] = networks_to_json(learned->networks());
    }
    doc["payload"] = payload;
  } else {
    raise(ErrorKind::Parameter, "model kind '" + model.kind() + "' is not serializable");
  }

  doc["manifest"] = manifest;
  return doc.dump(2);
}

void save_model(const std::filesystem::path& path, const TableModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + path.string());
  out << model_to_json_text(model) << "\n";
  if (!out) raise(ErrorKind::Io, "write failed for " + path.string());
}

std::shared_ptr<TableModel> model_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorKind::Schema, std::string("malformed model JSON: ") + e.what());
  }
  if (doc.value("format", "") != "modeljoin-model") {
    raise(ErrorKind::Schema, "not a model file");
  }
  if (doc.value("version", 0) != kFormatVersion) {
    raise(ErrorKind::Schema, "unsupported model format version");
  }
  const json& manifest = doc.at("manifest");
  const TableMeta meta = meta_from_json(manifest);
  const std::string kind = manifest.at("kind").get<std::string>();

  if (kind == "exact") {
    std::shared_ptr<ExactNestedIndex> exact = ModelCodec::exact_from(meta, doc.at("payload"));
    if (manifest.contains("perturb")) {
      return perturb_exact(exact, manifest["perturb"].at("epsilon").get<double>(),
                           manifest["perturb"].at("seed").get<std::uint64_t>());
    }
    return exact;
  }
  if (kind == "learned") {
    const json& payload = doc.at("payload");
    const bool exact_heads = payload.at("exact_heads").get<bool>();
    LearnedConfig cfg = learned_config_from_json(manifest.at("build"));
    EmbeddingTable emb;
    ClusterMap clusters;
    std::vector<CDGNetwork> nets;
    std::map<Token, FreqMap> pairs;
    if (exact_heads) {
      pairs = nested_from_json(payload.at("exact_pairs"));
    } else {
      emb = embedding_from_json(payload.at("embedding"));
      clusters = clusters_from_json(payload.at("clusters"));
      nets = networks_from_json(payload.at("networks"));
    }
    return assemble_learned_model(meta, cfg, std::move(emb), std::move(clusters), std::move(nets),
                                  freq_map_from_json(payload.at("first_ja_freqs")),
                                  freq_map_from_json(payload.at("second_ja_freqs")),
                                  cond_store_from_json(payload.at("cond_store")), std::move(pairs),
                                  exact_heads,
                                  manifest.at("distinct_pairs").get<std::int64_t>());
  }
  raise(ErrorKind::Schema, "unknown model kind " + kind);
}

std::shared_ptr<TableModel> load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_json_text(text);
}

std::shared_ptr<TableModel> rebind_model(const std::shared_ptr<TableModel>& model,
                                         const TableMeta& alias_meta) {
  const TableMeta& m = model->meta();
  const bool same_shape = m.attributes == alias_meta.attributes &&
                          m.row_count == alias_meta.row_count &&
                          m.join_attrs.size() == alias_meta.join_attrs.size();
  bool same_jas = same_shape;
  if (same_shape) {
    for (std::size_t i = 0; i < m.join_attrs.size(); ++i) {
      same_jas &= m.join_attrs[i].attr == alias_meta.join_attrs[i].attr &&
                  m.join_attrs[i].position == alias_meta.join_attrs[i].position;
    }
  }
  if (!same_jas) {
    raise(ErrorKind::Resolution, "model built for table " + m.table_id +
                                     " does not match the schema of " + alias_meta.table_id);
  }
  if (m.table_id == alias_meta.table_id) return model;
  return std::make_shared<AliasedModel>(model, alias_meta);
}

}  // namespace modeljoin
