#include "modeljoin/learned_model.hpp"

#include <algorithm>

#include "modeljoin/errors.hpp"
#include "modeljoin/logging.hpp"
#include "modeljoin/rng.hpp"

namespace modeljoin {

ProbMap LearnedTableModel::cond_second_given_first(const Token& dv) const {
  if (exact_heads_) {
    auto it = exact_pairs_.find(dv);
    if (it == exact_pairs_.end()) {
      if (config_.fallback_marginal) {
        ProbMap out;
        const double total = static_cast<double>(table_size());
        for (const auto& [sv, f] : second_freqs_) out[sv] = f / total;
        return out;
      }
      raise(ErrorKind::Capability,
            table_id() + ": conditioning value '" + dv + "' was not seen at training time");
    }
    ProbMap out;
    double total = 0.0;
    for (const auto& [sv, c] : it->second) total += c;
    for (const auto& [sv, c] : it->second) out[sv] = c / total;
    return out;
  }

  auto wit = cluster_map_.weights.find(dv);
  if (wit == cluster_map_.weights.end() || !embedding_.has(first_ja_column_, dv)) {
    if (config_.fallback_marginal) {
      ProbMap out;
      const double total = static_cast<double>(table_size());
      for (const auto& [sv, f] : second_freqs_) out[sv] = f / total;
      return out;
    }
    raise(ErrorKind::Capability,
          table_id() + ": conditioning value '" + dv + "' was not seen at training time");
  }

  const Eigen::VectorXd x = embedding_.vec(first_ja_column_, dv);
  ProbMap out;
  for (const auto& [cluster, share] : wit->second) {
    if (share <= 0.0) continue;
    const CDGNetwork& net = networks_[static_cast<std::size_t>(cluster)];
    const Eigen::VectorXd probs = net.forward(x);
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      const double p = share * probs(i);
      if (p > 0.0) out[net.output_values[static_cast<std::size_t>(i)]] += p;
    }
  }
  return out;
}

ProbMap LearnedTableModel::cond_nonja(const std::string& attr, const JaObservation& given) const {
  auto attr_it = cond_store_.find(attr);
  if (attr_it == cond_store_.end()) {
    raise(ErrorKind::Capability, table_id() + ": no conditional stored for attribute " + attr);
  }
  const std::string mask = ja_mask(meta_, given);
  auto mask_it = attr_it->second.find(mask);
  if (mask_it == attr_it->second.end()) {
    raise(ErrorKind::Capability,
          table_id() + ": attribute " + attr + " cannot be conditioned on mask " + mask);
  }
  auto key_it = mask_it->second.find(ja_observation_key(given));
  ProbMap out;
  if (key_it == mask_it->second.end()) return out;
  double total = 0.0;
  for (const auto& [v, c] : key_it->second) total += c;
  for (const auto& [v, c] : key_it->second) out[v] = c / total;
  return out;
}

std::shared_ptr<LearnedTableModel> assemble_learned_model(
    TableMeta meta, LearnedConfig config, EmbeddingTable embedding, ClusterMap clusters,
    std::vector<CDGNetwork> networks, FreqMap first_freqs, FreqMap second_freqs,
    std::map<std::string, std::map<std::string, std::map<std::string, FreqMap>>> cond_store,
    std::map<Token, FreqMap> exact_pairs, bool exact_heads, std::int64_t distinct_pairs) {
  if (!exact_heads && networks.size() != static_cast<std::size_t>(clusters.cluster_count)) {
    raise(ErrorKind::Parameter, "one network per final cluster is required");
  }
  auto model = std::shared_ptr<LearnedTableModel>(new LearnedTableModel(std::move(meta)));
  model->config_ = std::move(config);
  model->embedding_ = std::move(embedding);
  model->cluster_map_ = std::move(clusters);
  model->networks_ = std::move(networks);
  model->first_freqs_ = std::move(first_freqs);
  model->second_freqs_ = std::move(second_freqs);
  model->cond_store_ = std::move(cond_store);
  model->exact_pairs_ = std::move(exact_pairs);
  model->exact_heads_ = exact_heads;
  model->distinct_pairs_ = distinct_pairs;

  // Column position of the first JA inside the attribute list (tags use it).
  const std::string* first = model->meta_.ja_attr(JaPosition::First);
  for (std::size_t i = 0; i < model->meta_.attributes.size(); ++i) {
    if (first && model->meta_.attributes[i] == *first) {
      model->first_ja_column_ = static_cast<int>(i);
    }
  }
  return model;
}

std::shared_ptr<LearnedTableModel> train_learned_model(const TableData& data,
                                                       const TableMeta& meta,
                                                       const LearnedConfig& config) {
  if (meta.join_attrs.size() != 2) {
    raise(ErrorKind::Parameter,
          meta.table_id + ": the learned backend needs two join attributes; use the exact "
                          "backend for single-JA tables");
  }
  // The exact index supplies frequency dictionaries, pair counts and non-JA
  // conditionals; the learned part replaces only the (second | first) model.
  auto exact = build_exact(data, meta);
  TableMeta sized_meta = exact->meta();

  const std::int64_t ndp = exact->distinct_pair_count();
  const bool exact_heads = static_cast<std::int64_t>(config.clusters) >= ndp;
  if (exact_heads) {
    log_info(meta.table_id + ": cluster count covers all " + std::to_string(ndp) +
             " distinct pairs; materializing exact per-pair heads");
    return assemble_learned_model(sized_meta, config, EmbeddingTable{}, ClusterMap{}, {},
                                  exact->first_ja_freqs(), exact->second_ja_freqs(),
                                  exact->cond_store(), exact->pair_counts(), true, ndp);
  }

  const std::string* first = meta.ja_attr(JaPosition::First);
  const std::string* second = meta.ja_attr(JaPosition::Second);
  int first_column = 0;
  int second_column = 0;
  for (std::size_t i = 0; i < meta.attributes.size(); ++i) {
    if (meta.attributes[i] == *second) second_column = static_cast<int>(i);
    if (meta.attributes[i] == *first) first_column = static_cast<int>(i);
  }

  LearnedConfig cfg = config;
  cfg.embedding.seed = derive_seed(config.seed, 1);
  cfg.network.seed = derive_seed(config.seed, 3);

  EmbeddingTable emb = train_embeddings(data.rows, sized_meta, cfg.embedding);
  ClusterMap clusters = cluster_dissimilar(emb, second_column, exact->pair_counts(),
                                           config.clusters, derive_seed(config.seed, 2));
  std::vector<CDGNetwork> nets =
      train_cdg(exact->pair_counts(), emb, first_column, clusters, cfg.network);

  return assemble_learned_model(sized_meta, cfg, std::move(emb), std::move(clusters),
                                std::move(nets), exact->first_ja_freqs(),
                                exact->second_ja_freqs(), exact->cond_store(), {}, false, ndp);
}

}  // namespace modeljoin
