#pragma once

#include <memory>

#include "modeljoin/cdg_network.hpp"
#include "modeljoin/clustering.hpp"
#include "modeljoin/embedding.hpp"
#include "modeljoin/table_model.hpp"

namespace modeljoin {

struct LearnedConfig {
  int clusters = 50;            // C; >= the table's distinct pair count switches to exact heads
  SkipGramConfig embedding;
  CDGConfig network;
  bool fallback_marginal = false;  // unseen conditioning value -> marginal second JA
  std::uint64_t seed = 1;          // master seed; stage seeds derive from it
};

// Skip-gram embeddings + dissimilarity clustering + one generative network per
// cluster, blended by the stored per-cluster shares. JA frequency dictionaries
// and non-JA conditionals are kept as exact maps alongside the networks.
class LearnedTableModel final : public TableModel {
 public:
  bool exact() const override { return false; }
  std::string kind() const override { return "learned"; }

  const FreqMap& first_ja_freqs() const override { return first_freqs_; }
  const FreqMap& second_ja_freqs() const override { return second_freqs_; }
  ProbMap cond_second_given_first(const Token& dv) const override;
  ProbMap cond_nonja(const std::string& attr, const JaObservation& given) const override;
  std::int64_t distinct_pair_count() const override { return distinct_pairs_; }

  bool exact_heads() const { return exact_heads_; }
  const ClusterMap& clusters() const { return cluster_map_; }
  const std::vector<CDGNetwork>& networks() const { return networks_; }
  const EmbeddingTable& embeddings() const { return embedding_; }
  const LearnedConfig& config() const { return config_; }
  const std::map<std::string, std::map<std::string, std::map<std::string, FreqMap>>>& cond_store()
      const {
    return cond_store_;
  }
  const std::map<Token, FreqMap>& exact_pairs() const { return exact_pairs_; }

  friend std::shared_ptr<LearnedTableModel> assemble_learned_model(
      TableMeta meta, LearnedConfig config, EmbeddingTable embedding, ClusterMap clusters,
      std::vector<CDGNetwork> networks, FreqMap first_freqs, FreqMap second_freqs,
      std::map<std::string, std::map<std::string, std::map<std::string, FreqMap>>> cond_store,
      std::map<Token, FreqMap> exact_pairs, bool exact_heads, std::int64_t distinct_pairs);

 private:
  explicit LearnedTableModel(TableMeta meta) : TableModel(std::move(meta)) {}

  LearnedConfig config_;
  EmbeddingTable embedding_;
  ClusterMap cluster_map_;
  std::vector<CDGNetwork> networks_;
  FreqMap first_freqs_;
  FreqMap second_freqs_;
  std::map<std::string, std::map<std::string, std::map<std::string, FreqMap>>> cond_store_;
  std::map<Token, FreqMap> exact_pairs_;  // populated in exact-heads mode
  bool exact_heads_ = false;
  std::int64_t distinct_pairs_ = 0;
  int first_ja_column_ = 0;
};

std::shared_ptr<LearnedTableModel> assemble_learned_model(
    TableMeta meta, LearnedConfig config, EmbeddingTable embedding, ClusterMap clusters,
    std::vector<CDGNetwork> networks, FreqMap first_freqs, FreqMap second_freqs,
    std::map<std::string, std::map<std::string, std::map<std::string, FreqMap>>> cond_store,
    std::map<Token, FreqMap> exact_pairs, bool exact_heads, std::int64_t distinct_pairs);

// Full training pipeline. Requesting at least as many clusters as the table
// has distinct JA pairs materializes exact per-pair heads instead of networks,
// which makes the model's conditional identical to the exact backend's.
std::shared_ptr<LearnedTableModel> train_learned_model(const TableData& data,
                                                       const TableMeta& meta,
                                                       const LearnedConfig& config);

}  // namespace modeljoin
