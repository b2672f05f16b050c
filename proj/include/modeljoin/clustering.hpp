#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Core>

#include "modeljoin/embedding.hpp"
#include "modeljoin/types.hpp"

namespace modeljoin {

struct KMeansResult {
  Eigen::MatrixXd centroids;    // k x dim
  std::vector<int> assignment;  // per point
  int iterations = 0;
};

// Lloyd iterations with k-means++ seeding; deterministic under the seed.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int max_iter = 50,
                    double tol = 1e-6);

// Cluster assignments for the second JA's distinct values plus the per-first-
// value mixture weights over final clusters. Temporary clusters group similar
// embeddings; each final cluster then takes a uniform slice of every temporary
// cluster, so members of one final cluster are mutually dissimilar.
struct ClusterMap {
  int cluster_count = 0;                          // C
  std::map<Token, int> temporary;                 // second JA value -> temp cluster
  std::map<Token, int> final_assignment;          // second JA value -> final cluster
  std::vector<std::vector<Token>> members;        // per final cluster, sorted
  std::map<Token, std::map<int, double>> weights; // first JA value -> cluster -> share
};

ClusterMap cluster_dissimilar(const EmbeddingTable& emb, int second_ja_column,
                              const std::map<Token, FreqMap>& pair_counts, int cluster_count,
                              std::uint64_t seed);

}  // namespace modeljoin
