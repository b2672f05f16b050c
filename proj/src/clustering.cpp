#include "modeljoin/clustering.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "modeljoin/errors.hpp"
#include "modeljoin/rng.hpp"

namespace modeljoin {

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int max_iter,
                    double tol) {
  const int n = static_cast<int>(points.rows());
  if (k < 1 || k > n) raise(ErrorKind::Parameter, "kmeans cluster count out of range");

  SplitMix64 gen(derive_seed(seed, 0x4b6d));
  KMeansResult res;
  res.centroids.resize(k, points.cols());

  // k-means++ seeding.
  std::vector<double> dist2(static_cast<std::size_t>(n), std::numeric_limits<double>::max());
  int first = static_cast<int>(gen.next_below(static_cast<std::uint64_t>(n)));
  res.centroids.row(0) = points.row(first);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = (points.row(i) - res.centroids.row(c - 1)).squaredNorm();
      dist2[static_cast<std::size_t>(i)] = std::min(dist2[static_cast<std::size_t>(i)], d);
      total += dist2[static_cast<std::size_t>(i)];
    }
    int chosen = n - 1;
    if (total > 0.0) {
      const double target = gen.next_double() * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += dist2[static_cast<std::size_t>(i)];
        if (target < acc) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<int>(gen.next_below(static_cast<std::uint64_t>(n)));
    }
    res.centroids.row(c) = points.row(chosen);
  }

  res.assignment.assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    res.iterations = iter + 1;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      int arg = 0;
      for (int c = 0; c < k; ++c) {
        const double d = (points.row(i) - res.centroids.row(c)).squaredNorm();
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      res.assignment[static_cast<std::size_t>(i)] = arg;
    }

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      sums.row(res.assignment[static_cast<std::size_t>(i)]) += points.row(i);
      ++sizes[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(i)])];
    }
    double moved = 0.0;
    for (int c = 0; c < k; ++c) {
      Eigen::RowVectorXd next;
      if (sizes[static_cast<std::size_t>(c)] > 0) {
        next = sums.row(c) / sizes[static_cast<std::size_t>(c)];
      } else {
        // Reseed an empty centroid at the point farthest from its centroid.
        double far_d = -1.0;
        int far_i = 0;
        for (int i = 0; i < n; ++i) {
          const double d =
              (points.row(i) - res.centroids.row(res.assignment[static_cast<std::size_t>(i)]))
                  .squaredNorm();
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        next = points.row(far_i);
      }
      moved = std::max(moved, (next - res.centroids.row(c)).norm());
      res.centroids.row(c) = next;
    }
    if (moved < tol) break;
  }

  // Final assignment against the converged centroids.
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::max();
    int arg = 0;
    for (int c = 0; c < k; ++c) {
      const double d = (points.row(i) - res.centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    res.assignment[static_cast<std::size_t>(i)] = arg;
  }
  return res;
}

ClusterMap cluster_dissimilar(const EmbeddingTable& emb, int second_ja_column,
                              const std::map<Token, FreqMap>& pair_counts, int cluster_count,
                              std::uint64_t seed) {
  std::set<Token> value_set;
  for (const auto& [dv, inner] : pair_counts) {
    for (const auto& [sv, c] : inner) value_set.insert(sv);
  }
  std::vector<Token> values(value_set.begin(), value_set.end());
  if (cluster_count < 1) raise(ErrorKind::Parameter, "cluster count must be >= 1");
  if (static_cast<std::size_t>(cluster_count) > values.size()) {
    raise(ErrorKind::Parameter, "cluster count " + std::to_string(cluster_count) +
                                    " exceeds the " + std::to_string(values.size()) +
                                    " distinct second-JA values");
  }

  Eigen::MatrixXd points(static_cast<Eigen::Index>(values.size()), emb.dim);
  for (std::size_t i = 0; i < values.size(); ++i) {
    points.row(static_cast<Eigen::Index>(i)) = emb.vec(second_ja_column, values[i]).transpose();
  }

  const KMeansResult km = kmeans(points, cluster_count, derive_seed(seed, 0x7e17));

  ClusterMap map;
  map.cluster_count = cluster_count;
  map.members.resize(static_cast<std::size_t>(cluster_count));
  for (std::size_t i = 0; i < values.size(); ++i) {
    map.temporary[values[i]] = km.assignment[i];
  }

  // Deal each temporary cluster round-robin into the final clusters; the
  // deal offset rotates per temporary cluster so sizes stay balanced.
  for (int t = 0; t < cluster_count; ++t) {
    std::vector<Token> bucket;
    for (const auto& v : values) {
      if (map.temporary.at(v) == t) bucket.push_back(v);
    }
    SplitMix64 gen(derive_seed(seed, 0x900 + static_cast<std::uint64_t>(t)));
    deterministic_shuffle(bucket, gen);
    const int offset =
        bucket.empty() ? 0
                       : static_cast<int>(gen.next_below(static_cast<std::uint64_t>(cluster_count)));
    for (std::size_t j = 0; j < bucket.size(); ++j) {
      const int final_cluster = static_cast<int>((offset + j) % static_cast<std::size_t>(cluster_count));
      map.final_assignment[bucket[j]] = final_cluster;
      map.members[static_cast<std::size_t>(final_cluster)].push_back(bucket[j]);
    }
  }
  for (auto& m : map.members) std::sort(m.begin(), m.end());

  // Mixture weights: the share of each first value's pairs landing per cluster.
  for (const auto& [dv, inner] : pair_counts) {
    double total = 0.0;
    for (const auto& [sv, c] : inner) total += c;
    auto& w = map.weights[dv];
    for (const auto& [sv, c] : inner) w[map.final_assignment.at(sv)] += c / total;
  }
  return map;
}

}  // namespace modeljoin
