#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "modeljoin/clustering.hpp"
#include "modeljoin/types.hpp"

namespace modeljoin {

struct CDGConfig {
  int hidden = 200;
  int hidden_layers = 5;
  int epochs = 3;
  double lr = 0.0005;  // adaptive-moment optimizer step size
  int batch = 32;
  std::uint64_t seed = 1;
};

// Feed-forward classifier used generatively: tanh hidden layers, softmax over
// one cluster's second-JA values. Instead of argmax, callers sample from the
// output probabilities.
struct CDGNetwork {
  std::vector<Eigen::MatrixXd> weights;  // hidden_layers + 1 matrices
  std::vector<Eigen::VectorXd> biases;
  std::vector<Token> output_values;      // sorted
  bool uniform_head = false;             // no training pairs: emit uniform

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x_cols) const;  // dim x batch
  std::size_t parameter_count() const;
};

// (input row index, output class) pairs; inputs are one embedding per row.
using CdgExamples = std::vector<std::pair<int, int>>;

struct CDGTrainStats {
  std::vector<double> epoch_nll;  // mean NLL over all examples after each epoch
};

CDGNetwork make_cdg_network(int input_dim, const std::vector<Token>& output_values,
                            const CDGConfig& cfg);

CDGNetwork train_cdg_network(const Eigen::MatrixXd& inputs, const CdgExamples& examples,
                             const std::vector<Token>& output_values, const CDGConfig& cfg,
                             CDGTrainStats* stats = nullptr);

double cdg_mean_nll(const CDGNetwork& net, const Eigen::MatrixXd& inputs,
                    const CdgExamples& examples);

// Analytic NLL gradients for a single example; checked against finite
// differences of the forward pass in the tests.
void cdg_gradients(const CDGNetwork& net, const Eigen::VectorXd& x, int target,
                   std::vector<Eigen::MatrixXd>& grad_w, std::vector<Eigen::VectorXd>& grad_b);

// One network per final cluster, trained only on pairs whose second value
// lies in that cluster.
std::vector<CDGNetwork> train_cdg(const std::map<Token, FreqMap>& pair_counts,
                                  const EmbeddingTable& emb, int first_ja_column,
                                  const ClusterMap& clusters, const CDGConfig& cfg);

}  // namespace modeljoin
