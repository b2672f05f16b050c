#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "modeljoin/catalog.hpp"
#include "modeljoin/types.hpp"

namespace modeljoin {

struct SkipGramConfig {
  int dim = 64;            // N
  int context = 0;         // window size; 0 = every other value in the row
  int negatives = 5;       // k
  double noise_exponent = 0.75;
  int epochs = 5;
  double lr = 0.025;       // linearly decayed to lr * 0.05
  std::uint64_t seed = 1;
};

// Input and output vectors per column-tagged distinct value. Tokens carry
// their column index because position matters here: the same string in the
// first and second JA are different words.
struct EmbeddingTable {
  int dim = 0;
  std::vector<std::string> tokens;  // sorted tags
  std::map<std::string, int> index;
  Eigen::MatrixXd input;   // V x dim
  Eigen::MatrixXd output;  // V x dim

  static std::string tag(int column, const Token& value);
  bool has(int column, const Token& value) const;
  Eigen::VectorXd vec(int column, const Token& value) const;  // input vector
};

EmbeddingTable train_embeddings(const std::vector<Row>& rows, const TableMeta& meta,
                                const SkipGramConfig& cfg);

// Negative-sampling objective for one (center, context, negatives) event:
// log sigmoid(out . in) + sum_i log sigmoid(-neg_i . in). Exposed so tests can
// difference it against the analytic gradients below.
double sg_pair_objective(const Eigen::VectorXd& center_in, const Eigen::VectorXd& context_out,
                         const std::vector<Eigen::VectorXd>& negatives_out);

struct SgPairGradients {
  Eigen::VectorXd center_in;
  Eigen::VectorXd context_out;
  std::vector<Eigen::VectorXd> negatives_out;
};

SgPairGradients sg_pair_gradients(const Eigen::VectorXd& center_in,
                                  const Eigen::VectorXd& context_out,
                                  const std::vector<Eigen::VectorXd>& negatives_out);

}  // namespace modeljoin
