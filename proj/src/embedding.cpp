#include "modeljoin/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "modeljoin/errors.hpp"
#include "modeljoin/rng.hpp"

namespace modeljoin {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string EmbeddingTable::tag(int column, const Token& value) {
  return std::to_string(column) + ":" + value;
}

bool EmbeddingTable::has(int column, const Token& value) const {
  return index.count(tag(column, value)) > 0;
}

Eigen::VectorXd EmbeddingTable::vec(int column, const Token& value) const {
  auto it = index.find(tag(column, value));
  if (it == index.end()) {
    raise(ErrorKind::Capability, "no embedding for value '" + value + "' in column " +
                                     std::to_string(column));
  }
  return input.row(it->second).transpose();
}

double sg_pair_objective(const Eigen::VectorXd& center_in, const Eigen::VectorXd& context_out,
                         const std::vector<Eigen::VectorXd>& negatives_out) {
  double obj = std::log(sigmoid(context_out.dot(center_in)));
  for (const auto& neg : negatives_out) obj += std::log(sigmoid(-neg.dot(center_in)));
  return obj;
}

SgPairGradients sg_pair_gradients(const Eigen::VectorXd& center_in,
                                  const Eigen::VectorXd& context_out,
                                  const std::vector<Eigen::VectorXd>& negatives_out) {
  SgPairGradients g;
  const double pos = sigmoid(context_out.dot(center_in));
  g.center_in = (1.0 - pos) * context_out;
  g.context_out = (1.0 - pos) * center_in;
  for (const auto& neg : negatives_out) {
    const double s = sigmoid(neg.dot(center_in));
    g.center_in -= s * neg;
    g.negatives_out.push_back(-s * center_in);
  }
  return g;
}

EmbeddingTable train_embeddings(const std::vector<Row>& rows, const TableMeta& meta,
                                const SkipGramConfig& cfg) {
  if (rows.empty()) raise(ErrorKind::Parameter, "cannot train embeddings on an empty table");
  if (cfg.dim < 1 || cfg.negatives < 1) {
    raise(ErrorKind::Parameter, "embedding dimension and negative count must be >= 1");
  }

  const int cols = static_cast<int>(meta.attributes.size());

  EmbeddingTable emb;
  emb.dim = cfg.dim;
  std::map<std::string, double> counts;
  for (const Row& row : rows) {
    for (int c = 0; c < cols; ++c) counts[EmbeddingTable::tag(c, row[static_cast<std::size_t>(c)])] += 1.0;
  }
  for (const auto& [tok, cnt] : counts) {
    emb.index[tok] = static_cast<int>(emb.tokens.size());
    emb.tokens.push_back(tok);
  }
  const int vocab = static_cast<int>(emb.tokens.size());

  SplitMix64 init_stream(derive_seed(cfg.seed, 0xe3b));
  emb.input.resize(vocab, cfg.dim);
  emb.output = Eigen::MatrixXd::Zero(vocab, cfg.dim);
  const double span = 0.5 / static_cast<double>(cfg.dim);
  for (int v = 0; v < vocab; ++v) {
    for (int d = 0; d < cfg.dim; ++d) {
      emb.input(v, d) = (init_stream.next_double() * 2.0 - 1.0) * span;
    }
  }

  // Noise distribution: unigram counts raised to the configured exponent.
  std::vector<double> noise_cdf(static_cast<std::size_t>(vocab));
  {
    double acc = 0.0;
    for (int v = 0; v < vocab; ++v) {
      acc += std::pow(counts.at(emb.tokens[static_cast<std::size_t>(v)]), cfg.noise_exponent);
      noise_cdf[static_cast<std::size_t>(v)] = acc;
    }
  }
  auto draw_noise = [&](SplitMix64& gen, int avoid) {
    const double total = noise_cdf.back();
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double target = gen.next_double() * total;
      auto it = std::upper_bound(noise_cdf.begin(), noise_cdf.end(), target);
      int v = static_cast<int>(it - noise_cdf.begin());
      if (v >= vocab) v = vocab - 1;
      if (v != avoid || vocab == 1) return v;
    }
    return avoid == 0 ? std::min(1, vocab - 1) : 0;
  };

  // Row ids per token, precomputed once; the training pass walks token ids.
  std::vector<std::vector<int>> row_tokens(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    row_tokens[r].resize(static_cast<std::size_t>(cols));
    for (int c = 0; c < cols; ++c) {
      row_tokens[r][static_cast<std::size_t>(c)] =
          emb.index.at(EmbeddingTable::tag(c, rows[r][static_cast<std::size_t>(c)]));
    }
  }

  std::uint64_t pairs_per_row = 0;
  for (int p = 0; p < cols; ++p) {
    for (int q = 0; q < cols; ++q) {
      if (p == q) continue;
      if (cfg.context > 0 && std::abs(p - q) > cfg.context) continue;
      ++pairs_per_row;
    }
  }
  const double total_steps =
      std::max<double>(1.0, static_cast<double>(cfg.epochs) *
                                static_cast<double>(rows.size()) *
                                static_cast<double>(pairs_per_row));

  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  SplitMix64 train_stream(derive_seed(cfg.seed, 0x17a1));
  std::vector<int> negatives(static_cast<std::size_t>(cfg.negatives));
  double step = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    SplitMix64 shuffle_stream(derive_seed(cfg.seed, 0x5a00 + static_cast<std::uint64_t>(epoch)));
    deterministic_shuffle(order, shuffle_stream);
    for (std::size_t r : order) {
      const auto& toks = row_tokens[r];
      for (int p = 0; p < cols; ++p) {
        for (int q = 0; q < cols; ++q) {
          if (p == q) continue;
          if (cfg.context > 0 && std::abs(p - q) > cfg.context) continue;
          const int center = toks[static_cast<std::size_t>(p)];
          const int context = toks[static_cast<std::size_t>(q)];
          const double lr =
              cfg.lr * std::max(0.05, 1.0 - step / total_steps);
          step += 1.0;

          for (int k = 0; k < cfg.negatives; ++k) {
            negatives[static_cast<std::size_t>(k)] = draw_noise(train_stream, context);
          }

          // Gradient ascent on the pair objective, updating rows in place.
          Eigen::VectorXd in = emb.input.row(center).transpose();
          const double pos = sigmoid(emb.output.row(context).dot(in));
          Eigen::VectorXd in_grad = (1.0 - pos) * emb.output.row(context).transpose();
          emb.output.row(context) += lr * (1.0 - pos) * in.transpose();
          for (int neg : negatives) {
            const double s = sigmoid(emb.output.row(neg).dot(in));
            in_grad -= s * emb.output.row(neg).transpose();
            emb.output.row(neg) -= lr * s * in.transpose();
          }
          emb.input.row(center) += lr * in_grad.transpose();
        }
      }
    }
  }
  return emb;
}

}  // namespace modeljoin
