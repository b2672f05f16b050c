#include "modeljoin/cdg_network.hpp"

#include <algorithm>
#include <cmath>

#include "modeljoin/errors.hpp"
#include "modeljoin/logging.hpp"
#include "modeljoin/rng.hpp"

namespace modeljoin {

namespace {

Eigen::MatrixXd softmax_cols(Eigen::MatrixXd logits) {
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double peak = logits.col(c).maxCoeff();
    logits.col(c) = (logits.col(c).array() - peak).exp();
    logits.col(c) /= logits.col(c).sum();
  }
  return logits;
}

}  // namespace

Eigen::VectorXd CDGNetwork::forward(const Eigen::VectorXd& x) const {
  return forward_batch(x).col(0);
}

Eigen::MatrixXd CDGNetwork::forward_batch(const Eigen::MatrixXd& x_cols) const {
  if (uniform_head) {
    const double p = output_values.empty() ? 0.0 : 1.0 / static_cast<double>(output_values.size());
    return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(output_values.size()),
                                     x_cols.cols(), p);
  }
  Eigen::MatrixXd h = x_cols;
  for (std::size_t l = 0; l + 1 < weights.size(); ++l) {
    h = ((weights[l] * h).colwise() + biases[l]).array().tanh().matrix();
  }
  return softmax_cols((weights.back() * h).colwise() + biases.back());
}

std::size_t CDGNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

CDGNetwork make_cdg_network(int input_dim, const std::vector<Token>& output_values,
                            const CDGConfig& cfg) {
  CDGNetwork net;
  net.output_values = output_values;

  std::vector<int> dims;
  dims.push_back(input_dim);
  for (int l = 0; l < cfg.hidden_layers; ++l) dims.push_back(cfg.hidden);
  dims.push_back(static_cast<int>(output_values.size()));

  SplitMix64 gen(derive_seed(cfg.seed, 0xcd6));
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i) {
      for (int j = 0; j < fan_in; ++j) w(i, j) = (gen.next_double() * 2.0 - 1.0) * limit;
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

double cdg_mean_nll(const CDGNetwork& net, const Eigen::MatrixXd& inputs,
                    const CdgExamples& examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [row, target] : examples) {
    const Eigen::VectorXd probs = net.forward(inputs.row(row).transpose());
    total += -std::log(std::max(probs(target), 1e-300));
  }
  return total / static_cast<double>(examples.size());
}

void cdg_gradients(const CDGNetwork& net, const Eigen::VectorXd& x, int target,
                   std::vector<Eigen::MatrixXd>& grad_w, std::vector<Eigen::VectorXd>& grad_b) {
  const std::size_t layers = net.weights.size();
  std::vector<Eigen::VectorXd> activations;  // post-activation per layer input
  activations.push_back(x);
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    activations.push_back(
        ((net.weights[l] * activations.back()) + net.biases[l]).array().tanh().matrix());
  }
  Eigen::VectorXd logits = net.weights.back() * activations.back() + net.biases.back();
  const double peak = logits.maxCoeff();
  Eigen::VectorXd probs = (logits.array() - peak).exp();
  probs /= probs.sum();

  grad_w.resize(layers);
  grad_b.resize(layers);

  Eigen::VectorXd delta = probs;  // d NLL / d logits = softmax - onehot
  delta(target) -= 1.0;
  for (std::size_t l = layers; l-- > 0;) {
    grad_w[l] = delta * activations[l].transpose();
    grad_b[l] = delta;
    if (l > 0) {
      const Eigen::VectorXd upstream = net.weights[l].transpose() * delta;
      delta = (upstream.array() * (1.0 - activations[l].array().square())).matrix();
    }
  }
}

CDGNetwork train_cdg_network(const Eigen::MatrixXd& inputs, const CdgExamples& examples,
                             const std::vector<Token>& output_values, const CDGConfig& cfg,
                             CDGTrainStats* stats) {
  CDGNetwork net = make_cdg_network(static_cast<int>(inputs.cols()), output_values, cfg);
  if (examples.empty()) {
    net.uniform_head = true;
    return net;
  }

  // Adam state.
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  for (const auto& w : net.weights) {
    mw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    vw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : net.biases) {
    mb.push_back(Eigen::VectorXd::Zero(b.size()));
    vb.push_back(Eigen::VectorXd::Zero(b.size()));
  }

  const std::size_t layers = net.weights.size();
  CdgExamples order = examples;
  double t = 0.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    SplitMix64 shuffle_stream(derive_seed(cfg.seed, 0xa100 + static_cast<std::uint64_t>(epoch)));
    deterministic_shuffle(order, shuffle_stream);

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      const Eigen::Index bsz = static_cast<Eigen::Index>(end - start);

      Eigen::MatrixXd x(inputs.cols(), bsz);
      for (Eigen::Index i = 0; i < bsz; ++i) {
        x.col(i) = inputs.row(order[start + static_cast<std::size_t>(i)].first).transpose();
      }

      // Forward with cached activations.
      std::vector<Eigen::MatrixXd> acts;
      acts.push_back(x);
      for (std::size_t l = 0; l + 1 < layers; ++l) {
        acts.push_back(
            (((net.weights[l] * acts.back()).colwise() + net.biases[l]).array().tanh()).matrix());
      }
      Eigen::MatrixXd probs =
          softmax_cols((net.weights.back() * acts.back()).colwise() + net.biases.back());

      Eigen::MatrixXd delta = probs;
      for (Eigen::Index i = 0; i < bsz; ++i) {
        delta(order[start + static_cast<std::size_t>(i)].second, i) -= 1.0;
      }
      delta /= static_cast<double>(bsz);

      t += 1.0;
      const double corr1 = 1.0 - std::pow(beta1, t);
      const double corr2 = 1.0 - std::pow(beta2, t);
      for (std::size_t l = layers; l-- > 0;) {
        const Eigen::MatrixXd gw = delta * acts[l].transpose();
        const Eigen::VectorXd gb = delta.rowwise().sum();
        if (l > 0) {
          const Eigen::MatrixXd upstream = net.weights[l].transpose() * delta;
          delta = (upstream.array() * (1.0 - acts[l].array().square())).matrix();
        }
        mw[l] = beta1 * mw[l] + (1.0 - beta1) * gw;
        vw[l] = beta2 * vw[l] + (1.0 - beta2) * gw.array().square().matrix();
        mb[l] = beta1 * mb[l] + (1.0 - beta1) * gb;
        vb[l] = beta2 * vb[l] + (1.0 - beta2) * gb.array().square().matrix();
        net.weights[l] -=
            (cfg.lr * (mw[l] / corr1).array() / ((vw[l] / corr2).array().sqrt() + eps)).matrix();
        net.biases[l] -=
            (cfg.lr * (mb[l] / corr1).array() / ((vb[l] / corr2).array().sqrt() + eps)).matrix();
      }
    }
    if (stats) stats->epoch_nll.push_back(cdg_mean_nll(net, inputs, examples));
  }
  return net;
}

std::vector<CDGNetwork> train_cdg(const std::map<Token, FreqMap>& pair_counts,
                                  const EmbeddingTable& emb, int first_ja_column,
                                  const ClusterMap& clusters, const CDGConfig& cfg) {
  // Distinct conditioning values, with one embedding row each.
  std::vector<Token> dvs;
  for (const auto& [dv, inner] : pair_counts) dvs.push_back(dv);
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(dvs.size()), emb.dim);
  std::map<Token, int> dv_row;
  for (std::size_t i = 0; i < dvs.size(); ++i) {
    inputs.row(static_cast<Eigen::Index>(i)) = emb.vec(first_ja_column, dvs[i]).transpose();
    dv_row[dvs[i]] = static_cast<int>(i);
  }

  std::vector<CDGNetwork> nets;
  for (int c = 0; c < clusters.cluster_count; ++c) {
    const std::vector<Token>& values = clusters.members[static_cast<std::size_t>(c)];
    std::map<Token, int> value_idx;
    for (std::size_t i = 0; i < values.size(); ++i) value_idx[values[i]] = static_cast<int>(i);

    CdgExamples examples;
    for (const auto& [dv, inner] : pair_counts) {
      for (const auto& [sv, count] : inner) {
        auto it = value_idx.find(sv);
        if (it == value_idx.end()) continue;
        const int reps = static_cast<int>(std::llround(count));
        for (int rep = 0; rep < reps; ++rep) examples.push_back({dv_row.at(dv), it->second});
      }
    }

    CDGConfig cluster_cfg = cfg;
    cluster_cfg.seed = derive_seed(cfg.seed, 0xc100 + static_cast<std::uint64_t>(c));
    CDGNetwork net = train_cdg_network(inputs, examples, values, cluster_cfg);
    if (net.uniform_head && !values.empty()) {
      log_warn("cluster " + std::to_string(c) + " has no training pairs; using a uniform head");
    }
    nets.push_back(std::move(net));
  }
  return nets;
}

}  // namespace modeljoin
