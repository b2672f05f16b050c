#include "modeljoin/sampler.hpp"

#include <algorithm>
#include <list>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "modeljoin/errors.hpp"
#include "modeljoin/logging.hpp"
#include "modeljoin/rng.hpp"
#include "modeljoin/table_model.hpp"

namespace modeljoin {

DiscreteDistribution DiscreteDistribution::from_weights(const std::map<Token, double>& weights) {
  DiscreteDistribution dist;
  double total = 0.0;
  for (const auto& [v, w] : weights) {
    if (w <= 0.0) continue;
    dist.values.push_back(v);
    dist.probs.push_back(w);
    total += w;
  }
  double acc = 0.0;
  for (double& p : dist.probs) {
    p /= total;
    acc += p;
    dist.cdf.push_back(acc);
  }
  if (!dist.cdf.empty()) dist.cdf.back() = 1.0;
  return dist;
}

const Token& DiscreteDistribution::draw(double u) const {
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t idx = static_cast<std::size_t>(it - cdf.begin());
  if (idx >= values.size()) idx = values.size() - 1;
  return values[idx];
}

double DiscreteDistribution::prob_of(const Token& value) const {
  auto it = std::lower_bound(values.begin(), values.end(), value);
  if (it == values.end() || *it != value) return 0.0;
  return probs[static_cast<std::size_t>(it - values.begin())];
}

DiscreteDistribution make_root_step(const FreqMap& root_table) {
  return DiscreteDistribution::from_weights(root_table);
}

DiscreteDistribution conditional_step(const SkeletonGraph& g, std::size_t level,
                                      const Token& prev_value, const InferenceResult& res) {
  if (level == 0 || level >= g.node_count()) {
    raise(ErrorKind::Internal, "conditional_step level out of range");
  }
  const TableModel& edge = *g.edges[level - 1].model;
  const FreqMap& f_level = res.levels[level].freqs;
  const FreqMap& f_second = edge.second_ja_freqs();

  const ProbMap cond = edge.cond_second_given_first(prev_value);
  std::map<Token, double> weights;
  for (const auto& [dv, p] : cond) {
    auto fit = f_level.find(dv);
    if (fit == f_level.end()) continue;
    auto sit = f_second.find(dv);
    if (sit == f_second.end() || sit->second <= 0.0) {
      raise(ErrorKind::ModelInconsistency,
            edge.table_id() + ": join frequency present for '" + dv + "' without table support");
    }
    const double w = p * (fit->second / sit->second);
    if (w > 0.0) weights[dv] = w;
  }
  DiscreteDistribution dist = DiscreteDistribution::from_weights(weights);
  if (dist.empty()) {
    // Unreachable with models satisfying the support contracts: the parent was
    // sampled from a frequency table whose entry is exactly this sum.
    raise(ErrorKind::ModelInconsistency,
          "generator inconsistency at node " + g.nodes[level].label + " given '" + prev_value +
              "'");
  }
  return dist;
}

namespace {

// Conditional-step memo: distributions repeat heavily across rows. Concurrent
// reads and idempotent concurrent inserts are both fine; entries are immutable.
class StepCache {
 public:
  explicit StepCache(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

  std::shared_ptr<const DiscreteDistribution> get(std::size_t level, const Token& prev) {
    const std::string key = make_key(level, prev);
    std::lock_guard<std::mutex> lock(mu_);
    auto it = index_.find(key);
    if (it == index_.end()) return nullptr;
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
  }

  void put(std::size_t level, const Token& prev,
           std::shared_ptr<const DiscreteDistribution> dist) {
    const std::string key = make_key(level, prev);
    std::lock_guard<std::mutex> lock(mu_);
    if (index_.count(key)) return;
    order_.emplace_front(key, std::move(dist));
    index_[key] = order_.begin();
    if (index_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
  }

 private:
  static std::string make_key(std::size_t level, const Token& prev) {
    return std::to_string(level) + "\x1f" + prev;
  }

  std::size_t capacity_;
  std::mutex mu_;
  std::list<std::pair<std::string, std::shared_ptr<const DiscreteDistribution>>> order_;
  std::unordered_map<std::string,
                     decltype(order_)::iterator>
      index_;
};

void fill_rows(const SkeletonGraph& g, const InferenceResult& res,
               const DiscreteDistribution& root, StepCache& cache, std::uint64_t seed,
               std::uint64_t first_index, std::vector<Row>& rows, std::size_t begin,
               std::size_t end) {
  const std::size_t m = g.node_count();
  for (std::size_t r = begin; r < end; ++r) {
    SplitMix64 stream(derive_seed(seed, first_index + r));
    Row row(m);
    row[0] = root.draw(stream.next_double());
    for (std::size_t level = 1; level < m; ++level) {
      auto dist = cache.get(level, row[level - 1]);
      if (!dist) {
        dist = std::make_shared<const DiscreteDistribution>(
            conditional_step(g, level, row[level - 1], res));
        cache.put(level, row[level - 1], dist);
      }
      row[level] = dist->draw(stream.next_double());
    }
    rows[r] = std::move(row);
  }
}

SampleMatrix generate_block(const SkeletonGraph& g, const InferenceResult& res,
                            std::uint64_t first_index, std::size_t n, const SamplerOptions& opt,
                            StepCache& cache) {
  SampleMatrix mat;
  mat.columns = g.column_labels();
  mat.seed = opt.seed;
  mat.draws_consumed = g.node_count();
  mat.rows.resize(n);
  mat.candidate_index.resize(n);
  for (std::size_t r = 0; r < n; ++r) mat.candidate_index[r] = first_index + r;
  if (n == 0) return mat;

  const DiscreteDistribution root = make_root_step(res.root());

  const int workers = std::max(1, opt.workers);
  if (workers == 1 || n < 2048) {
    fill_rows(g, res, root, cache, opt.seed, first_index, mat.rows, 0, n);
  } else {
    std::vector<std::thread> pool;
    std::mutex error_mu;
    std::exception_ptr first_error;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(n, w * chunk);
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back([&, begin, end] {
        try {
          fill_rows(g, res, root, cache, opt.seed, first_index, mat.rows, begin, end);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  return mat;
}

}  // namespace

std::vector<Token> sample_root(const FreqMap& root_table, std::size_t n, std::uint64_t seed) {
  if (root_table.empty() && n > 0) {
    raise(ErrorKind::EmptyJoin, "cannot sample the root of an empty join");
  }
  const DiscreteDistribution root = make_root_step(root_table);
  std::vector<Token> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    SplitMix64 stream(derive_seed(seed, r));
    out.push_back(root.draw(stream.next_double()));
  }
  return out;
}

SampleMatrix generate_skeleton(const SkeletonGraph& g, const InferenceResult& res, std::size_t n,
                               const SamplerOptions& opt) {
  if (res.empty_join() && n > 0) {
    raise(ErrorKind::EmptyJoin, "the join result is empty; nothing to sample");
  }
  StepCache cache(opt.memo_capacity);
  return generate_block(g, res, 0, n, opt, cache);
}

SampleMatrix reject_cyclic(const SampleMatrix& candidates,
                           const std::vector<EliminatedEdge>& eliminated, std::size_t target_n,
                           std::uint64_t seed) {
  if (eliminated.empty()) return candidates;

  struct EdgeCheck {
    const EliminatedEdge* edge;
    double max_freq;
    std::map<Token, ProbMap> cond_cache;
  };
  std::vector<EdgeCheck> checks;
  for (const auto& e : eliminated) {
    const double max_freq = e.model->max_pair_freq();
    if (max_freq <= 0.0) {
      raise(ErrorKind::ModelInconsistency,
            e.table_id + ": eliminated edge with no positive pair frequency");
    }
    checks.push_back(EdgeCheck{&e, max_freq, {}});
  }

  SampleMatrix out;
  out.columns = candidates.columns;
  out.seed = candidates.seed;
  out.draws_consumed = candidates.draws_consumed + 1;

  for (std::size_t r = 0; r < candidates.row_count(); ++r) {
    if (out.row_count() >= target_n) break;
    const Row& row = candidates.rows[r];
    double accept_p = 1.0;
    for (auto& check : checks) {
      const Token& fv = row[static_cast<std::size_t>(check.edge->first_node)];
      const Token& sv = row[static_cast<std::size_t>(check.edge->second_node)];
      auto it = check.cond_cache.find(fv);
      if (it == check.cond_cache.end()) {
        it = check.cond_cache.emplace(fv, check.edge->model->cond_second_given_first(fv)).first;
      }
      auto pit = it->second.find(sv);
      const double pair =
          pit == it->second.end() ? 0.0 : pit->second * check.edge->model->first_ja_freq(fv);
      accept_p *= pair / check.max_freq;
      if (accept_p <= 0.0) break;
    }
    if (accept_p <= 0.0) continue;
    SplitMix64 stream(derive_seed(seed, candidates.candidate_index[r]));
    for (std::size_t skip = 0; skip < candidates.draws_consumed; ++skip) stream.next();
    if (stream.next_double() < accept_p) {
      out.rows.push_back(row);
      out.candidate_index.push_back(candidates.candidate_index[r]);
    }
  }
  return out;
}

void attach_nonjas(SampleMatrix& sample, const std::vector<NonJaAttachment>& attachments,
                   const SamplerOptions& opt) {
  (void)opt;
  if (attachments.empty()) return;

  // Distribution cache per (attachment, observed JA values).
  std::vector<std::map<std::string, DiscreteDistribution>> dist_cache(attachments.size());

  auto distribution_for = [&](std::size_t a, const Row& row) -> const DiscreteDistribution& {
    const NonJaAttachment& att = attachments[a];
    JaObservation given;
    std::string key;
    for (const auto& [attr, node] : att.given) {
      given.push_back({attr, row[static_cast<std::size_t>(node)]});
      key += row[static_cast<std::size_t>(node)];
      key.push_back('\x1f');
    }
    auto it = dist_cache[a].find(key);
    if (it != dist_cache[a].end()) return it->second;

    ProbMap cond = att.model->cond_nonja(att.attr.attr, given);
    if (cond.empty() && given.size() == 2) {
      // Learned conditionals can emit a JA pair the table never held; degrade
      // to conditioning on the first JA alone, which sampling guarantees seen.
      log_debug(att.attr.qualified() + ": unseen JA pair, conditioning on first JA only");
      cond = att.model->cond_nonja(att.attr.attr, {given.front()});
    }
    if (cond.empty()) {
      raise(ErrorKind::Capability, att.attr.qualified() +
                                       ": no conditional available for the observed JA values");
    }
    return dist_cache[a].emplace(key, DiscreteDistribution::from_weights(cond)).first->second;
  };

  for (std::size_t r = 0; r < sample.row_count(); ++r) {
    SplitMix64 stream(derive_seed(sample.seed, sample.candidate_index[r]));
    for (std::size_t skip = 0; skip < sample.draws_consumed; ++skip) stream.next();
    Row& row = sample.rows[r];
    for (std::size_t a = 0; a < attachments.size(); ++a) {
      const DiscreteDistribution& dist = distribution_for(a, row);
      row.push_back(dist.draw(stream.next_double()));
    }
  }
  for (const auto& att : attachments) sample.columns.push_back(att.attr.qualified());
  sample.draws_consumed += attachments.size();
}

SampleMatrix generate_join_sample(const SkeletonBuild& build, const InferenceResult& res,
                                  std::size_t n, const SamplerOptions& opt) {
  if (res.empty_join() && n > 0) {
    raise(ErrorKind::EmptyJoin, "the join result is empty; nothing to sample");
  }

  SampleMatrix out;
  if (build.eliminated.empty()) {
    out = generate_skeleton(build.graph, res, n, opt);
  } else {
    StepCache cache(opt.memo_capacity);
    const std::uint64_t budget =
        opt.reject_budget ? opt.reject_budget
                          : std::max<std::uint64_t>(100000, 200 * static_cast<std::uint64_t>(n));
    const std::size_t chunk = std::max<std::size_t>(1024, n);

    out.columns = build.graph.column_labels();
    out.seed = opt.seed;
    out.draws_consumed = build.graph.node_count() + 1;

    std::uint64_t cursor = 0;
    while (out.row_count() < n) {
      if (cursor >= budget) {
        const double rate =
            cursor == 0 ? 0.0 : static_cast<double>(out.row_count()) / static_cast<double>(cursor);
        raise(ErrorKind::BudgetExceeded,
              "rejection budget of " + std::to_string(budget) + " candidates exhausted with " +
                  std::to_string(out.row_count()) + " acceptances (rate " + std::to_string(rate) +
                  ")");
      }
      const std::size_t batch =
          static_cast<std::size_t>(std::min<std::uint64_t>(chunk, budget - cursor));
      SampleMatrix candidates = generate_block(build.graph, res, cursor, batch, opt, cache);
      SampleMatrix accepted =
          reject_cyclic(candidates, build.eliminated, n - out.row_count(), opt.seed);
      for (std::size_t r = 0; r < accepted.row_count(); ++r) {
        out.rows.push_back(std::move(accepted.rows[r]));
        out.candidate_index.push_back(accepted.candidate_index[r]);
      }
      cursor += batch;
    }
  }

  attach_nonjas(out, build.attachments, opt);
  return out;
}

double analytic_tuple_probability(const SkeletonGraph& g, const InferenceResult& res,
                                  const TupleKey& skeleton_tuple) {
  if (skeleton_tuple.size() != g.node_count()) {
    raise(ErrorKind::Parameter, "tuple arity does not match the skeleton");
  }
  if (res.empty_join()) return 0.0;
  const FreqMap& root = res.root();
  auto it = root.find(skeleton_tuple[0]);
  if (it == root.end()) return 0.0;
  double p = it->second / res.join_size;
  for (std::size_t level = 1; level < g.node_count(); ++level) {
    if (p == 0.0) return 0.0;
    const DiscreteDistribution dist =
        conditional_step(g, level, skeleton_tuple[level - 1], res);
    p *= dist.prob_of(skeleton_tuple[level]);
  }
  return p;
}

}  // namespace modeljoin
