#include "modeljoin/inference.hpp"

#include <chrono>
#include <cmath>

#include "modeljoin/errors.hpp"
#include "modeljoin/table_model.hpp"

namespace modeljoin {

namespace {

// Exact models produce integer frequencies; snap accumulated rounding noise
// back to the integer grid before the values feed the next step.
void round_exact(FreqMap& freqs) {
  for (auto it = freqs.begin(); it != freqs.end();) {
    const double r = std::round(it->second);
    if (std::abs(it->second - r) < 1e-6) it->second = r;
    if (it->second <= 0.0) {
      it = freqs.erase(it);
    } else {
      ++it;
    }
  }
}

FreqMap eliminate_step_impl(const FreqMap* f_above, const TableModel& below, const FreqMap& f_next,
                            InferenceStats* stats) {
  const FreqMap& f_below0 = below.first_ja_freqs();
  const FreqMap& f_below1 = below.second_ja_freqs();
  const FreqMap& support = f_above ? *f_above : f_below0;

  FreqMap out;
  for (const auto& [dv, support_freq] : support) {
    double f0 = support_freq;
    double above_factor = 1.0;
    if (f_above) {
      auto it = f_below0.find(dv);
      if (it == f_below0.end()) continue;  // dv never pairs downward
      f0 = it->second;
      above_factor = support_freq;
    }
    const ProbMap cond = below.cond_second_given_first(dv);
    if (cond.empty() && f0 > 0.0) {
      raise(ErrorKind::ModelInconsistency,
            below.table_id() + ": no conditional for supported value '" + dv + "'");
    }
    double propagation = 0.0;  // carries downstream join mass per unit of dv
    for (const auto& [next_value, p] : cond) {
      if (stats) ++stats->cond_pairs_visited;
      auto fit = f_next.find(next_value);
      if (fit == f_next.end()) continue;
      auto f1_it = f_below1.find(next_value);
      if (f1_it == f_below1.end() || f1_it->second <= 0.0) {
        raise(ErrorKind::ModelInconsistency,
              below.table_id() + ": downstream frequency present for '" + next_value +
                  "' but the table reports zero support");
      }
      propagation += p * (fit->second / f1_it->second);
    }
    const double value = above_factor * f0 * propagation;
    if (value > 0.0) out[dv] = value;
  }
  return out;
}

const FreqMap& anchor_freqs(const EndAnchor& anchor) {
  return anchor.model->ja_freqs_for(anchor.ja_attr);
}

}  // namespace

FreqMap leaf_frequency(const FreqMap& second_of_upper, const FreqMap& first_of_lower) {
  FreqMap out;
  for (const auto& [dv, f1] : second_of_upper) {
    auto it = first_of_lower.find(dv);
    if (it == first_of_lower.end()) continue;
    const double value = f1 * it->second;
    if (value > 0.0) out[dv] = value;
  }
  return out;
}

FreqMap eliminate_step(const FreqMap& f_above, const TableModel& below, const FreqMap& f_next,
                       InferenceStats* stats) {
  return eliminate_step_impl(&f_above, below, f_next, stats);
}

InferenceResult run_inference(const SkeletonGraph& g) {
  const auto started = std::chrono::steady_clock::now();
  const std::size_t m = g.node_count();
  if (m == 0) raise(ErrorKind::Internal, "inference on an empty skeleton");

  InferenceResult result;
  result.exact = g.all_exact;
  result.levels.resize(m);
  for (std::size_t i = 0; i < m; ++i) result.levels[i].level = static_cast<int>(i);

  // Leaf level: product of whatever tables meet at the leaf value.
  FreqMap& leaf = result.levels[m - 1].freqs;
  if (m == 1) {
    if (g.root_anchor && g.leaf_anchor) {
      leaf = leaf_frequency(anchor_freqs(*g.root_anchor), anchor_freqs(*g.leaf_anchor));
    } else if (g.root_anchor) {
      leaf = anchor_freqs(*g.root_anchor);
    } else if (g.leaf_anchor) {
      leaf = anchor_freqs(*g.leaf_anchor);
    } else {
      raise(ErrorKind::Internal, "single-node skeleton without any table");
    }
  } else {
    const FreqMap& above = g.edges[m - 2].model->second_ja_freqs();
    leaf = g.leaf_anchor ? leaf_frequency(above, anchor_freqs(*g.leaf_anchor)) : above;
  }
  if (result.exact) round_exact(leaf);

  for (std::size_t step = m - 1; step-- > 0;) {
    const FreqMap& next = result.levels[step + 1].freqs;
    if (next.empty()) continue;  // empty sub-join: everything above is empty too
    const FreqMap* above = nullptr;
    if (step > 0) {
      above = &g.edges[step - 1].model->second_ja_freqs();
    } else if (g.root_anchor) {
      above = &anchor_freqs(*g.root_anchor);
    }
    result.levels[step].freqs =
        eliminate_step_impl(above, *g.edges[step].model, next, &result.stats);
    if (result.exact) round_exact(result.levels[step].freqs);
  }

  for (const auto& [dv, f] : result.levels[0].freqs) result.join_size += f;
  if (result.exact) result.join_size = std::round(result.join_size);

  result.stats.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
          .count();
  return result;
}

}  // namespace modeljoin
