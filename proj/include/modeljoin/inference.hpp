#pragma once

#include <cstdint>
#include <vector>

#include "modeljoin/join_graph.hpp"
#include "modeljoin/types.hpp"

namespace modeljoin {

class TableModel;

// Frequencies of node i's distinct values over the join of the sub-graph from
// node i towards the leaves. Zero entries are omitted.
struct FrequencyTable {
  int level = 0;  // 0 = root
  FreqMap freqs;
};

struct InferenceStats {
  // Conditional (dv, DV) pairs visited across all elimination steps; the pass
  // touches each at most once.
  std::uint64_t cond_pairs_visited = 0;
  double elapsed_ms = 0.0;
};

struct InferenceResult {
  std::vector<FrequencyTable> levels;  // root first
  double join_size = 0.0;              // sum of the root table
  bool exact = false;                  // all contributing models were exact
  InferenceStats stats;

  const FreqMap& root() const { return levels.front().freqs; }
  bool empty_join() const { return join_size <= 0.0; }
};

// Leaf initialization: pointwise product of the two frequency dictionaries
// meeting at the leaf value; zero products omitted.
FreqMap leaf_frequency(const FreqMap& second_of_upper, const FreqMap& first_of_lower);

// One sum-product elimination step. `f_above` holds node i's frequencies in
// the table above it; `below` is the edge table spanning nodes i, i+1 and
// `f_next` the already-computed table for node i+1.
FreqMap eliminate_step(const FreqMap& f_above, const TableModel& below, const FreqMap& f_next,
                       InferenceStats* stats = nullptr);

// Single leaf-to-root pass producing every level and the join size.
InferenceResult run_inference(const SkeletonGraph& g);

}  // namespace modeljoin
