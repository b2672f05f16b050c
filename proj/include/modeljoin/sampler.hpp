#pragma once

#include <cstdint>
#include <vector>

#include "modeljoin/inference.hpp"
#include "modeljoin/join_graph.hpp"
#include "modeljoin/types.hpp"

namespace modeljoin {

// A normalized discrete distribution with a deterministic value order and an
// inverse-CDF sampler; the per-level conditional step of the generator.
struct DiscreteDistribution {
  std::vector<Token> values;  // ascending token order
  std::vector<double> probs;
  std::vector<double> cdf;

  static DiscreteDistribution from_weights(const std::map<Token, double>& weights);
  const Token& draw(double u) const;
  double prob_of(const Token& value) const;
  bool empty() const { return values.empty(); }
};

// Root distribution: value frequency over the join divided by the join size.
DiscreteDistribution make_root_step(const FreqMap& root_table);

// Conditional distribution of node `level` given the sampled parent value.
DiscreteDistribution conditional_step(const SkeletonGraph& g, std::size_t level,
                                      const Token& prev_value, const InferenceResult& res);

struct SamplerOptions {
  std::uint64_t seed = 0;
  int workers = 1;
  std::uint64_t reject_budget = 0;  // candidate attempts for cyclic queries; 0 = auto
  std::size_t memo_capacity = 4096;
};

// Generated rows. Row r of a run is a pure function of (seed, candidate index),
// so output is identical for any worker count.
struct SampleMatrix {
  std::vector<std::string> columns;
  std::vector<Row> rows;
  std::vector<std::uint64_t> candidate_index;  // per row: index its stream derives from
  std::uint64_t seed = 0;
  std::size_t draws_consumed = 0;  // stream draws already used per row

  std::size_t row_count() const { return rows.size(); }
};

// n independent draws of the root column; P(dv) = F1(dv) / F0.
std::vector<Token> sample_root(const FreqMap& root_table, std::size_t n, std::uint64_t seed);

SampleMatrix generate_skeleton(const SkeletonGraph& g, const InferenceResult& res, std::size_t n,
                               const SamplerOptions& opt);

// Filters candidates through the eliminated edges' pair frequencies: accept
// with probability prod_e f_e(x, y) / f_e_max. Returns at most target_n rows.
SampleMatrix reject_cyclic(const SampleMatrix& candidates,
                           const std::vector<EliminatedEdge>& eliminated, std::size_t target_n,
                           std::uint64_t seed);

// Appends one column per attachment, sampled from P(attr | same-table JAs).
void attach_nonjas(SampleMatrix& sample, const std::vector<NonJaAttachment>& attachments,
                   const SamplerOptions& opt);

// Full pipeline: skeleton generation, rejection for cyclic queries (looping
// until n acceptances or the attempt budget runs out), then non-JA columns.
SampleMatrix generate_join_sample(const SkeletonBuild& build, const InferenceResult& res,
                                  std::size_t n, const SamplerOptions& opt);

// Chain probability of one skeleton tuple under the generator: the root term
// times the per-level conditional terms. With exact models this equals the
// tuple's multiplicity over the join divided by the join size.
double analytic_tuple_probability(const SkeletonGraph& g, const InferenceResult& res,
                                  const TupleKey& skeleton_tuple);

}  // namespace modeljoin
