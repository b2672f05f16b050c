#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "modeljoin/catalog.hpp"
#include "modeljoin/sampler.hpp"
#include "modeljoin/types.hpp"

namespace modeljoin {

class TableModel;

// Ground truth: the exact multiset of join tuples, materialized as counts of
// distinct output tuples. Only feasible when all raw tables are available and
// the join stays under the cap.
struct OracleJoin {
  std::vector<std::string> columns;  // skeleton labels root-to-leaf, then selected attrs
  std::size_t skeleton_width = 0;
  std::map<TupleKey, std::int64_t> counts;
  std::int64_t total = 0;

  std::map<TupleKey, std::int64_t> skeleton_counts() const;
};

struct OracleOptions {
  std::int64_t cap = 5'000'000;
};

OracleJoin oracle_join(const std::map<std::string, TableData>& tables, const JoinQuery& q,
                       const Catalog& catalog, const OracleOptions& opt = {});

// n uniform-with-replacement draws from the materialized join.
SampleMatrix oracle_uniform_sample(const OracleJoin& oracle, std::size_t n, std::uint64_t seed);

// Generative confusion for one conditioning value. The construction makes
// precision, recall and F-score coincide: F = sum_y min(p_true, p_model),
// TP = F and FP = FN = 1 - F.
struct ConditionScore {
  Token value;
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;
  double fscore = 0.0;
};

struct GenerativeConfusion {
  std::vector<ConditionScore> per_condition;  // every distinct conditioning value
  double mean_sampled = 0.0;                  // frequency-weighted sample of conditions
  double median = 0.0;                        // over all distinct conditions
  std::size_t sample_size = 0;
  double confidence = 0.0;
  double wilson_low = 0.0;
  double wilson_high = 0.0;
};

GenerativeConfusion generative_fscore(const TableModel& model, const TableModel& truth,
                                      std::size_t sample_size, double confidence,
                                      std::uint64_t seed);

struct KSReport {
  double statistic = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;
  double alpha = 0.0;
  double c_alpha = 0.0;
  double critical = 0.0;
  bool uniform_retained = false;
  // (tuple, cdf of first sample, cdf of second) at each distinct point.
  std::vector<std::tuple<TupleKey, double, double>> cdf_points;
};

// Two-sample KS over the canonical lexicographic ordering of distinct tuples.
KSReport ks_two_sample(const std::vector<TupleKey>& sample_a, const std::vector<TupleKey>& sample_b,
                       double alpha);

double ks_c_alpha(double alpha);
double critical_value(double alpha, std::size_t n, std::size_t m);

std::pair<double, double> wilson_interval(double proportion, std::size_t trials,
                                          double confidence);
double normal_quantile(double p);

// F-score of a generated sample against the exact join distribution:
// sum over distinct tuples of min(empirical share, true share).
double empirical_tuple_fscore(const std::vector<TupleKey>& sample,
                              const std::map<TupleKey, std::int64_t>& truth_counts,
                              std::int64_t truth_total);

}  // namespace modeljoin
