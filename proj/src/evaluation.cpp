#include "modeljoin/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "modeljoin/errors.hpp"
#include "modeljoin/join_graph.hpp"
#include "modeljoin/rng.hpp"
#include "modeljoin/table_model.hpp"

namespace modeljoin {

std::map<TupleKey, std::int64_t> OracleJoin::skeleton_counts() const {
  std::map<TupleKey, std::int64_t> out;
  for (const auto& [tuple, count] : counts) {
    TupleKey head(tuple.begin(), tuple.begin() + static_cast<long>(skeleton_width));
    out[head] += count;
  }
  return out;
}

namespace {

struct TableVars {
  std::string table_id;
  std::vector<int> vars;          // variable ids this table contributes
  std::vector<int> columns;       // matching CSV column per var
};

}  // namespace

OracleJoin oracle_join(const std::map<std::string, TableData>& tables, const JoinQuery& q,
                       const Catalog& catalog, const OracleOptions& opt) {
  std::vector<TableMeta> metas;
  for (const auto& id : q.tables) metas.push_back(catalog.require(id));

  for (const auto& cond : q.join_conditions) {
    for (const AttrRef* ref : {&cond.left, &cond.right}) {
      const TableMeta& meta = catalog.require(ref->table);
      if (!meta.is_join_attr(ref->attr)) {
        raise(ErrorKind::Resolution,
              ref->qualified() + " is not declared as a join attribute in the metadata");
      }
    }
  }

  NdpLookup ndp = [&](const std::string& table_id) -> std::int64_t {
    auto it = tables.find(table_id);
    if (it == tables.end()) return 0;
    const TableMeta& meta = catalog.require(table_id);
    const std::string* first = meta.ja_attr(JaPosition::First);
    const std::string* second = meta.ja_attr(JaPosition::Second);
    if (!first || !second) return 0;
    const int fc = it->second.column_index(*first);
    const int sc = it->second.column_index(*second);
    std::set<std::pair<Token, Token>> pairs;
    for (const Row& row : it->second.rows) {
      pairs.insert({row[static_cast<std::size_t>(fc)], row[static_cast<std::size_t>(sc)]});
    }
    return static_cast<std::int64_t>(pairs.size());
  };

  const SkeletonLayout layout =
      compute_skeleton_layout(metas, q.join_conditions, q.selected_attrs, ndp, std::nullopt);

  OracleJoin oracle;
  oracle.skeleton_width = layout.node_count();
  for (const auto& node : layout.nodes) oracle.columns.push_back(node.label);
  // Variable ids: skeleton classes first, then selected non-skeleton attrs.
  std::map<AttrRef, int> attachment_var;
  {
    int next = static_cast<int>(layout.node_count());
    for (const auto& att : layout.attachments) {
      attachment_var[att.attr] = next++;
      oracle.columns.push_back(att.attr.qualified());
    }
  }

  std::vector<TableVars> table_vars;
  for (const auto& meta : metas) {
    auto data_it = tables.find(meta.table_id);
    if (data_it == tables.end()) {
      raise(ErrorKind::Resolution, "oracle join lacks raw data for table " + meta.table_id);
    }
    const TableData& data = data_it->second;
    TableVars tv;
    tv.table_id = meta.table_id;
    for (const auto& ja : meta.join_attrs) {
      const int node = layout.node_of({meta.table_id, ja.attr});
      if (node < 0) continue;
      const int col = data.column_index(ja.attr);
      if (col < 0) raise(ErrorKind::Schema, meta.table_id + ": data lacks column " + ja.attr);
      tv.vars.push_back(node);
      tv.columns.push_back(col);
    }
    for (const auto& att : layout.attachments) {
      if (att.attr.table != meta.table_id) continue;
      const int col = data.column_index(att.attr.attr);
      if (col < 0) raise(ErrorKind::Schema, meta.table_id + ": data lacks column " + att.attr.attr);
      tv.vars.push_back(attachment_var[att.attr]);
      tv.columns.push_back(col);
    }
    table_vars.push_back(std::move(tv));
  }

  // Greedy connected processing order so intermediates never go cartesian.
  std::vector<TableVars> ordered;
  std::vector<bool> used(table_vars.size(), false);
  std::set<int> known_vars;
  for (std::size_t step = 0; step < table_vars.size(); ++step) {
    int pick = -1;
    for (std::size_t i = 0; i < table_vars.size(); ++i) {
      if (used[i]) continue;
      if (step == 0) {
        pick = static_cast<int>(i);
        break;
      }
      for (int v : table_vars[i].vars) {
        if (known_vars.count(v)) {
          pick = static_cast<int>(i);
          break;
        }
      }
      if (pick >= 0) break;
    }
    if (pick < 0) raise(ErrorKind::UnsupportedShape, "disconnected join graph");
    used[static_cast<std::size_t>(pick)] = true;
    for (int v : table_vars[static_cast<std::size_t>(pick)].vars) known_vars.insert(v);
    ordered.push_back(table_vars[static_cast<std::size_t>(pick)]);
  }

  // Counts-map hash join: intermediates group identical projections, so memory
  // tracks distinct tuples rather than raw multiplicity.
  std::vector<int> alive;  // variable id per intermediate column
  std::map<TupleKey, std::int64_t> acc{{TupleKey{}, 1}};

  for (const auto& tv : ordered) {
    const TableData& data = tables.at(tv.table_id);
    std::vector<std::size_t> shared_pos, new_pos;  // positions within tv.vars
    for (std::size_t i = 0; i < tv.vars.size(); ++i) {
      if (std::find(alive.begin(), alive.end(), tv.vars[i]) != alive.end()) {
        shared_pos.push_back(i);
      } else {
        new_pos.push_back(i);
      }
    }
    std::vector<std::size_t> shared_alive_idx;
    for (std::size_t i : shared_pos) {
      shared_alive_idx.push_back(static_cast<std::size_t>(
          std::find(alive.begin(), alive.end(), tv.vars[i]) - alive.begin()));
    }

    std::map<TupleKey, std::map<TupleKey, std::int64_t>> groups;
    for (const Row& row : data.rows) {
      TupleKey shared_key, new_key;
      for (std::size_t i : shared_pos) {
        shared_key.push_back(row[static_cast<std::size_t>(tv.columns[i])]);
      }
      for (std::size_t i : new_pos) {
        new_key.push_back(row[static_cast<std::size_t>(tv.columns[i])]);
      }
      groups[shared_key][new_key] += 1;
    }

    std::map<TupleKey, std::int64_t> next;
    std::int64_t running_total = 0;
    for (const auto& [tuple, count] : acc) {
      TupleKey shared_key;
      for (std::size_t idx : shared_alive_idx) shared_key.push_back(tuple[idx]);
      auto git = groups.find(shared_key);
      if (git == groups.end()) continue;
      for (const auto& [new_key, new_count] : git->second) {
        TupleKey merged = tuple;
        merged.insert(merged.end(), new_key.begin(), new_key.end());
        auto [it, inserted] = next.try_emplace(merged, 0);
        it->second += count * new_count;
        running_total += count * new_count;
        if (running_total > opt.cap) {
          raise(ErrorKind::Parameter, "oracle join exceeds cap " + std::to_string(opt.cap) +
                                          " (estimate >= " + std::to_string(running_total) + ")");
        }
      }
    }
    acc = std::move(next);
    for (std::size_t i : new_pos) alive.push_back(tv.vars[i]);
  }

  // Reorder intermediate columns into the declared output order.
  std::vector<std::size_t> out_pos;
  for (std::size_t v = 0; v < oracle.columns.size(); ++v) {
    auto it = std::find(alive.begin(), alive.end(), static_cast<int>(v));
    if (it == alive.end()) raise(ErrorKind::Internal, "oracle lost an output variable");
    out_pos.push_back(static_cast<std::size_t>(it - alive.begin()));
  }
  for (const auto& [tuple, count] : acc) {
    TupleKey ordered_tuple;
    ordered_tuple.reserve(out_pos.size());
    for (std::size_t pos : out_pos) ordered_tuple.push_back(tuple[pos]);
    oracle.counts[ordered_tuple] += count;
    oracle.total += count;
  }
  return oracle;
}

SampleMatrix oracle_uniform_sample(const OracleJoin& oracle, std::size_t n, std::uint64_t seed) {
  if (oracle.total <= 0 && n > 0) {
    raise(ErrorKind::EmptyJoin, "oracle join is empty; nothing to sample");
  }
  std::vector<const TupleKey*> tuples;
  std::vector<double> cdf;
  double acc = 0.0;
  for (const auto& [tuple, count] : oracle.counts) {
    tuples.push_back(&tuple);
    acc += static_cast<double>(count);
    cdf.push_back(acc);
  }

  SampleMatrix mat;
  mat.columns = oracle.columns;
  mat.seed = seed;
  mat.draws_consumed = 1;
  for (std::size_t r = 0; r < n; ++r) {
    SplitMix64 stream(derive_seed(seed, r));
    const double target = stream.next_double() * static_cast<double>(oracle.total);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    std::size_t idx = static_cast<std::size_t>(it - cdf.begin());
    if (idx >= tuples.size()) idx = tuples.size() - 1;
    mat.rows.push_back(*tuples[idx]);
    mat.candidate_index.push_back(r);
  }
  return mat;
}

GenerativeConfusion generative_fscore(const TableModel& model, const TableModel& truth,
                                      std::size_t sample_size, double confidence,
                                      std::uint64_t seed) {
  const FreqMap& support = truth.first_ja_freqs();
  if (support.empty()) raise(ErrorKind::Parameter, "truth model has an empty first JA");

  GenerativeConfusion out;
  out.sample_size = sample_size;
  out.confidence = confidence;

  std::map<Token, double> score_of;
  for (const auto& [dv, f0] : support) {
    const ProbMap p_true = truth.cond_second_given_first(dv);
    const ProbMap p_model = model.cond_second_given_first(dv);
    double overlap = 0.0;
    for (const auto& [y, p] : p_true) {
      auto it = p_model.find(y);
      if (it != p_model.end()) overlap += std::min(p, it->second);
    }
    ConditionScore cs;
    cs.value = dv;
    cs.tp = overlap;
    cs.fscore = overlap;
    cs.fp = 1.0 - overlap;
    cs.fn = 1.0 - overlap;
    out.per_condition.push_back(cs);
    score_of[dv] = overlap;
  }

  {
    std::vector<double> scores;
    scores.reserve(out.per_condition.size());
    for (const auto& cs : out.per_condition) scores.push_back(cs.fscore);
    std::sort(scores.begin(), scores.end());
    const std::size_t k = scores.size();
    out.median = k % 2 ? scores[k / 2] : 0.5 * (scores[k / 2 - 1] + scores[k / 2]);
  }

  // Frequency-weighted sample of conditioning values.
  const DiscreteDistribution cond_dist = DiscreteDistribution::from_weights(support);
  SplitMix64 stream(derive_seed(seed, 0));
  double sum = 0.0;
  for (std::size_t i = 0; i < sample_size; ++i) {
    sum += score_of.at(cond_dist.draw(stream.next_double()));
  }
  out.mean_sampled = sample_size ? sum / static_cast<double>(sample_size) : 0.0;
  auto [lo, hi] = wilson_interval(out.mean_sampled, std::max<std::size_t>(sample_size, 1),
                                  confidence);
  out.wilson_low = lo;
  out.wilson_high = hi;
  return out;
}

double ks_c_alpha(double alpha) {
  if (alpha <= 0.0 || alpha >= 1.0) raise(ErrorKind::Parameter, "alpha must be in (0, 1)");
  return std::sqrt(-0.5 * std::log(alpha / 2.0));
}

double critical_value(double alpha, std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) raise(ErrorKind::Parameter, "sample sizes must be positive");
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  return ks_c_alpha(alpha) * std::sqrt((dn + dm) / (dn * dm));
}

KSReport ks_two_sample(const std::vector<TupleKey>& sample_a, const std::vector<TupleKey>& sample_b,
                       double alpha) {
  if (sample_a.empty() || sample_b.empty()) {
    raise(ErrorKind::Parameter, "KS test requires two non-empty samples");
  }
  if (sample_a.front().size() != sample_b.front().size()) {
    raise(ErrorKind::Parameter, "KS samples have different tuple arity");
  }

  std::map<TupleKey, std::pair<std::int64_t, std::int64_t>> merged;
  for (const auto& t : sample_a) merged[t].first += 1;
  for (const auto& t : sample_b) merged[t].second += 1;

  KSReport report;
  report.n = sample_a.size();
  report.m = sample_b.size();
  report.alpha = alpha;
  report.c_alpha = ks_c_alpha(alpha);
  report.critical = critical_value(alpha, report.n, report.m);

  double cdf_a = 0.0;
  double cdf_b = 0.0;
  for (const auto& [tuple, counts] : merged) {
    cdf_a += static_cast<double>(counts.first) / static_cast<double>(report.n);
    cdf_b += static_cast<double>(counts.second) / static_cast<double>(report.m);
    report.statistic = std::max(report.statistic, std::abs(cdf_a - cdf_b));
    report.cdf_points.push_back({tuple, cdf_a, cdf_b});
  }
  report.uniform_retained = report.statistic < report.critical;
  return report;
}

double normal_quantile(double p) {
  if (p <= 0.0 || p >= 1.0) raise(ErrorKind::Parameter, "quantile argument must be in (0, 1)");
  // Acklam's rational approximation, |relative error| < 1.2e-9.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

std::pair<double, double> wilson_interval(double proportion, std::size_t trials,
                                          double confidence) {
  if (proportion < 0.0 || proportion > 1.0) {
    raise(ErrorKind::Parameter, "proportion must be in [0, 1]");
  }
  if (trials == 0) raise(ErrorKind::Parameter, "Wilson interval needs at least one trial");
  const double z = normal_quantile(1.0 - (1.0 - confidence) / 2.0);
  const double n = static_cast<double>(trials);
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (proportion + z2 / (2.0 * n)) / denom;
  const double half =
      (z / denom) * std::sqrt(proportion * (1.0 - proportion) / n + z2 / (4.0 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double empirical_tuple_fscore(const std::vector<TupleKey>& sample,
                              const std::map<TupleKey, std::int64_t>& truth_counts,
                              std::int64_t truth_total) {
  if (sample.empty() || truth_total <= 0) {
    raise(ErrorKind::Parameter, "fscore requires a non-empty sample and truth");
  }
  std::map<TupleKey, std::int64_t> sample_counts;
  for (const auto& t : sample) sample_counts[t] += 1;
  double score = 0.0;
  for (const auto& [tuple, count] : sample_counts) {
    auto it = truth_counts.find(tuple);
    if (it == truth_counts.end()) continue;
    score += std::min(static_cast<double>(count) / static_cast<double>(sample.size()),
                      static_cast<double>(it->second) / static_cast<double>(truth_total));
  }
  return score;
}

}  // namespace modeljoin
