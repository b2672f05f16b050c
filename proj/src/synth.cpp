#include "modeljoin/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "modeljoin/errors.hpp"
#include "modeljoin/rng.hpp"

namespace modeljoin {

namespace {

std::string value_token(std::int64_t i) { return "v" + std::to_string(i); }

void check_spec(const SynthSpec& spec) {
  if (spec.rows <= 0 || spec.ndv_first <= 0 || spec.ndv_second <= 0 || spec.distinct_pairs <= 0) {
    raise(ErrorKind::Parameter, "synth spec values must be positive");
  }
  if (spec.distinct_pairs > spec.ndv_first * spec.ndv_second) {
    raise(ErrorKind::Parameter, "distinct pairs exceed the NDV grid");
  }
  if (spec.distinct_pairs < std::max(spec.ndv_first, spec.ndv_second)) {
    raise(ErrorKind::Parameter,
          "need at least max(NDV1, NDV2) distinct pairs to realize every value");
  }
  if (spec.rows < spec.distinct_pairs) {
    raise(ErrorKind::Parameter, "need at least one row per distinct pair");
  }
}

}  // namespace

TableMeta synth_table_meta(const SynthSpec& spec) {
  TableMeta meta;
  meta.table_id = spec.table_id;
  meta.attributes = {spec.first_attr, spec.second_attr};
  meta.row_count = spec.rows;
  meta.join_attrs = {{spec.first_attr, JaPosition::First}, {spec.second_attr, JaPosition::Second}};
  return meta;
}

TableData gen_table(const SynthSpec& spec) {
  check_spec(spec);
  SplitMix64 gen(derive_seed(spec.seed, 0x5157));

  // Covering pairs first: shuffled value lists matched cyclically so every
  // first and second value appears at least once.
  std::vector<std::int64_t> firsts(static_cast<std::size_t>(spec.ndv_first));
  std::vector<std::int64_t> seconds(static_cast<std::size_t>(spec.ndv_second));
  for (std::size_t i = 0; i < firsts.size(); ++i) firsts[i] = static_cast<std::int64_t>(i);
  for (std::size_t i = 0; i < seconds.size(); ++i) seconds[i] = static_cast<std::int64_t>(i);
  deterministic_shuffle(firsts, gen);
  deterministic_shuffle(seconds, gen);

  std::set<std::pair<std::int64_t, std::int64_t>> pair_set;
  const std::int64_t covering = std::max(spec.ndv_first, spec.ndv_second);
  for (std::int64_t i = 0; i < covering; ++i) {
    pair_set.insert({firsts[static_cast<std::size_t>(i % spec.ndv_first)],
                     seconds[static_cast<std::size_t>(i % spec.ndv_second)]});
  }
  // Degenerate collisions in the cyclic matching leave a short deficit; top it
  // up alongside the random remainder below.
  const std::uint64_t grid =
      static_cast<std::uint64_t>(spec.ndv_first) * static_cast<std::uint64_t>(spec.ndv_second);
  while (static_cast<std::int64_t>(pair_set.size()) < spec.distinct_pairs) {
    const std::uint64_t cell = gen.next_below(grid);
    pair_set.insert({static_cast<std::int64_t>(cell % static_cast<std::uint64_t>(spec.ndv_first)),
                     static_cast<std::int64_t>(cell / static_cast<std::uint64_t>(spec.ndv_first))});
  }

  std::vector<std::pair<std::int64_t, std::int64_t>> pairs(pair_set.begin(), pair_set.end());
  deterministic_shuffle(pairs, gen);

  // One row per pair keeps NDP exact; leftover rows follow the multiplicity
  // distribution (uniform, or Zipf over the shuffled pair order).
  std::vector<std::size_t> row_pair;
  row_pair.reserve(static_cast<std::size_t>(spec.rows));
  for (std::size_t i = 0; i < pairs.size(); ++i) row_pair.push_back(i);

  const std::int64_t extra = spec.rows - spec.distinct_pairs;
  if (spec.zipf_exponent > 0.0) {
    std::vector<double> cdf(pairs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      acc += 1.0 / std::pow(static_cast<double>(i + 1), spec.zipf_exponent);
      cdf[i] = acc;
    }
    for (std::int64_t i = 0; i < extra; ++i) {
      const double target = gen.next_double() * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
      std::size_t idx = static_cast<std::size_t>(it - cdf.begin());
      if (idx >= pairs.size()) idx = pairs.size() - 1;
      row_pair.push_back(idx);
    }
  } else {
    for (std::int64_t i = 0; i < extra; ++i) {
      row_pair.push_back(static_cast<std::size_t>(gen.next_below(pairs.size())));
    }
  }
  deterministic_shuffle(row_pair, gen);

  TableData data;
  data.name = spec.table_id;
  data.header = {spec.first_attr, spec.second_attr};
  data.rows.reserve(row_pair.size());
  for (std::size_t idx : row_pair) {
    data.rows.push_back({value_token(pairs[idx].first), value_token(pairs[idx].second)});
  }
  return data;
}

SelfJoinFixture gen_selfjoin_fixture(const SynthSpec& base, int ways, const SourceRef& source) {
  if (ways < 1) raise(ErrorKind::Parameter, "self join needs at least one way");

  SelfJoinFixture fixture;
  for (int w = 1; w <= ways; ++w) {
    SynthSpec alias = base;
    alias.table_id = base.table_id + "_" + std::to_string(w);
    TableMeta meta = synth_table_meta(alias);
    fixture.catalog.order.push_back(meta.table_id);
    fixture.catalog.tables[meta.table_id] = meta;
    fixture.query.tables.push_back(meta.table_id);
    fixture.query.sources[meta.table_id] = source;
  }
  for (int w = 1; w < ways; ++w) {
    QueryCondition cond;
    cond.left = {base.table_id + "_" + std::to_string(w), base.second_attr};
    cond.right = {base.table_id + "_" + std::to_string(w + 1), base.first_attr};
    fixture.query.join_conditions.push_back(cond);
  }
  return fixture;
}

}  // namespace modeljoin
