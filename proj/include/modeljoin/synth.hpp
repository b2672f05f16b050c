#pragma once

#include <cstdint>
#include <string>

#include "modeljoin/catalog.hpp"
#include "modeljoin/types.hpp"

namespace modeljoin {

// Controlled two-column table: exact distinct-value and distinct-pair counts.
struct SynthSpec {
  std::int64_t rows = 0;
  std::int64_t ndv_first = 0;
  std::int64_t ndv_second = 0;
  std::int64_t distinct_pairs = 0;  // NDP
  double zipf_exponent = 0.0;       // 0 = uniform pair multiplicities
  std::uint64_t seed = 1;
  std::string table_id = "t0";
  std::string first_attr = "att0";
  std::string second_attr = "att1";
};

// The output satisfies the spec exactly: `rows` rows, exactly ndv_first and
// ndv_second distinct values, exactly `distinct_pairs` distinct pairs. Values
// of both columns share one token universe so self joins connect.
TableData gen_table(const SynthSpec& spec);

TableMeta synth_table_meta(const SynthSpec& spec);

// `ways` aliases of one base table chained as t1.att1 = t2.att0, ... Returns
// the catalog (one entry per alias) and a query whose sources all reference
// `source`; ways == 1 degenerates to the single table.
struct SelfJoinFixture {
  Catalog catalog;
  JoinQuery query;
};

SelfJoinFixture gen_selfjoin_fixture(const SynthSpec& base, int ways, const SourceRef& source);

}  // namespace modeljoin
