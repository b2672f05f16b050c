#pragma once

// Shared test fixtures: the four chained demo tables with hand-checkable
// frequencies, plus seeded random chain and triangle databases with exact
// models for oracle comparisons.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "modeljoin/catalog.hpp"
#include "modeljoin/evaluation.hpp"
#include "modeljoin/inference.hpp"
#include "modeljoin/join_graph.hpp"
#include "modeljoin/rng.hpp"
#include "modeljoin/table_model.hpp"

namespace mjt {

using namespace modeljoin;

struct TestDb {
  Catalog catalog;
  std::map<std::string, TableData> data;
  JoinQuery query;
  ModelRegistry registry;

  ResolvedQuery resolve() const { return resolve_query(query, catalog, registry); }
  OracleJoin oracle(std::int64_t cap = 5'000'000) const {
    OracleOptions opt;
    opt.cap = cap;
    return oracle_join(data, query, catalog, opt);
  }
};

inline TableMeta make_meta(const std::string& id, std::vector<std::string> attrs,
                           std::vector<JaDecl> jas) {
  TableMeta meta;
  meta.table_id = id;
  meta.attributes = std::move(attrs);
  meta.join_attrs = std::move(jas);
  return meta;
}

inline void add_table(TestDb& db, TableMeta meta, std::vector<Row> rows,
                      const std::vector<std::string>& header) {
  TableData data;
  data.name = meta.table_id;
  data.header = header;
  data.rows = std::move(rows);
  meta.row_count = static_cast<std::int64_t>(data.rows.size());
  auto model = build_exact(data, meta);
  db.catalog.order.push_back(meta.table_id);
  db.catalog.tables[meta.table_id] = model->meta();
  db.data[meta.table_id] = std::move(data);
  db.registry.bind(meta.table_id, model, "exact");
  db.query.tables.push_back(meta.table_id);
  db.query.sources[meta.table_id] = SourceRef{SourceRef::Kind::Model, meta.table_id};
}

// The four chained tables: d1(A,B) |x| d2(B,C,D) |x| d3(D,E) |x| d4(E,F).
// Exact join has 8 tuples, all with B=b3, D=d2, and E split 2:6 over e1:e2.
inline TestDb demo_db(bool select_nonjas = false) {
  TestDb db;
  add_table(db, make_meta("d1", {"A", "B"}, {{"B", JaPosition::First}}),
            {{"a1", "b1"}, {"a1", "b2"}, {"a2", "b3"}, {"a3", "b3"}}, {"A", "B"});
  add_table(db,
            make_meta("d2", {"B", "C", "D"},
                      {{"B", JaPosition::First}, {"D", JaPosition::Second}}),
            {{"b1", "c1", "d1"}, {"b1", "c2", "d1"}, {"b3", "c2", "d1"}, {"b3", "c2", "d2"}},
            {"B", "C", "D"});
  add_table(db,
            make_meta("d3", {"D", "E"}, {{"D", JaPosition::First}, {"E", JaPosition::Second}}),
            {{"d2", "e1"}, {"d2", "e2"}, {"d2", "e3"}, {"d1", "e3"}}, {"D", "E"});
  add_table(db, make_meta("d4", {"E", "F"}, {{"E", JaPosition::First}}),
            {{"e1", "f1"}, {"e2", "f1"}, {"e2", "f1"}, {"e2", "f2"}}, {"E", "F"});
  db.query.join_conditions = {{{"d1", "B"}, {"d2", "B"}},
                              {{"d2", "D"}, {"d3", "D"}},
                              {{"d3", "E"}, {"d4", "E"}}};
  if (select_nonjas) {
    db.query.selected_attrs = {{"d1", "A"}, {"d2", "C"}, {"d4", "F"}};
  }
  return db;
}

// Chain of `tables` tables joined left to right; JA value pools are shared
// between adjacent tables so the join is usually non-empty.
inline TestDb random_chain_db(std::uint64_t seed, int tables, int max_ndv, int max_rows) {
  SplitMix64 gen(derive_seed(seed, 0xdb));
  const int nodes = tables - 1;

  std::vector<int> ndv(static_cast<std::size_t>(nodes));
  for (auto& v : ndv) v = 3 + static_cast<int>(gen.next_below(static_cast<std::uint64_t>(max_ndv - 2)));
  auto pool_token = [&](int node, std::uint64_t idx) {
    return "n" + std::to_string(node) + "v" + std::to_string(idx);
  };
  auto draw_node_value = [&](int node) {
    return pool_token(node, gen.next_below(static_cast<std::uint64_t>(ndv[static_cast<std::size_t>(node)])));
  };

  TestDb db;
  for (int t = 0; t < tables; ++t) {
    const std::string id = "t" + std::to_string(t + 1);
    const int rows = 20 + static_cast<int>(gen.next_below(static_cast<std::uint64_t>(max_rows - 19)));
    std::vector<Row> data;
    std::vector<std::string> header;
    TableMeta meta;
    if (t == 0) {
      meta = make_meta(id, {"x1", "j1"}, {{"j1", JaPosition::First}});
      header = {"x1", "j1"};
      for (int r = 0; r < rows; ++r) {
        data.push_back({"t1x" + std::to_string(gen.next_below(4)), draw_node_value(0)});
      }
    } else if (t + 1 == tables) {
      const std::string ja = "j" + std::to_string(t);
      meta = make_meta(id, {ja, "x" + std::to_string(t + 1)}, {{ja, JaPosition::First}});
      header = meta.attributes;
      for (int r = 0; r < rows; ++r) {
        data.push_back({draw_node_value(t - 1),
                        id + "x" + std::to_string(gen.next_below(4))});
      }
    } else {
      const std::string first = "j" + std::to_string(t);
      const std::string second = "j" + std::to_string(t + 1);
      meta = make_meta(id, {first, second},
                       {{first, JaPosition::First}, {second, JaPosition::Second}});
      header = meta.attributes;
      for (int r = 0; r < rows; ++r) {
        data.push_back({draw_node_value(t - 1), draw_node_value(t)});
      }
    }
    add_table(db, meta, std::move(data), header);
  }
  for (int t = 0; t + 1 < tables; ++t) {
    const std::string ja = "j" + std::to_string(t + 1);
    db.query.join_conditions.push_back(
        {{"t" + std::to_string(t + 1), ja}, {"t" + std::to_string(t + 2), ja}});
  }
  return db;
}

// Seeded chain database whose exact join holds at least `min_size` tuples.
inline TestDb random_chain_db_nonempty(std::uint64_t seed, int tables, int max_ndv, int max_rows,
                                       std::int64_t min_size = 1) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    TestDb db = random_chain_db(derive_seed(seed, attempt), tables, max_ndv, max_rows);
    if (db.oracle().total >= min_size) return db;
  }
}

// Triangle query: t1(X,Y), t2(Y,Z), t3(Z,X) with all three equality conditions.
inline TestDb triangle_db(std::uint64_t seed, int ndv, int rows) {
  SplitMix64 gen(derive_seed(seed, 0x3a1));
  auto val = [&](const std::string& prefix) {
    return prefix + std::to_string(gen.next_below(static_cast<std::uint64_t>(ndv)));
  };

  TestDb db;
  auto rows_for = [&](const std::string& a, const std::string& b) {
    std::vector<Row> out;
    for (int r = 0; r < rows; ++r) out.push_back({val(a), val(b)});
    return out;
  };
  add_table(db, make_meta("t1", {"X", "Y"}, {{"X", JaPosition::First}, {"Y", JaPosition::Second}}),
            rows_for("x", "y"), {"X", "Y"});
  add_table(db, make_meta("t2", {"Y", "Z"}, {{"Y", JaPosition::First}, {"Z", JaPosition::Second}}),
            rows_for("y", "z"), {"Y", "Z"});
  add_table(db, make_meta("t3", {"Z", "X"}, {{"Z", JaPosition::First}, {"X", JaPosition::Second}}),
            rows_for("z", "x"), {"Z", "X"});
  db.query.join_conditions = {{{"t1", "X"}, {"t3", "X"}},
                              {{"t1", "Y"}, {"t2", "Y"}},
                              {{"t2", "Z"}, {"t3", "Z"}}};
  return db;
}

inline TestDb triangle_db_nonempty(std::uint64_t seed, int ndv, int rows,
                                   std::int64_t min_size = 1) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    TestDb db = triangle_db(derive_seed(seed, attempt), ndv, rows);
    if (db.oracle().total >= min_size) return db;
  }
}

}  // namespace mjt
