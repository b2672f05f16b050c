#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace modeljoin {

// Attribute values are opaque categorical tokens; no numeric coercion anywhere.
using Token = std::string;
using Row = std::vector<Token>;

// Token -> frequency (exact backends store integers in the double).
// Ordered map: iteration order is part of the determinism contract.
using FreqMap = std::map<Token, double>;
using ProbMap = std::map<Token, double>;

// A join tuple key (e.g. skeleton values root-to-leaf); lexicographic order.
using TupleKey = std::vector<Token>;

struct AttrRef {
  std::string table;
  std::string attr;

  std::string qualified() const { return table + "." + attr; }
  bool operator==(const AttrRef& o) const { return table == o.table && attr == o.attr; }
  bool operator<(const AttrRef& o) const {
    return table != o.table ? table < o.table : attr < o.attr;
  }
};

struct TableData {
  std::string name;
  std::vector<std::string> header;
  std::vector<Row> rows;

  int column_index(const std::string& attr) const;  // -1 if absent
};

}  // namespace modeljoin
