#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "modeljoin/types.hpp"

namespace modeljoin {

class TableModel;

enum class JaPosition { First, Second };

struct JaDecl {
  std::string attr;
  JaPosition position = JaPosition::First;
};

// Query-time metadata for one table. Immutable after load.
struct TableMeta {
  std::string table_id;
  std::vector<std::string> attributes;
  std::int64_t row_count = 0;
  std::vector<JaDecl> join_attrs;          // 1 or 2 entries, distinct positions
  std::optional<std::string> data_path;    // relative CSV location, when known

  bool has_attribute(const std::string& attr) const;
  bool is_join_attr(const std::string& attr) const;
  // Declared JA name for a position; nullptr when the table has no JA there.
  const std::string* ja_attr(JaPosition pos) const;
  void validate() const;
};

struct Catalog {
  std::vector<std::string> order;  // table ids in document order
  std::map<std::string, TableMeta> tables;

  const TableMeta& require(const std::string& table_id) const;
};

Catalog load_metadata(const std::filesystem::path& path);
void save_metadata(const std::filesystem::path& path, const Catalog& catalog);
Catalog metadata_from_json_text(const std::string& text);
std::string metadata_to_json_text(const Catalog& catalog);

struct SourceRef {
  enum class Kind { Model, Data };
  Kind kind = Kind::Model;
  std::string path;
};

struct QueryCondition {
  AttrRef left;
  AttrRef right;
};

struct JoinQuery {
  std::vector<std::string> tables;                 // query order
  std::vector<QueryCondition> join_conditions;
  std::vector<AttrRef> selected_attrs;             // beyond the skeleton JAs
  std::map<std::string, SourceRef> sources;        // table id -> source
};

JoinQuery load_query(const std::filesystem::path& path);
JoinQuery query_from_json_text(const std::string& text);

// Binds each table to a concrete in-memory model. Entries are immutable and
// shared; concurrent reads are safe.
struct ModelRegistry {
  struct Entry {
    std::shared_ptr<const TableModel> model;
    std::string kind;  // "exact" | "learned" | "perturbed"
  };
  std::map<std::string, Entry> entries;

  void bind(const std::string& table_id, std::shared_ptr<const TableModel> model,
            std::string kind);
};

struct ResolvedTable {
  TableMeta meta;
  std::shared_ptr<const TableModel> model;
  SourceRef::Kind source_kind = SourceRef::Kind::Model;
};

struct ResolvedQuery {
  std::vector<ResolvedTable> tables;           // query order
  std::vector<QueryCondition> conditions;      // validated, query order
  std::vector<AttrRef> selected;               // validated non-duplicate selection

  const ResolvedTable& table(const std::string& table_id) const;
};

ResolvedQuery resolve_query(const JoinQuery& q, const Catalog& catalog,
                            const ModelRegistry& registry);

}  // namespace modeljoin
