#include "modeljoin/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "modeljoin/errors.hpp"
#include "modeljoin/table_model.hpp"

namespace modeljoin {

using nlohmann::json;

bool TableMeta::has_attribute(const std::string& attr) const {
  return std::find(attributes.begin(), attributes.end(), attr) != attributes.end();
}

bool TableMeta::is_join_attr(const std::string& attr) const {
  for (const auto& ja : join_attrs) {
    if (ja.attr == attr) return true;
  }
  return false;
}

const std::string* TableMeta::ja_attr(JaPosition pos) const {
  for (const auto& ja : join_attrs) {
    if (ja.position == pos) return &ja.attr;
  }
  return nullptr;
}

void TableMeta::validate() const {
  if (table_id.empty()) raise(ErrorKind::Schema, "table with empty id");
  if (row_count < 0) raise(ErrorKind::Schema, table_id + ": negative row_count");
  std::set<std::string> seen(attributes.begin(), attributes.end());
  if (seen.size() != attributes.size()) {
    raise(ErrorKind::Schema, table_id + ": duplicate attribute names");
  }
  if (join_attrs.empty() || join_attrs.size() > 2) {
    raise(ErrorKind::Schema,
          table_id + ": tables must declare 1 or 2 join attributes, got " +
              std::to_string(join_attrs.size()));
  }
  std::set<std::string> ja_names;
  std::set<int> ja_positions;
  for (const auto& ja : join_attrs) {
    if (!has_attribute(ja.attr)) {
      raise(ErrorKind::Schema, table_id + ": join attribute " + ja.attr + " not in attributes");
    }
    if (!ja_names.insert(ja.attr).second) {
      raise(ErrorKind::Schema, table_id + ": duplicate join attribute " + ja.attr);
    }
    if (!ja_positions.insert(static_cast<int>(ja.position)).second) {
      raise(ErrorKind::Schema, table_id + ": two join attributes share a position");
    }
  }
}

const TableMeta& Catalog::require(const std::string& table_id) const {
  auto it = tables.find(table_id);
  if (it == tables.end()) raise(ErrorKind::Resolution, "unknown table " + table_id);
  return it->second;
}

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorKind::Schema, "malformed JSON in " + path.string() + ": " + e.what());
  }
  return doc;
}

JaPosition parse_position(const std::string& s, const std::string& table_id) {
  if (s == "first") return JaPosition::First;
  if (s == "second") return JaPosition::Second;
  raise(ErrorKind::Schema, table_id + ": join attribute position must be first|second, got " + s);
}

Catalog catalog_from_json(const json& doc) {
  Catalog catalog;
  if (!doc.is_object() || !doc.contains("tables") || !doc["tables"].is_array()) {
    raise(ErrorKind::Schema, "metadata document must contain a tables array");
  }
  for (const auto& t : doc["tables"]) {
    TableMeta meta;
    meta.table_id = t.value("name", "");
    if (t.contains("attributes")) {
      for (const auto& a : t["attributes"]) meta.attributes.push_back(a.get<std::string>());
    }
    meta.row_count = t.value("row_count", std::int64_t{0});
    if (t.contains("join_attrs")) {
      for (const auto& ja : t["join_attrs"]) {
        JaDecl decl;
        decl.attr = ja.value("attr", "");
        decl.position = parse_position(ja.value("position", "first"), meta.table_id);
        meta.join_attrs.push_back(decl);
      }
    }
    if (t.contains("data")) meta.data_path = t["data"].get<std::string>();
    meta.validate();
    if (!catalog.tables.emplace(meta.table_id, meta).second) {
      raise(ErrorKind::Schema, "duplicate table " + meta.table_id);
    }
    catalog.order.push_back(meta.table_id);
  }
  return catalog;
}

json catalog_to_json(const Catalog& catalog) {
  json tables = json::array();
  for (const auto& id : catalog.order) {
    const TableMeta& meta = catalog.tables.at(id);
    json t;
    t["name"] = meta.table_id;
    t["attributes"] = meta.attributes;
    t["row_count"] = meta.row_count;
    json jas = json::array();
    for (const auto& ja : meta.join_attrs) {
      jas.push_back({{"attr", ja.attr},
                     {"position", ja.position == JaPosition::First ? "first" : "second"}});
    }
    t["join_attrs"] = jas;
    if (meta.data_path) t["data"] = *meta.data_path;
    tables.push_back(t);
  }
  return json{{"tables", tables}};
}

AttrRef parse_attr_ref(const std::string& s, const std::string& where) {
  auto dot = s.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == s.size()) {
    raise(ErrorKind::Schema, where + ": expected table.attribute, got '" + s + "'");
  }
  return AttrRef{s.substr(0, dot), s.substr(dot + 1)};
}

}  // namespace

Catalog load_metadata(const std::filesystem::path& path) {
  return catalog_from_json(read_json_file(path));
}

Catalog metadata_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorKind::Schema, std::string("malformed metadata JSON: ") + e.what());
  }
  return catalog_from_json(doc);
}

std::string metadata_to_json_text(const Catalog& catalog) {
  return catalog_to_json(catalog).dump(2);
}

void save_metadata(const std::filesystem::path& path, const Catalog& catalog) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + path.string());
  out << metadata_to_json_text(catalog) << "\n";
}

JoinQuery query_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorKind::Schema, std::string("malformed query JSON: ") + e.what());
  }
  JoinQuery q;
  if (!doc.contains("tables") || !doc["tables"].is_array() || doc["tables"].empty()) {
    raise(ErrorKind::Schema, "query must list at least one table");
  }
  for (const auto& t : doc["tables"]) {
    std::string name = t.value("name", "");
    if (name.empty()) raise(ErrorKind::Schema, "query table entry without a name");
    q.tables.push_back(name);
    const bool has_model = t.contains("model");
    const bool has_data = t.contains("data");
    if (has_model == has_data) {
      raise(ErrorKind::Schema, "table " + name + " must name exactly one of model|data");
    }
    SourceRef src;
    src.kind = has_model ? SourceRef::Kind::Model : SourceRef::Kind::Data;
    src.path = has_model ? t["model"].get<std::string>() : t["data"].get<std::string>();
    q.sources[name] = src;
  }
  if (doc.contains("joins")) {
    for (const auto& j : doc["joins"]) {
      QueryCondition cond;
      cond.left = parse_attr_ref(j.value("left", ""), "join condition");
      cond.right = parse_attr_ref(j.value("right", ""), "join condition");
      q.join_conditions.push_back(cond);
    }
  }
  if (doc.contains("select")) {
    for (const auto& s : doc["select"]) {
      q.selected_attrs.push_back(parse_attr_ref(s.get<std::string>(), "select list"));
    }
  }
  return q;
}

JoinQuery load_query(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return query_from_json_text(text);
}

void ModelRegistry::bind(const std::string& table_id, std::shared_ptr<const TableModel> model,
                         std::string kind) {
  entries[table_id] = Entry{std::move(model), std::move(kind)};
}

const ResolvedTable& ResolvedQuery::table(const std::string& table_id) const {
  for (const auto& t : tables) {
    if (t.meta.table_id == table_id) return t;
  }
  raise(ErrorKind::Internal, "resolved query missing table " + table_id);
}

ResolvedQuery resolve_query(const JoinQuery& q, const Catalog& catalog,
                            const ModelRegistry& registry) {
  ResolvedQuery out;

  std::set<std::string> seen_tables;
  bool any_model_source = false;
  for (const auto& table_id : q.tables) {
    if (!seen_tables.insert(table_id).second) {
      raise(ErrorKind::Resolution, "table " + table_id + " listed twice in query");
    }
    const TableMeta& meta = catalog.require(table_id);
    if (meta.row_count <= 0) {
      raise(ErrorKind::Resolution, "table " + table_id + " participates with row_count 0");
    }
    auto reg = registry.entries.find(table_id);
    if (reg == registry.entries.end() || !reg->second.model) {
      raise(ErrorKind::Resolution, "table " + table_id + " has neither model nor data bound");
    }
    auto src = q.sources.find(table_id);
    ResolvedTable rt;
    rt.meta = meta;
    rt.model = reg->second.model;
    rt.source_kind = src != q.sources.end() ? src->second.kind : SourceRef::Kind::Model;
    if (rt.source_kind == SourceRef::Kind::Model) any_model_source = true;
    out.tables.push_back(std::move(rt));
  }
  if (!any_model_source) {
    raise(ErrorKind::Resolution,
          "not a model join query: every table is bound to raw data; at least one "
          "table must be represented by a model");
  }

  for (const auto& cond : q.join_conditions) {
    for (const AttrRef* ref : {&cond.left, &cond.right}) {
      if (!seen_tables.count(ref->table)) {
        raise(ErrorKind::Resolution, "join condition references table " + ref->table +
                                         " not listed in the query");
      }
      const TableMeta& meta = catalog.require(ref->table);
      if (!meta.has_attribute(ref->attr)) {
        raise(ErrorKind::Resolution, "unknown attribute " + ref->qualified());
      }
      if (!meta.is_join_attr(ref->attr)) {
        raise(ErrorKind::Resolution,
              ref->qualified() + " is not declared as a join attribute in the metadata");
      }
    }
    out.conditions.push_back(cond);
  }

  std::set<AttrRef> dedup;
  for (const auto& sel : q.selected_attrs) {
    if (!seen_tables.count(sel.table)) {
      raise(ErrorKind::Resolution, "selected attribute " + sel.qualified() +
                                       " references a table not in the query");
    }
    if (!catalog.require(sel.table).has_attribute(sel.attr)) {
      raise(ErrorKind::Resolution, "unknown attribute " + sel.qualified());
    }
    if (dedup.insert(sel).second) out.selected.push_back(sel);
  }

  return out;
}

}  // namespace modeljoin
