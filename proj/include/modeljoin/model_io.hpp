#pragma once

#include <filesystem>
#include <memory>

#include "modeljoin/table_model.hpp"

namespace modeljoin {

// Versioned model container: a manifest (kind, table, sizes, build parameters)
// plus the backend payload. Serialization round-trips bit-exactly: numbers are
// written with shortest round-trip precision and keys are sorted.
void save_model(const std::filesystem::path& path, const TableModel& model);
std::string model_to_json_text(const TableModel& model);

std::shared_ptr<TableModel> load_model(const std::filesystem::path& path);
std::shared_ptr<TableModel> model_from_json_text(const std::string& text);

// Rebinds a loaded model to a query alias; everything but the table id must
// match the alias metadata.
std::shared_ptr<TableModel> rebind_model(const std::shared_ptr<TableModel>& model,
                                         const TableMeta& alias_meta);

}  // namespace modeljoin
