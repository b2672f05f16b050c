#pragma once

#include <filesystem>

#include "modeljoin/types.hpp"

namespace modeljoin {

// Comma-delimited UTF-8 with a mandatory header row. Tokens are opaque and
// may not contain the delimiter or line breaks; ingestion rejects them.
void validate_token(const Token& tok, const std::string& where);

TableData read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<Row>& rows);

}  // namespace modeljoin
