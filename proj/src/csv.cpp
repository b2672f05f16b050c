#include "modeljoin/csv.hpp"

#include <fstream>

#include "modeljoin/errors.hpp"

namespace modeljoin {

int TableData::column_index(const std::string& attr) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == attr) return static_cast<int>(i);
  }
  return -1;
}

void validate_token(const Token& tok, const std::string& where) {
  for (char c : tok) {
    if (c == ',' || c == '\n' || c == '\r') {
      raise(ErrorKind::Schema, "token containing delimiter or line break in " + where);
    }
  }
}

namespace {

Row split_line(const std::string& line) {
  Row out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

TableData read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open " + path.string());

  TableData data;
  data.name = path.stem().string();

  std::string line;
  if (!std::getline(in, line)) raise(ErrorKind::Schema, "missing header row in " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  data.header = split_line(line);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == EOF) break;  // trailing newline
    Row row = split_line(line);
    if (row.size() != data.header.size()) {
      raise(ErrorKind::Schema, "ragged row at " + path.string() + ":" + std::to_string(line_no));
    }
    data.rows.push_back(std::move(row));
  }
  return data;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<Row>& rows) {
  std::ofstream out(path, std::ios::binary);  // binary: no platform newline translation
  if (!out) raise(ErrorKind::Io, "cannot write " + path.string());

  for (std::size_t i = 0; i < header.size(); ++i) {
    validate_token(header[i], "header of " + path.string());
    out << (i ? "," : "") << header[i];
  }
  out << "\n";
  for (const Row& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      validate_token(row[i], path.string());
      out << (i ? "," : "") << row[i];
    }
    out << "\n";
  }
  if (!out) raise(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace modeljoin
