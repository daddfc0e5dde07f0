#include "hfspec/table_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hfspec/error.hpp"

namespace hfspec {

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view text, const std::string& what) {
  const std::string s = trim(text);
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (!s.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (s.empty() || ec != std::errc() || ptr != end) {
    throw InputError(what + ": '" + s + "' is not a number");
  }
  return value;
}

int parse_int(std::string_view text, const std::string& what) {
  const std::string s = trim(text);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw InputError(what + ": '" + s + "' is not an integer");
  }
  return value;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error("format_double: buffer too small");
  return std::string(buf, ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".part";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(path.string() + ": cannot write file");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InputError(path.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

CsvTable parse_csv(std::string_view text, const std::string& source) {
  CsvTable table;
  table.source = source;
  int line_no = 0;
  std::size_t start = 0;
  bool have_header = false;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line[0] == '#') {
      if (end == text.size()) break;
      continue;
    }
    auto fields = split_fields(line, ',');
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != table.header.size()) {
        throw InputError(source + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(table.header.size()) + " fields, found " +
                         std::to_string(fields.size()));
      }
      table.rows.push_back(std::move(fields));
      table.line_numbers.push_back(line_no);
    }
    if (end == text.size()) break;
  }
  if (!have_header) throw InputError(source + ": missing CSV header row");
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  return parse_csv(read_text_file(path), path.string());
}

bool CsvTable::has_column(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw InputError(source + ": missing column '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - header.begin());
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  return parse_double(rows.at(row).at(col),
                      source + ":" + std::to_string(line_numbers.at(row)) + ": " + header.at(col));
}

const std::string& CsvTable::text(std::size_t row, std::size_t col) const {
  return rows.at(row).at(col);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  row(header);
}

CsvWriter& CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) throw Error("CsvWriter: wrong number of fields");
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out_ += ',';
    out_ += fields[k];
  }
  out_ += '\n';
  return *this;
}

}  // namespace hfspec
