#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hfspec {

// Comma separated, '.' decimal separator, header row required. Blank lines
// and lines starting with '#' are skipped. Fields are whitespace-trimmed.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // source line of each row, for diagnostics
  std::string source;

  // Throws InputError when a required column is absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;

  double number(std::size_t row, std::size_t col) const;
  const std::string& text(std::size_t row, std::size_t col) const;
};

std::string read_text_file(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text, const std::string& source = "<string>");
CsvTable read_csv(const std::filesystem::path& path);

std::vector<std::string> split_fields(std::string_view line, char delimiter);
std::string trim(std::string_view text);

double parse_double(std::string_view text, const std::string& what);
int parse_int(std::string_view text, const std::string& what);

// Shortest representation that parses back to the same double.
std::string format_double(double value);

// Writes atomically: content goes to a temporary sibling that is renamed
// into place, so a failed run never leaves a truncated file behind.
void write_text_file(const std::filesystem::path& path, std::string_view content);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  CsvWriter& row(const std::vector<std::string>& fields);
  std::string str() const { return out_; }

 private:
  std::size_t columns_;
  std::string out_;
};

}  // namespace hfspec
