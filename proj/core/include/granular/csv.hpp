#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace granular::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  // Column position by name, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
};

// Comma-separated with optional double-quoted fields ("" escapes a quote).
// Blank lines are skipped; a row whose field count differs from the header
// raises InputError naming the line.
Table read(const std::filesystem::path& path);
Table parse(std::istream& in, const std::string& source_name);

std::optional<double> to_double(std::string_view text);
std::optional<long long> to_integer(std::string_view text);

// Shortest round-trip decimal representation; "nan" for missing values.
std::string format_double(double v);

std::string escape(std::string_view field);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <class... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    (write_cell(cells, first), ...);
    out_ << '\n';
  }

  void row_strings(const std::vector<std::string>& cells);

 private:
  void write_cell(double v, bool& first);
  void write_cell(const std::string& v, bool& first);
  void write_cell(const char* v, bool& first);
  void write_cell(long long v, bool& first);
  void write_cell(unsigned long long v, bool& first);
  void write_cell(long v, bool& first);
  void write_cell(unsigned long v, bool& first);
  void write_cell(int v, bool& first);
  void write_cell(unsigned v, bool& first);

  std::ostream& out_;
};

}  // namespace granular::csv
