#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace drcast {

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CsvRow {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line number in the source file
};

struct CsvFile {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

// Plain comma-separated files; fields must not contain commas or quotes.
// Lines starting with '#' are metadata and skipped.
inline CsvFile read_csv(const std::string& path, const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");

  CsvFile file;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (!saw_header) {
      if (fields != expected_header) {
        std::ostringstream msg;
        msg << path << ":" << line_no << ": unexpected header '" << line << "'";
        throw CsvError(msg.str());
      }
      file.header = std::move(fields);
      saw_header = true;
      continue;
    }
    if (fields.size() != expected_header.size()) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": expected " << expected_header.size()
          << " fields, got " << fields.size();
      throw CsvError(msg.str());
    }
    file.rows.push_back(CsvRow{std::move(fields), line_no});
  }
  if (!saw_header) throw CsvError(path + ": missing header row");
  return file;
}

inline double parse_csv_double(const std::string& text, const std::string& path, std::size_t line) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    std::ostringstream msg;
    msg << path << ":" << line << ": invalid number '" << text << "'";
    throw CsvError(msg.str());
  }
  return value;
}

// Shortest round-trip representation; stable across runs, so re-running a
// command with the same seed produces byte-identical files.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace drcast
