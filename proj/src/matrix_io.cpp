#include "piht/matrix_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace piht {

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream stream(line);
  while (std::getline(stream, cell, delimiter)) cells.push_back(cell);
  if (!line.empty() && line.back() == delimiter) cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

std::string trimmed(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ')) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && s[start] == ' ') ++start;
  return s.substr(start);
}

}  // namespace

DatasetMatrix load_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trimmed(line);
    if (!t.empty()) lines.push_back(t);
  }
  if (lines.empty()) throw ParseError(path + ": empty file");

  const char delimiter = lines.front().find('\t') != std::string::npos ? '\t' : ',';

  // A non-numeric first row is a header.
  std::vector<std::string> first = split_line(lines.front(), delimiter);
  bool has_header = false;
  for (const std::string& cell : first) {
    double ignored;
    if (!parse_double(trimmed(cell), ignored)) {
      has_header = true;
      break;
    }
  }

  DatasetMatrix out;
  std::size_t data_start = 0;
  if (has_header) {
    for (std::string& cell : first) out.column_names.push_back(trimmed(cell));
    data_start = 1;
    if (lines.size() == 1) throw ParseError(path + ": header row but no data rows");
  }

  const std::size_t expected_cols =
      split_line(lines[data_start], delimiter).size();
  if (has_header && out.column_names.size() != expected_cols) {
    throw ParseError(path + ": header has " + std::to_string(out.column_names.size()) +
                     " columns but row 2 has " + std::to_string(expected_cols));
  }

  const std::size_t rows = lines.size() - data_start;
  out.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(expected_cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t file_row = r + data_start + 1;  // 1-based, counting the header
    const std::vector<std::string> cells = split_line(lines[r + data_start], delimiter);
    if (cells.size() != expected_cols) {
      throw ParseError(path + ": row " + std::to_string(file_row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(expected_cols));
    }
    for (std::size_t c = 0; c < expected_cols; ++c) {
      double value;
      if (!parse_double(trimmed(cells[c]), value)) {
        throw ParseError(path + ": row " + std::to_string(file_row) + ", column " +
                         std::to_string(c + 1) + ": not a number: '" + cells[c] + "'");
      }
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = value;
    }
  }
  if (!out.values.allFinite()) throw ParseError(path + ": non-finite entries");
  return out;
}

void save_matrix_file(const std::string& path, const Eigen::MatrixXd& values,
                      const std::vector<std::string>& column_names) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open file for writing");
  if (!column_names.empty()) {
    if (static_cast<Eigen::Index>(column_names.size()) != values.cols()) {
      throw InvalidInputError("save_matrix_file: column name count mismatch");
    }
    for (std::size_t c = 0; c < column_names.size(); ++c) {
      if (c > 0) out << ',';
      out << column_names[c];
    }
    out << '\n';
  }
  char buffer[64];
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c > 0) out << ',';
      std::snprintf(buffer, sizeof(buffer), "%.17g", values(r, c));
      out << buffer;
    }
    out << '\n';
  }
  if (!out) throw ParseError(path + ": write failed");
}

}  // namespace piht
