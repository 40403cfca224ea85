#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "piht/types.hpp"

namespace piht {

/// Rectangular numeric matrix read from a delimiter-separated file.
struct DatasetMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> column_names;  // empty when the file has no header

  int row_count() const { return static_cast<int>(values.rows()); }
  int col_count() const { return static_cast<int>(values.cols()); }
};

/// Reads a comma- or tab-separated numeric file (delimiter auto-detected
/// from the first line, optional single header row, UTF-8, decimal-point
/// numerals). Ragged rows and non-numeric cells raise ParseError with the
/// 1-based row and column in the message.
DatasetMatrix load_matrix_file(const std::string& path);

/// Writes `values` as comma-separated text with enough digits to
/// round-trip doubles exactly.
void save_matrix_file(const std::string& path, const Eigen::MatrixXd& values,
                      const std::vector<std::string>& column_names = {});

}  // namespace piht
