#ifndef ERSAA_DATASET_HPP
#define ERSAA_DATASET_HPP

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ersaa/types.hpp"

namespace ersaa {

// Paired covariate/response sample. Row i holds (x^i, y^i). When
// intercept_mode is set the first covariate column is identically one.
struct Dataset {
  Matrix covariates;  // n x d_x
  Matrix responses;   // n x d_y
  bool intercept_mode = false;

  Dataset() = default;
  Dataset(Matrix x, Matrix y, bool intercept = false)
      : covariates(std::move(x)), responses(std::move(y)), intercept_mode(intercept) {
    validate();
  }

  Index n() const { return covariates.rows(); }
  Index dx() const { return covariates.cols(); }
  Index dy() const { return responses.cols(); }

  void validate() const {
    if (covariates.rows() != responses.rows())
      throw DimensionMismatch("dataset: covariate/response row counts differ");
    if (covariates.rows() < 1) throw DimensionMismatch("dataset: empty sample");
    if (!all_finite(covariates) || !all_finite(responses))
      throw DomainError("dataset: non-finite entries");
    if (intercept_mode) {
      for (Index i = 0; i < covariates.rows(); ++i)
        if (covariates(i, 0) != 1.0)
          throw DomainError("dataset: intercept column is not identically 1");
    }
  }

  Dataset without_row(Index i) const {
    if (i < 0 || i >= n()) throw IndexOutOfRange("without_row: index out of range");
    Matrix x(n() - 1, dx()), y(n() - 1, dy());
    Index r = 0;
    for (Index k = 0; k < n(); ++k) {
      if (k == i) continue;
      x.row(r) = covariates.row(k);
      y.row(r) = responses.row(k);
      ++r;
    }
    return Dataset(std::move(x), std::move(y), intercept_mode);
  }

  Dataset head(Index m) const {
    return Dataset(covariates.topRows(m), responses.topRows(m), intercept_mode);
  }
};

// Prepends a column of ones, marking the result as intercept_mode.
inline Dataset with_intercept(const Matrix& x, const Matrix& y) {
  Matrix xi(x.rows(), x.cols() + 1);
  xi.col(0).setOnes();
  xi.rightCols(x.cols()) = x;
  return Dataset(std::move(xi), y, true);
}

inline void write_dataset_csv(const Dataset& data, std::ostream& out) {
  const Index dx = data.dx(), dy = data.dy();
  for (Index j = 0; j < dx; ++j) out << (j ? "," : "") << "x" << (j + 1);
  for (Index j = 0; j < dy; ++j) out << ",y" << (j + 1);
  out << "\n";
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < dx; ++j)
      out << (j ? "," : "") << format_double(data.covariates(i, j));
    for (Index j = 0; j < dy; ++j) out << "," << format_double(data.responses(i, j));
    out << "\n";
  }
}

inline void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for write: " + path);
  write_dataset_csv(data, f);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline Dataset read_dataset_csv(std::istream& in, bool intercept_mode = false) {
  std::string header;
  if (!std::getline(in, header)) throw IoError("dataset csv: missing header");
  auto cols = split_csv_line(header);
  Index dx = 0, dy = 0;
  for (const auto& c : cols) {
    if (!c.empty() && c[0] == 'x')
      ++dx;
    else if (!c.empty() && c[0] == 'y')
      ++dy;
    else
      throw IoError("dataset csv: unexpected column '" + c + "'");
  }
  if (dx < 1 || dy < 1) throw IoError("dataset csv: need x* and y* columns");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (static_cast<Index>(cells.size()) != dx + dy)
      throw IoError("dataset csv: ragged row");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c));
    rows.push_back(std::move(row));
  }
  Matrix x(static_cast<Index>(rows.size()), dx), y(static_cast<Index>(rows.size()), dy);
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < dx; ++j) x(i, j) = rows[i][j];
    for (Index j = 0; j < dy; ++j) y(i, j) = rows[i][dx + j];
  }
  return Dataset(std::move(x), std::move(y), intercept_mode);
}

inline Dataset read_dataset_csv(const std::string& path, bool intercept_mode = false) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  return read_dataset_csv(f, intercept_mode);
}

}  // namespace ersaa

#endif  // ERSAA_DATASET_HPP
