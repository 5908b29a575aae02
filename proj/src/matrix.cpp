#include "attnbound/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "attnbound/error.hpp"

namespace attnbound {

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorKind::dimension, "matrix of shape " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                                   " cannot hold " + std::to_string(data_.size()) + " values");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::optional<std::size_t> Matrix::first_non_finite() const noexcept {
  auto it = std::find_if(data_.begin(), data_.end(), [](double v) { return !std::isfinite(v); });
  if (it == data_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - data_.begin());
}

Matrix Matrix::top_rows(std::size_t n) const {
  if (n > rows_) {
    fail(ErrorKind::dimension, "requested " + std::to_string(n) + " rows from a matrix with " +
                                   std::to_string(rows_));
  }
  return Matrix(n, cols_, std::vector<double>(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(n * cols_)));
}

}  // namespace attnbound
