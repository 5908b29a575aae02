#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace attnbound {

/// Dense row-major matrix of doubles. A vector is stored as an n x 1 matrix
/// when it has to travel through the tensor store.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  /// Throws dimension error unless data.size() == rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  /// First flat index holding NaN or +-Inf, if any.
  std::optional<std::size_t> first_non_finite() const noexcept;

  /// Copy of the leading `n` rows.
  Matrix top_rows(std::size_t n) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace attnbound
