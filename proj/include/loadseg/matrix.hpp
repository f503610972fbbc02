#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace loadseg {

/// Dense row-major matrix of doubles. Rows are observations, columns are features.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }
  [[nodiscard]] std::vector<double>& data() noexcept { return data_; }

  /// Copy of the given rows, in the given order.
  [[nodiscard]] Matrix select_rows(std::span<const std::size_t> indices) const;

  void append_row(std::span<const double> values);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

[[nodiscard]] double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;
[[nodiscard]] double euclidean_distance(std::span<const double> a, std::span<const double> b) noexcept;

/// Full symmetric n x n Euclidean distance matrix.
[[nodiscard]] Matrix pairwise_distances(const Matrix& points);

}  // namespace loadseg
