// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace adacap {

// Dense row-major matrix of 64-bit floats. This is the only array type in
// the library; vectors are 1xN matrices.
class Matrix2D {
 public:
  Matrix2D() = default;
  Matrix2D(int rows, int cols, double fill = 0.0);
  Matrix2D(int rows, int cols, std::vector<double> data);

  static Matrix2D row(std::initializer_list<double> values);
  static Matrix2D from_rows(std::initializer_list<std::initializer_list<double>> rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[std::size_t(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[std::size_t(r) * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> row_span(int r) { return {data_.data() + std::size_t(r) * cols_, std::size_t(cols_)}; }
  std::span<const double> row_span(int r) const { return {data_.data() + std::size_t(r) * cols_, std::size_t(cols_)}; }
  std::span<double> flat() { return {data_.data(), data_.size()}; }
  std::span<const double> flat() const { return {data_.data(), data_.size()}; }

  bool same_shape(const Matrix2D& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

  void fill(double value);
  void add_scaled(const Matrix2D& other, double scale);  // *this += scale * other

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

}  // namespace adacap
