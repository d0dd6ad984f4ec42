// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "adacap/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace adacap {

Matrix2D::Matrix2D(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(std::size_t(rows) * cols, fill) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix2D: negative shape");
}

Matrix2D::Matrix2D(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != std::size_t(rows) * cols) {
    throw std::invalid_argument("Matrix2D: data length does not match shape");
  }
}

Matrix2D Matrix2D::row(std::initializer_list<double> values) {
  return Matrix2D(1, int(values.size()), std::vector<double>(values));
}

Matrix2D Matrix2D::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  int r = int(rows.size());
  int c = r == 0 ? 0 : int(rows.begin()->size());
  std::vector<double> data;
  data.reserve(std::size_t(r) * c);
  for (const auto& row : rows) {
    if (int(row.size()) != c) throw std::invalid_argument("Matrix2D: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix2D(r, c, std::move(data));
}

bool Matrix2D::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Matrix2D::fill(double value) {
  for (double& v : data_) v = value;
}

void Matrix2D::add_scaled(const Matrix2D& other, double scale) {
  if (!same_shape(other)) throw std::invalid_argument("add_scaled: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

}  // namespace adacap
