// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adacap/matrix.hpp"

namespace adacap {

// Named trainable buffer. The gradient accumulator persists across tapes so
// a training step can sum contributions before an optimizer update.
struct Parameter {
  std::string name;
  Matrix2D value;
  Matrix2D grad;

  Parameter() = default;
  Parameter(std::string n, Matrix2D v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(0.0); }
};

namespace ad {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over Matrix2D values. Ops compute forward eagerly when
// recorded; backward() walks entries in reverse order, accumulating into
// entry grads and finally into bound Parameter grads. Construct with
// grad_enabled=false for inference-only forwards (no grad storage).
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix2D value);
  Var param(Parameter& p);

  const Matrix2D& value(Var v) const { return entries_[v.id].value; }
  const Matrix2D& grad(Var v) const { return entries_[v.id].grad; }
  double scalar(Var v) const;

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var add_row_vector(Var a, Var bias);  // bias is 1 x cols
  Var scale(Var a, double s);
  Var gelu(Var a);
  Var layer_norm(Var x, Var gamma, Var beta, double eps);
  // Mask is a constant 0/1 matrix; masked output entries are exactly 0.
  Var masked_softmax(Var logits, const Matrix2D& mask);
  Var slice_rows(Var a, int r0, int r1);
  Var slice_cols(Var a, int c0, int c1);
  Var concat_rows(std::span<const Var> parts);
  Var concat_cols(std::span<const Var> parts);
  Var gather_rows(Var table, std::vector<int> ids);
  // out = a with out.row(r) += table.row(ids[r])
  Var add_gathered_rows(Var a, Var table, std::vector<int> ids);
  // out = a with out(r0+i, c0+j) += block(i, j)
  Var add_block(Var a, Var block, int r0, int c0);
  Var gather_submatrix(Var a, std::vector<int> rows, std::vector<int> cols);
  // Elementwise log(sigmoid(x) + eps).
  Var log_sigmoid_eps(Var a, double eps);
  // Weighted mean cross-entropy over rows; returns a 1x1 scalar.
  Var cross_entropy(Var logits, std::vector<int> targets, std::vector<double> weights);

  void backward(Var loss);

 private:
  struct Entry {
    Matrix2D value;
    Matrix2D grad;
    std::function<void()> back;
    Parameter* bound = nullptr;
  };

  Var push(Matrix2D value, std::function<void()> back = nullptr, Parameter* bound = nullptr);
  Matrix2D& grad_mut(int id) { return entries_[id].grad; }

  std::vector<Entry> entries_;
  bool grad_enabled_ = true;
};

}  // namespace ad
}  // namespace adacap
