// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "adacap/matrix.hpp"

namespace adacap {

// Additive surrogate for -inf in masked logits. Large enough that exp()
// underflows to exactly 0 after row-max shifting.
inline constexpr double kMaskedLogit = -1e30;

Matrix2D matmul(const Matrix2D& a, const Matrix2D& b);     // a * b
Matrix2D matmul_nt(const Matrix2D& a, const Matrix2D& b);  // a * b^T
Matrix2D matmul_tn(const Matrix2D& a, const Matrix2D& b);  // a^T * b
Matrix2D transpose(const Matrix2D& a);

// Row-wise softmax restricted to entries where mask != 0. Masked entries of
// the output are exactly 0; each row sums to 1 over its unmasked entries.
// Throws "degenerate mask row" if some row of the mask is all zero.
Matrix2D masked_softmax(const Matrix2D& logits, const Matrix2D& mask);

// Plain row-wise softmax (all entries unmasked).
Matrix2D softmax_rows(const Matrix2D& logits);

// Per-row layer normalization: y = gamma * (x - mean) / sqrt(var + eps) + beta.
Matrix2D layer_norm(const Matrix2D& x, std::span<const double> gamma,
                    std::span<const double> beta, double eps);

// Gathers table rows: out.row(r) = table.row(ids[r]).
Matrix2D embedding_lookup(const Matrix2D& table, std::span<const int> ids);

// Weighted mean token-level cross-entropy over rows of `logits`:
//   sum_t w_t * (logsumexp(logits_t) - logits_t[targets_t]) / sum_t w_t.
double cross_entropy(const Matrix2D& logits, std::span<const int> targets,
                     std::span<const double> weights);

double gelu_scalar(double x);
double gelu_grad_scalar(double x);

}  // namespace adacap
