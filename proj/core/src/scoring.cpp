// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "adacap/scoring.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "adacap/kernels.hpp"

namespace adacap {

namespace {

SignificanceMap map_from_products(const TokenGrid& grid, const std::vector<double>& products,
                                  double total) {
  SignificanceMap sig;
  sig.token_scores = Matrix2D(grid.frames, grid.tokens_per_frame);
  sig.frame_scores.assign(grid.frames, 0.0);
  for (int i = 0; i < grid.frames; ++i) {
    double fsum = 0.0;
    for (int p = 0; p < grid.tokens_per_frame; ++p) {
      double t = products[grid.flat_index(i, p)] / total;
      sig.token_scores(i, p) = t;
      fsum += t;
    }
    sig.frame_scores[i] = fsum;
  }
  return sig;
}

std::vector<double> significance_products(const TokenGrid& grid) {
  if (!grid.has_attention()) {
    throw std::invalid_argument("token_significance: cls_attention not filled");
  }
  if (grid.cls_attention.cols() != grid.token_count()) {
    throw std::invalid_argument("token_significance: attention length mismatch");
  }
  std::vector<double> products(grid.token_count());
  for (int idx = 0; idx < grid.token_count(); ++idx) {
    double a = grid.cls_attention(0, idx);
    if (a < 0.0) throw std::invalid_argument("token_significance: negative attention value");
    double norm_sq = 0.0;
    auto row = grid.tokens.row_span(idx);
    for (double v : row) norm_sq += v * v;
    products[idx] = a * std::sqrt(norm_sq);
  }
  return products;
}

}  // namespace

SignificanceMap token_significance(const TokenGrid& grid) {
  std::vector<double> products = significance_products(grid);
  double total = 0.0;
  for (double p : products) total += p;
  if (total <= 0.0) {
    throw std::runtime_error("degenerate significance: uniform fallback required");
  }
  return map_from_products(grid, products, total);
}

SignificanceMap token_significance_or_uniform(const TokenGrid& grid) {
  std::vector<double> products = significance_products(grid);
  double total = 0.0;
  for (double p : products) total += p;
  if (total <= 0.0) {
    std::cerr << "warning: degenerate significance, falling back to uniform map\n";
    return uniform_significance(grid.frames, grid.tokens_per_frame);
  }
  return map_from_products(grid, products, total);
}

SignificanceMap uniform_significance(int frames, int tokens_per_frame) {
  SignificanceMap sig;
  int n = frames * tokens_per_frame;
  sig.token_scores = Matrix2D(frames, tokens_per_frame, 1.0 / n);
  sig.frame_scores.assign(frames, double(tokens_per_frame) / n);
  return sig;
}

SignificanceMap invert_significance(const SignificanceMap& sig) {
  int n = sig.frames() * sig.tokens_per_frame();
  if (n < 2) throw std::invalid_argument("invert_significance: needs at least two tokens");
  SignificanceMap out;
  out.token_scores = Matrix2D(sig.frames(), sig.tokens_per_frame());
  out.frame_scores.assign(sig.frames(), 0.0);
  // sum(1 - t) = n - 1 since t sums to 1.
  double denom = double(n) - 1.0;
  for (int i = 0; i < sig.frames(); ++i) {
    double fsum = 0.0;
    for (int p = 0; p < sig.tokens_per_frame(); ++p) {
      double t = (1.0 - sig.token_scores(i, p)) / denom;
      out.token_scores(i, p) = t;
      fsum += t;
    }
    out.frame_scores[i] = fsum;
  }
  return out;
}

TokenGrid score_pass(TokenGrid grid, const Matrix2D& cls_embedding,
                     const ScoreAttentionParams& params) {
  if (cls_embedding.rows() != 1 || cls_embedding.cols() != grid.width) {
    throw std::invalid_argument("score_pass: cls embedding width mismatch");
  }
  if (grid.tokens.cols() != grid.width || grid.tokens.rows() != grid.token_count()) {
    throw std::invalid_argument("score_pass: token grid shape mismatch");
  }
  if (params.wq == nullptr || params.wk == nullptr) {
    throw std::invalid_argument("score_pass: missing attention parameters");
  }
  const int n = grid.token_count();
  const int d = grid.width;
  const int heads = params.heads;
  if (d % heads != 0) throw std::invalid_argument("score_pass: width not divisible by heads");
  const int dh = d / heads;

  // Sequence [CLS; visual tokens], normalized like the block input.
  Matrix2D seq(n + 1, d);
  for (int c = 0; c < d; ++c) seq(0, c) = cls_embedding(0, c);
  for (int r = 0; r < n; ++r) {
    auto src = grid.tokens.row_span(r);
    auto dst = seq.row_span(r + 1);
    for (int c = 0; c < d; ++c) dst[c] = src[c];
  }
  Matrix2D normed = layer_norm(seq, params.ln_gamma, params.ln_beta, params.ln_eps);

  Matrix2D q = matmul(normed, *params.wq);
  Matrix2D k = matmul(normed, *params.wk);
  for (int r = 0; r < q.rows(); ++r) {
    for (int c = 0; c < d; ++c) {
      q(r, c) += params.bq[c];
      k(r, c) += params.bk[c];
    }
  }

  // Only the CLS row of the attention is needed; average it over heads.
  Matrix2D attn_avg(1, n + 1, 0.0);
  double inv_sqrt_dh = 1.0 / std::sqrt(double(dh));
  for (int h = 0; h < heads; ++h) {
    Matrix2D logits(1, n + 1);
    for (int j = 0; j <= n; ++j) {
      double dot = 0.0;
      for (int c = h * dh; c < (h + 1) * dh; ++c) dot += q(0, c) * k(j, c);
      logits(0, j) = dot * inv_sqrt_dh;
    }
    Matrix2D row = softmax_rows(logits);
    for (int j = 0; j <= n; ++j) attn_avg(0, j) += row(0, j) / heads;
  }

  grid.cls_attention = Matrix2D(1, n);
  for (int j = 0; j < n; ++j) grid.cls_attention(0, j) = attn_avg(0, j + 1);
  return grid;
}

}  // namespace adacap
