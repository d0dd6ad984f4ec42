// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "adacap/matrix.hpp"

namespace adacap {

// Visual tokens for one video: a frames x tokens_per_frame grid of
// width-dimensional vectors, flattened row-major (frame-major) into
// `tokens`, plus the start-token attention row over those positions.
struct TokenGrid {
  int frames = 0;           // T_large
  int tokens_per_frame = 0; // P
  int width = 0;            // d
  Matrix2D tokens;          // (frames * tokens_per_frame) x width; row = i * P + p
  Matrix2D cls_attention;   // 1 x (frames * tokens_per_frame); empty until a score pass fills it

  int token_count() const { return frames * tokens_per_frame; }
  int flat_index(int frame, int token) const { return frame * tokens_per_frame + token; }
  bool has_attention() const { return !cls_attention.empty(); }
};

// Normalized per-token contribution scores and their per-frame sums.
// token_scores sums to 1; frame_scores[i] is the sum over row i.
struct SignificanceMap {
  Matrix2D token_scores;             // frames x tokens_per_frame
  std::vector<double> frame_scores;  // length frames

  int frames() const { return token_scores.rows(); }
  int tokens_per_frame() const { return token_scores.cols(); }
  std::span<const double> flat_token_scores() const { return token_scores.flat(); }
};

// View of the first attention layer of the large generation module, used by
// the dedicated scoring pass. Spans and references alias the model's
// parameter buffers and must not outlive them.
struct ScoreAttentionParams {
  std::span<const double> ln_gamma;
  std::span<const double> ln_beta;
  double ln_eps = 1e-5;
  const Matrix2D* wq = nullptr;
  std::span<const double> bq;
  const Matrix2D* wk = nullptr;
  std::span<const double> bk;
  int heads = 1;
};

// Token scores t = a * ||x|| / sum(a * ||x||) and frame scores f_i = sum_p t.
// Throws "degenerate significance: uniform fallback required" when every
// product a * ||x|| is zero; callers that want to survive pathological
// batches should use token_significance_or_uniform.
SignificanceMap token_significance(const TokenGrid& grid);

// Same, but degenerates to the uniform map (with a warning on stderr)
// instead of throwing.
SignificanceMap token_significance_or_uniform(const TokenGrid& grid);

// Uniform significance over all tokens; also the degenerate fallback.
SignificanceMap uniform_significance(int frames, int tokens_per_frame);

// Inverted token scores (1 - t, renormalized), for the score sanity preset.
SignificanceMap invert_significance(const SignificanceMap& sig);

// Runs one attention layer over [start token; visual tokens] and stores the
// start token's attention weights over the visual positions (averaged over
// heads) into grid.cls_attention. The softmax row includes the start token
// itself, so the stored entries sum to 1 minus its self-attention weight;
// the normalization in token_significance cancels that factor.
TokenGrid score_pass(TokenGrid grid, const Matrix2D& cls_embedding,
                     const ScoreAttentionParams& params);

}  // namespace adacap
