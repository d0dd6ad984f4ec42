// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adacap/matrix.hpp"

namespace adacap {

// Binary visual-visual attention mask. Symmetric with unit diagonal;
// index_map names each row/column as a (frame, token) pair.
struct MaskMatrix {
  int n = 0;
  std::vector<std::uint8_t> bits;  // n * n, row-major
  std::vector<std::pair<int, int>> index_map;

  std::uint8_t at(int x, int y) const { return bits[std::size_t(x) * n + y]; }
  void set(int x, int y, std::uint8_t v) { bits[std::size_t(x) * n + y] = v; }

  bool symmetric() const;
  bool unit_diagonal() const;
};

// Mask entries from a selected-token set: 1 on the diagonal, 1 between two
// selected tokens, 0 otherwise.
MaskMatrix build_mask_large(const std::vector<std::pair<int, int>>& token_set, int frames,
                            int tokens_per_frame);

// Principal submatrix over the tokens of `final_frames` (ascending order is
// preserved); side length |final_frames| * tokens_per_frame.
MaskMatrix restrict_mask_small(const MaskMatrix& large, const std::vector<int>& final_frames,
                               int tokens_per_frame);

// All-ones mask (no visual-visual restriction) over the given grid.
MaskMatrix full_mask(int frames, int tokens_per_frame);

// Applies the mask to attention logits over a [text; visual] sequence:
// within the visual-visual block, zero mask entries receive the -inf
// surrogate; all other blocks pass through unchanged.
Matrix2D apply_mask(const Matrix2D& attention_logits, const MaskMatrix& m, int text_len);

// Shared learnable soft-mask parameters (one matrix for all videos),
// sigmoid-squashed at use.
struct LearnableMaskParams {
  Matrix2D values;  // n x n, unconstrained

  explicit LearnableMaskParams(int n) : values(n, n) {}
  explicit LearnableMaskParams(Matrix2D v) : values(std::move(v)) {}
};

// sigmoid(params): the soft mask itself.
Matrix2D fixed_learnable_mask(const LearnableMaskParams& params);

// log(sigmoid(params) + eps): the additive logit bias the captioner applies
// on the visual-visual block.
Matrix2D soft_mask_bias(const LearnableMaskParams& params, double eps);

// Text rendering of a mask as a portable graymap (P2), selected = white.
std::string mask_to_pgm(const MaskMatrix& m);

}  // namespace adacap
