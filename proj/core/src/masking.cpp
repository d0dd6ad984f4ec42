// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "adacap/masking.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "adacap/kernels.hpp"

namespace adacap {

bool MaskMatrix::symmetric() const {
  for (int x = 0; x < n; ++x) {
    for (int y = x + 1; y < n; ++y) {
      if (at(x, y) != at(y, x)) return false;
    }
  }
  return true;
}

bool MaskMatrix::unit_diagonal() const {
  for (int x = 0; x < n; ++x) {
    if (at(x, x) != 1) return false;
  }
  return true;
}

MaskMatrix build_mask_large(const std::vector<std::pair<int, int>>& token_set, int frames,
                            int tokens_per_frame) {
  const int n = frames * tokens_per_frame;
  MaskMatrix m;
  m.n = n;
  m.bits.assign(std::size_t(n) * n, 0);
  m.index_map.reserve(n);
  for (int i = 0; i < frames; ++i) {
    for (int p = 0; p < tokens_per_frame; ++p) m.index_map.emplace_back(i, p);
  }
  std::vector<std::uint8_t> selected(n, 0);
  for (const auto& [i, p] : token_set) {
    if (i < 0 || i >= frames || p < 0 || p >= tokens_per_frame) {
      throw std::out_of_range("build_mask_large: token index out of range");
    }
    selected[i * tokens_per_frame + p] = 1;
  }
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      m.set(x, y, x == y ? 1 : (selected[x] && selected[y] ? 1 : 0));
    }
  }
  return m;
}

MaskMatrix restrict_mask_small(const MaskMatrix& large, const std::vector<int>& final_frames,
                               int tokens_per_frame) {
  std::vector<int> keep;
  keep.reserve(final_frames.size() * tokens_per_frame);
  for (int frame : final_frames) {
    int base = frame * tokens_per_frame;
    if (base < 0 || base + tokens_per_frame > large.n) {
      throw std::out_of_range("restrict_mask_small: frame index out of range");
    }
    for (int p = 0; p < tokens_per_frame; ++p) keep.push_back(base + p);
  }
  MaskMatrix m;
  m.n = int(keep.size());
  m.bits.assign(std::size_t(m.n) * m.n, 0);
  m.index_map.reserve(m.n);
  for (int idx : keep) m.index_map.push_back(large.index_map[idx]);
  for (int x = 0; x < m.n; ++x) {
    for (int y = 0; y < m.n; ++y) m.set(x, y, large.at(keep[x], keep[y]));
  }
  return m;
}

MaskMatrix full_mask(int frames, int tokens_per_frame) {
  const int n = frames * tokens_per_frame;
  MaskMatrix m;
  m.n = n;
  m.bits.assign(std::size_t(n) * n, 1);
  m.index_map.reserve(n);
  for (int i = 0; i < frames; ++i) {
    for (int p = 0; p < tokens_per_frame; ++p) m.index_map.emplace_back(i, p);
  }
  return m;
}

Matrix2D apply_mask(const Matrix2D& attention_logits, const MaskMatrix& m, int text_len) {
  const int s = attention_logits.rows();
  if (attention_logits.cols() != s) throw std::invalid_argument("apply_mask: logits not square");
  if (text_len < 0 || text_len + m.n != s) {
    throw std::invalid_argument("apply_mask: sequence does not split into text + visual");
  }
  Matrix2D out = attention_logits;
  for (int x = 0; x < m.n; ++x) {
    for (int y = 0; y < m.n; ++y) {
      if (m.at(x, y) == 0) out(text_len + x, text_len + y) = kMaskedLogit;
    }
  }
  return out;
}

Matrix2D fixed_learnable_mask(const LearnableMaskParams& params) {
  Matrix2D out = params.values;
  for (double& v : out.flat()) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

Matrix2D soft_mask_bias(const LearnableMaskParams& params, double eps) {
  Matrix2D out = fixed_learnable_mask(params);
  for (double& v : out.flat()) v = std::log(v + eps);
  return out;
}

std::string mask_to_pgm(const MaskMatrix& m) {
  std::ostringstream os;
  os << "P2\n" << m.n << " " << m.n << "\n255\n";
  for (int x = 0; x < m.n; ++x) {
    for (int y = 0; y < m.n; ++y) {
      os << (m.at(x, y) ? 255 : 0);
      os << (y + 1 == m.n ? '\n' : ' ');
    }
  }
  return os.str();
}

}  // namespace adacap
