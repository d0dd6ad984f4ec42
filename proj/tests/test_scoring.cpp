// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "adacap/kernels.hpp"
#include "adacap/rng.hpp"
#include "adacap/scoring.hpp"

using namespace adacap;

namespace {

TokenGrid make_grid(int frames, int tokens_per_frame, int width) {
  TokenGrid g;
  g.frames = frames;
  g.tokens_per_frame = tokens_per_frame;
  g.width = width;
  g.tokens = Matrix2D(frames * tokens_per_frame, width);
  g.cls_attention = Matrix2D(1, frames * tokens_per_frame);
  return g;
}

// Direct-arithmetic oracle for the significance definition.
SignificanceMap significance_oracle(const TokenGrid& g) {
  int n = g.token_count();
  std::vector<double> prod(n);
  double total = 0.0;
  for (int idx = 0; idx < n; ++idx) {
    double norm = 0.0;
    for (double v : g.tokens.row_span(idx)) norm += v * v;
    prod[idx] = g.cls_attention(0, idx) * std::sqrt(norm);
    total += prod[idx];
  }
  SignificanceMap sig;
  sig.token_scores = Matrix2D(g.frames, g.tokens_per_frame);
  sig.frame_scores.assign(g.frames, 0.0);
  for (int i = 0; i < g.frames; ++i) {
    for (int p = 0; p < g.tokens_per_frame; ++p) {
      sig.token_scores(i, p) = prod[g.flat_index(i, p)] / total;
      sig.frame_scores[i] += sig.token_scores(i, p);
    }
  }
  return sig;
}

}  // namespace

TEST_CASE("uniform attention and equal norms give the uniform map") {
  TokenGrid g = make_grid(4, 3, 2);
  for (int idx = 0; idx < 12; ++idx) {
    g.tokens(idx, 0) = 1.0;
    g.cls_attention(0, idx) = 1.0 / 12.0;
  }
  SignificanceMap sig = token_significance(g);
  for (int i = 0; i < 4; ++i) {
    CHECK(sig.frame_scores[i] == doctest::Approx(0.25).epsilon(1e-12));
    for (int p = 0; p < 3; ++p) {
      CHECK(sig.token_scores(i, p) == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("worked 2x2 example matches the direct arithmetic oracle") {
  TokenGrid g = make_grid(2, 2, 1);
  double attn[] = {0.1, 0.2, 0.3, 0.4};
  double norm[] = {1.0, 1.0, 2.0, 2.0};
  for (int idx = 0; idx < 4; ++idx) {
    g.cls_attention(0, idx) = attn[idx];
    g.tokens(idx, 0) = norm[idx];
  }
  SignificanceMap sig = token_significance(g);
  SignificanceMap oracle = significance_oracle(g);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(sig.frame_scores[i] - oracle.frame_scores[i]) < 1e-12);
    for (int p = 0; p < 2; ++p) {
      CHECK(std::abs(sig.token_scores(i, p) - oracle.token_scores(i, p)) < 1e-12);
    }
  }
  CHECK(sig.token_scores(0, 0) == doctest::Approx(0.05882).epsilon(1e-3));
  CHECK(sig.token_scores(0, 1) == doctest::Approx(0.11765).epsilon(1e-3));
  CHECK(sig.token_scores(1, 0) == doctest::Approx(0.35294).epsilon(1e-3));
  CHECK(sig.token_scores(1, 1) == doctest::Approx(0.47059).epsilon(1e-3));
  CHECK(sig.frame_scores[0] == doctest::Approx(0.17647).epsilon(1e-3));
  CHECK(sig.frame_scores[1] == doctest::Approx(0.82353).epsilon(1e-3));
}

TEST_CASE("single supported token takes all the mass") {
  TokenGrid g = make_grid(3, 2, 2);
  for (int idx = 0; idx < 6; ++idx) g.tokens(idx, 0) = 2.0;
  g.cls_attention(0, g.flat_index(1, 1)) = 0.7;
  SignificanceMap sig = token_significance(g);
  CHECK(sig.token_scores(1, 1) == 1.0);
  CHECK(sig.frame_scores[1] == 1.0);
  CHECK(sig.frame_scores[0] == 0.0);
}

TEST_CASE("degenerate significance throws; the fallback maps to uniform") {
  TokenGrid g = make_grid(2, 2, 2);  // all-zero attention and tokens
  CHECK_THROWS_WITH(token_significance(g), "degenerate significance: uniform fallback required");
  SignificanceMap sig = token_significance_or_uniform(g);
  for (int idx = 0; idx < 4; ++idx) CHECK(sig.token_scores(idx / 2, idx % 2) == 0.25);
}

TEST_CASE("significance invariants on random grids") {
  RngState rng(97);
  for (int trial = 0; trial < 200; ++trial) {
    int frames = 1 + rng.uniform_int(8);
    int per = 1 + rng.uniform_int(4);
    int width = 1 + rng.uniform_int(6);
    TokenGrid g = make_grid(frames, per, width);
    for (double& v : g.tokens.flat()) v = 2.0 * (rng.uniform_open01() - 0.5);
    double remaining = 1.0;
    for (int idx = 0; idx < g.token_count(); ++idx) {
      double a = rng.uniform_open01() * remaining * 0.5;
      g.cls_attention(0, idx) = a;
      remaining -= a;
    }
    SignificanceMap sig = token_significance(g);

    double total = 0.0;
    for (double t : sig.token_scores.flat()) {
      CHECK(t >= 0.0);
      total += t;
    }
    CHECK(std::abs(total - 1.0) < 1e-10);

    // Frame scores equal the row sums exactly (same summation order).
    for (int i = 0; i < frames; ++i) {
      double row = 0.0;
      for (int p = 0; p < per; ++p) row += sig.token_scores(i, p);
      CHECK(sig.frame_scores[i] == row);
    }

    // Scaling every token by a common positive factor cancels.
    TokenGrid scaled = g;
    for (double& v : scaled.tokens.flat()) v *= 3.7;
    SignificanceMap sig2 = token_significance(scaled);
    for (int idx = 0; idx < g.token_count(); ++idx) {
      CHECK(std::abs(sig.token_scores(idx / per, idx % per) -
                     sig2.token_scores(idx / per, idx % per)) < 1e-12);
    }
  }
}

TEST_CASE("raising one attention value raises only that score") {
  TokenGrid g = make_grid(2, 2, 1);
  for (int idx = 0; idx < 4; ++idx) {
    g.tokens(idx, 0) = 1.0 + idx;
    g.cls_attention(0, idx) = 0.1 + 0.05 * idx;
  }
  SignificanceMap before = token_significance(g);
  g.cls_attention(0, 2) += 0.2;
  SignificanceMap after = token_significance(g);
  for (int idx = 0; idx < 4; ++idx) {
    double b = before.token_scores(idx / 2, idx % 2);
    double a = after.token_scores(idx / 2, idx % 2);
    if (idx == 2) {
      CHECK(a > b);
    } else {
      CHECK(a < b);
    }
  }
}

TEST_CASE("inverted significance renormalizes one minus the scores") {
  TokenGrid g = make_grid(2, 2, 1);
  double attn[] = {0.4, 0.3, 0.2, 0.1};
  for (int idx = 0; idx < 4; ++idx) {
    g.cls_attention(0, idx) = attn[idx];
    g.tokens(idx, 0) = 1.0;
  }
  SignificanceMap sig = token_significance(g);
  SignificanceMap inv = invert_significance(sig);
  double total = 0.0;
  for (double t : inv.token_scores.flat()) total += t;
  CHECK(std::abs(total - 1.0) < 1e-12);
  // Ordering flips.
  CHECK(inv.token_scores(0, 0) < inv.token_scores(1, 1));
}

namespace {

struct ScoreFixture {
  Matrix2D wq, wk;
  Matrix2D gamma_row, beta_row, bq_row, bk_row;
  ScoreAttentionParams view(int heads) {
    ScoreAttentionParams p;
    p.ln_gamma = gamma_row.row_span(0);
    p.ln_beta = beta_row.row_span(0);
    p.ln_eps = 1e-5;
    p.wq = &wq;
    p.bq = bq_row.row_span(0);
    p.wk = &wk;
    p.bk = bk_row.row_span(0);
    p.heads = heads;
    return p;
  }
};

ScoreFixture identity_fixture(int d) {
  ScoreFixture f;
  f.wq = Matrix2D(d, d);
  f.wk = Matrix2D(d, d);
  for (int i = 0; i < d; ++i) {
    f.wq(i, i) = 1.0;
    f.wk(i, i) = 1.0;
  }
  f.gamma_row = Matrix2D(1, d, 1.0);
  f.beta_row = Matrix2D(1, d, 0.0);
  f.bq_row = Matrix2D(1, d, 0.0);
  f.bk_row = Matrix2D(1, d, 0.0);
  return f;
}

}  // namespace

TEST_CASE("score pass over identical tokens spreads attention evenly") {
  const int d = 4;
  ScoreFixture fix = identity_fixture(d);
  TokenGrid g = make_grid(2, 3, d);
  g.cls_attention = Matrix2D();  // unfilled
  for (int idx = 0; idx < 6; ++idx) {
    g.tokens(idx, 0) = 0.3;
    g.tokens(idx, 2) = -1.1;
  }
  Matrix2D cls = Matrix2D::row({1.0, 0.0, -0.5, 0.25});
  TokenGrid out = score_pass(g, cls, fix.view(1));
  REQUIRE(out.has_attention());
  double first = out.cls_attention(0, 0);
  double sum = 0.0;
  for (int idx = 0; idx < 6; ++idx) {
    CHECK(out.cls_attention(0, idx) == doctest::Approx(first).epsilon(1e-12));
    sum += out.cls_attention(0, idx);
  }
  // The softmax row includes the start token itself, so the visual entries
  // sum to one minus its self-attention weight.
  CHECK(sum < 1.0);
  CHECK(sum > 0.0);
}

TEST_CASE("score pass matches a brute-force attention oracle and finds the planted token") {
  const int d = 4;
  ScoreFixture fix = identity_fixture(d);
  TokenGrid g = make_grid(1, 3, d);
  g.cls_attention = Matrix2D();
  Matrix2D cls = Matrix2D::row({0.9, -0.4, 0.2, 1.4});
  // Token 1 is the planted query-aligned token: identical to the start
  // embedding, so after layer norm its key equals the query exactly.
  double other0[] = {0.1, 0.8, -0.3, 0.2};
  double other2[] = {-0.7, 0.3, 0.9, -0.2};
  for (int c = 0; c < d; ++c) {
    g.tokens(0, c) = other0[c];
    g.tokens(1, c) = cls(0, c);
    g.tokens(2, c) = other2[c];
  }
  TokenGrid out = score_pass(g, cls, fix.view(1));

  // Brute-force oracle over [cls; tokens] with the same parameters.
  auto normalize = [&](std::span<const double> row, std::vector<double>& dst) {
    double mean = 0.0, var = 0.0;
    for (double v : row) mean += v;
    mean /= d;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= d;
    for (int c = 0; c < d; ++c) dst[c] = (row[c] - mean) / std::sqrt(var + 1e-5);
  };
  std::vector<std::vector<double>> normed(4, std::vector<double>(d));
  std::vector<double> cls_row(cls.row_span(0).begin(), cls.row_span(0).end());
  normalize(cls_row, normed[0]);
  for (int j = 0; j < 3; ++j) {
    std::vector<double> row(g.tokens.row_span(j).begin(), g.tokens.row_span(j).end());
    normalize(row, normed[j + 1]);
  }
  std::vector<double> logits(4);
  for (int j = 0; j < 4; ++j) {
    double dot = 0.0;
    for (int c = 0; c < d; ++c) dot += normed[0][c] * normed[j][c];
    logits[j] = dot / std::sqrt(double(d));
  }
  double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double v : logits) denom += std::exp(v - mx);
  for (int j = 0; j < 3; ++j) {
    double expect = std::exp(logits[j + 1] - mx) / denom;
    CHECK(std::abs(out.cls_attention(0, j) - expect) < 1e-12);
  }

  // Planted token wins.
  CHECK(out.cls_attention(0, 1) > out.cls_attention(0, 0));
  CHECK(out.cls_attention(0, 1) > out.cls_attention(0, 2));
}

TEST_CASE("score pass validates dimensions") {
  const int d = 4;
  ScoreFixture fix = identity_fixture(d);
  TokenGrid g = make_grid(1, 2, d);
  Matrix2D bad_cls = Matrix2D::row({1.0, 2.0});
  CHECK_THROWS(score_pass(g, bad_cls, fix.view(1)));
}
