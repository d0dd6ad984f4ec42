// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "adacap/rng.hpp"
#include "adacap/selection.hpp"

using namespace adacap;

namespace {

SignificanceMap map_from_frame_scores(const std::vector<double>& f, int tokens_per_frame = 1) {
  SignificanceMap sig;
  sig.token_scores = Matrix2D(int(f.size()), tokens_per_frame);
  sig.frame_scores = f;
  for (int i = 0; i < int(f.size()); ++i) {
    for (int p = 0; p < tokens_per_frame; ++p) {
      sig.token_scores(i, p) = f[i] / tokens_per_frame;
    }
  }
  return sig;
}

SelectionConfig config(int small, int large, bool deterministic = false, double tau = 1.0) {
  SelectionConfig cfg;
  cfg.small_budget = small;
  cfg.large_budget = large;
  cfg.temperature = tau;
  cfg.deterministic = deterministic;
  return cfg;
}

}  // namespace

TEST_CASE("deterministic gumbel select is argmax with low-index ties") {
  RngState rng(1);
  SelectionConfig cfg = config(1, 4, /*deterministic=*/true);
  std::vector<double> w{0.1, 0.7, 0.2};
  CHECK(gumbel_select(w, rng, cfg) == 1);
  std::vector<double> tie{0.5, 0.5};
  CHECK(gumbel_select(tie, rng, cfg) == 0);
}

TEST_CASE("hard gumbel selection samples the categorical exactly") {
  RngState rng(2024);
  SelectionConfig cfg = config(1, 4);
  std::vector<double> w{0.25, 0.25, 0.25, 0.25};
  const int draws = 100000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < draws; ++i) counts[gumbel_select(w, rng, cfg)]++;
  for (int k = 0; k < 4; ++k) {
    CHECK(std::abs(double(counts[k]) / draws - 0.25) < 0.01);
  }
}

TEST_CASE("zero weights are never selected and all-zero throws") {
  RngState rng(5);
  SelectionConfig cfg = config(1, 4);
  std::vector<double> w{0.0, 0.6, 0.4, 0.0};
  for (int i = 0; i < 2000; ++i) {
    int k = gumbel_select(w, rng, cfg);
    CHECK((k == 1 || k == 2));
  }
  std::vector<double> zeros{0.0, 0.0};
  CHECK_THROWS(gumbel_select(zeros, rng, cfg));
}

TEST_CASE("temperature shapes the soft relaxation but not the hard argmax") {
  std::vector<double> w{0.6, 0.3, 0.1};
  std::vector<double> noise{0.05, -0.2, 0.1};
  std::vector<double> hot = gumbel_soft(w, noise, 100.0);
  for (double p : hot) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-2));
  std::vector<double> cold = gumbel_soft(w, noise, 1e-3);
  int soft_argmax = int(std::max_element(cold.begin(), cold.end()) - cold.begin());
  // Hard selection from the same perturbed logits.
  int hard = 0;
  double best = -1e300;
  for (int k = 0; k < 3; ++k) {
    double s = std::log(w[k]) + noise[k];
    if (s > best) {
      best = s;
      hard = k;
    }
  }
  CHECK(soft_argmax == hard);
  CHECK(cold[soft_argmax] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("deterministic frame selection collapses to a single index") {
  RngState rng(3);
  SelectionConfig cfg = config(2, 4, /*deterministic=*/true);
  SignificanceMap sig = map_from_frame_scores({0.1, 0.2, 0.4, 0.3});
  std::vector<int> s = select_frames(sig, rng, cfg);
  CHECK(s == std::vector<int>{2});
}

TEST_CASE("a dominant frame keeps the selected set small") {
  RngState rng(17);
  SelectionConfig cfg = config(2, 4, false, 0.1);
  SignificanceMap sig = map_from_frame_scores({0.97, 0.01, 0.01, 0.01});
  const int reps = 10000;
  long total = 0;
  for (int r = 0; r < reps; ++r) total += long(select_frames(sig, rng, cfg).size());
  CHECK(double(total) / reps < 2.0);
}

TEST_CASE("uniform scores hit the distinct-draw expectation") {
  RngState rng(29);
  SelectionConfig cfg = config(4, 16);
  SignificanceMap sig = map_from_frame_scores(std::vector<double>(16, 1.0 / 16));
  const int reps = 10000;
  double total = 0;
  for (int r = 0; r < reps; ++r) total += double(select_frames(sig, rng, cfg).size());
  double expected = 16.0 * (1.0 - std::pow(15.0 / 16.0, 16.0));
  CHECK(std::abs(total / reps - expected) < 0.2);
}

TEST_CASE("module choice thresholds exactly at the small budget") {
  SelectionConfig cfg = config(3, 8);
  {
    auto [m, gate] = choose_module({0, 1, 2}, cfg);
    CHECK(m == ModuleChoice::kSmall);
    CHECK(gate.large == 0.0);
    CHECK(gate.small == 1.0);
  }
  {
    auto [m, gate] = choose_module({0, 1, 2, 3}, cfg);
    CHECK(m == ModuleChoice::kLarge);
    CHECK(gate.large == 1.0);
    CHECK(gate.small == 0.0);
  }
  {
    auto [m, gate] = choose_module({5}, cfg);
    CHECK(m == ModuleChoice::kSmall);
  }
  CHECK_THROWS(choose_module({}, cfg));
}

TEST_CASE("complete_frames pads to the small budget") {
  SignificanceMap sig = map_from_frame_scores({0.05, 0.5, 0.05, 0.3, 0.1});

  SUBCASE("already full returns the sorted set") {
    RngState rng(4);
    SelectionConfig cfg = config(3, 5);
    std::vector<int> out = complete_frames({4, 0, 2}, sig, rng, cfg);
    CHECK(out == std::vector<int>{0, 2, 4});
  }

  SUBCASE("deterministic fill takes the top remaining scores") {
    RngState rng(4);
    SelectionConfig cfg = config(3, 5, /*deterministic=*/true);
    std::vector<int> out = complete_frames({1}, sig, rng, cfg);
    // argmax frame 1 plus the two best others (3 then 4).
    CHECK(out == std::vector<int>{1, 3, 4});
  }

  SUBCASE("stochastic completion always lands exactly on budget") {
    SelectionConfig cfg = config(3, 5);
    RngState rng(99);
    for (int trial = 0; trial < 10000; ++trial) {
      std::vector<int> seed_set{1};
      std::vector<int> out = complete_frames(seed_set, sig, rng, cfg);
      CHECK(int(out.size()) == cfg.small_budget);
      CHECK(std::is_sorted(out.begin(), out.end()));
      CHECK(std::includes(out.begin(), out.end(), seed_set.begin(), seed_set.end()));
    }
  }

  SUBCASE("cap falls back to top scores when support is too narrow") {
    // Only two frames have mass; the third slot must come from the fill.
    SignificanceMap narrow = map_from_frame_scores({0.0, 0.6, 0.0, 0.4, 0.0});
    SelectionConfig cfg = config(3, 5);
    cfg.max_while_iters = 10;
    RngState rng(7);
    std::vector<int> out = complete_frames({1}, narrow, rng, cfg);
    CHECK(int(out.size()) == 3);
    CHECK(std::count(out.begin(), out.end(), 1) == 1);
    CHECK(std::count(out.begin(), out.end(), 3) == 1);
  }
}

TEST_CASE("token selection over the flattened grid") {
  SelectionConfig cfg = config(2, 4);

  SUBCASE("deterministic mode selects one pair") {
    SignificanceMap sig;
    sig.token_scores = Matrix2D::from_rows({{0.1, 0.2}, {0.25, 0.05}, {0.1, 0.1}, {0.1, 0.1}});
    sig.frame_scores = {0.3, 0.3, 0.2, 0.2};
    SelectionConfig det = cfg;
    det.deterministic = true;
    RngState rng(8);
    auto tokens = select_tokens(sig, rng, det);
    CHECK(tokens == std::vector<std::pair<int, int>>{{1, 0}});
  }

  SUBCASE("uniform grid matches the closed-form distinct count") {
    const int frames = 4, per = 4, n = frames * per;
    SignificanceMap sig;
    sig.token_scores = Matrix2D(frames, per, 1.0 / n);
    sig.frame_scores.assign(frames, double(per) / n);
    RngState rng(55);
    const int reps = 4000;
    double total = 0.0;
    for (int r = 0; r < reps; ++r) total += double(select_tokens(sig, rng, cfg).size());
    double expected = n * (1.0 - std::pow(1.0 - 1.0 / n, n));
    CHECK(std::abs(total / reps - expected) < 0.25);
  }

  SUBCASE("zero-score tokens are never drawn") {
    SignificanceMap sig;
    sig.token_scores = Matrix2D::from_rows({{0.5, 0.0}, {0.0, 0.5}, {0.0, 0.0}, {0.0, 0.0}});
    sig.frame_scores = {0.5, 0.5, 0.0, 0.0};
    RngState rng(66);
    for (int trial = 0; trial < 500; ++trial) {
      for (auto [i, p] : select_tokens(sig, rng, cfg)) {
        CHECK(sig.token_scores(i, p) > 0.0);
      }
    }
  }
}

TEST_CASE("full selection run keeps the routing and gate invariants") {
  RngState rng(404);
  SelectionConfig cfg = config(4, 16);
  RngState score_rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    // Random normalized scores, occasionally spiky.
    std::vector<double> f(16);
    double total = 0.0;
    for (double& v : f) {
      v = std::pow(score_rng.uniform_open01(), score_rng.uniform_int(2) == 0 ? 1.0 : 6.0);
      total += v;
    }
    for (double& v : f) v /= total;
    SignificanceMap sig = map_from_frame_scores(f, 2);

    SelectionOutcome out = run_selection(sig, rng, cfg);
    bool small = out.module == ModuleChoice::kSmall;
    CHECK(small == (int(out.frame_set.size()) <= cfg.small_budget));
    CHECK(out.gate.large + out.gate.small == 1.0);
    CHECK((out.gate.large == 1.0 || out.gate.small == 1.0));
    if (small) {
      CHECK(int(out.final_frames.size()) == cfg.small_budget);
      CHECK(std::includes(out.final_frames.begin(), out.final_frames.end(),
                          out.frame_set.begin(), out.frame_set.end()));
    } else {
      CHECK(int(out.final_frames.size()) == cfg.large_budget);
    }
    CHECK(std::is_sorted(out.final_frames.begin(), out.final_frames.end()));
    CHECK(!out.token_set.empty());
  }
}

TEST_CASE("deterministic selection is a pure function of scores and config") {
  SelectionConfig cfg = config(4, 16, /*deterministic=*/true);
  std::vector<double> f(16);
  RngState score_rng(31);
  double total = 0.0;
  for (double& v : f) {
    v = score_rng.uniform_open01();
    total += v;
  }
  for (double& v : f) v /= total;
  SignificanceMap sig = map_from_frame_scores(f, 3);
  RngState r1(1), r2(2);  // different rngs must not matter
  SelectionOutcome a = run_selection(sig, r1, cfg);
  SelectionOutcome b = run_selection(sig, r2, cfg);
  CHECK(a.frame_set == b.frame_set);
  CHECK(a.final_frames == b.final_frames);
  CHECK(a.token_set == b.token_set);
  CHECK((a.module == b.module));
}

TEST_CASE("selection config validation") {
  CHECK_THROWS(config(4, 4).validate());
  CHECK_THROWS(config(0, 4).validate());
  SelectionConfig bad_tau = config(2, 4);
  bad_tau.temperature = 0.0;
  CHECK_THROWS(bad_tau.validate());
  SelectionConfig low_cap = config(2, 4);
  low_cap.max_while_iters = 1;
  CHECK_THROWS(low_cap.validate());
  CHECK(config(2, 4).effective_while_cap() == 100);
}
