// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "adacap/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace adacap {

void SelectionConfig::validate() const {
  if (small_budget < 1 || small_budget >= large_budget) {
    throw std::invalid_argument("SelectionConfig: requires 1 <= small_budget < large_budget");
  }
  if (temperature <= 0.0) throw std::invalid_argument("SelectionConfig: temperature must be > 0");
  if (max_while_iters != 0 && max_while_iters < small_budget) {
    throw std::invalid_argument("SelectionConfig: max_while_iters must be >= small_budget");
  }
}

const char* module_name(ModuleChoice m) {
  return m == ModuleChoice::kSmall ? "small" : "large";
}

int gumbel_select(std::span<const double> weights, RngState& rng, const SelectionConfig& cfg) {
  if (weights.empty()) throw std::invalid_argument("gumbel_select: empty weights");
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < weights.size(); ++k) {
    double w = weights[k];
    if (w < 0.0) throw std::invalid_argument("gumbel_select: negative weight");
    // log(0) = -inf keeps zero-probability entries unselectable even after
    // noise is added.
    double logit = std::log(w);
    double g = cfg.deterministic ? 0.0 : rng.gumbel();
    double score = (logit + g) / cfg.temperature;
    if (score > best_score) {
      best_score = score;
      best = int(k);
    }
  }
  if (best < 0 || weights[best] == 0.0) throw std::invalid_argument("gumbel_select: all weights zero");
  return best;
}

std::vector<double> gumbel_soft(std::span<const double> weights, std::span<const double> noise,
                                double tau) {
  if (weights.size() != noise.size()) throw std::invalid_argument("gumbel_soft: size mismatch");
  if (tau <= 0.0) throw std::invalid_argument("gumbel_soft: tau must be > 0");
  std::vector<double> scores(weights.size());
  double maxv = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < weights.size(); ++k) {
    scores[k] = (std::log(weights[k]) + noise[k]) / tau;
    maxv = std::max(maxv, scores[k]);
  }
  if (!std::isfinite(maxv)) throw std::invalid_argument("gumbel_soft: all weights zero");
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - maxv);
    sum += s;
  }
  for (double& s : scores) s /= sum;
  return scores;
}

namespace {

// Highest-score-first fill order over frames not yet selected; ties go to
// the lowest index.
std::vector<int> top_score_order(const SignificanceMap& sig) {
  std::vector<int> order(sig.frames());
  for (int i = 0; i < sig.frames(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return sig.frame_scores[a] > sig.frame_scores[b];
  });
  return order;
}

}  // namespace

std::vector<int> select_frames(const SignificanceMap& sig, RngState& rng,
                               const SelectionConfig& cfg) {
  cfg.validate();
  if (sig.frames() != cfg.large_budget) {
    throw std::invalid_argument("select_frames: frame count does not match large budget");
  }
  std::vector<bool> seen(sig.frames(), false);
  for (int draw = 0; draw < cfg.large_budget; ++draw) {
    seen[gumbel_select(sig.frame_scores, rng, cfg)] = true;
  }
  std::vector<int> out;
  for (int i = 0; i < sig.frames(); ++i) {
    if (seen[i]) out.push_back(i);
  }
  return out;
}

std::pair<ModuleChoice, LossGate> choose_module(const std::vector<int>& frame_set,
                                                const SelectionConfig& cfg) {
  if (frame_set.empty()) throw std::invalid_argument("choose_module: empty frame set");
  if (int(frame_set.size()) <= cfg.small_budget) {
    return {ModuleChoice::kSmall, LossGate{0.0, 1.0}};
  }
  return {ModuleChoice::kLarge, LossGate{1.0, 0.0}};
}

std::vector<int> complete_frames(const std::vector<int>& frame_set, const SignificanceMap& sig,
                                 RngState& rng, const SelectionConfig& cfg) {
  cfg.validate();
  if (int(frame_set.size()) > cfg.small_budget) {
    throw std::invalid_argument("complete_frames: frame set already exceeds small budget");
  }
  std::vector<bool> held(sig.frames(), false);
  int count = 0;
  for (int i : frame_set) {
    if (i < 0 || i >= sig.frames()) throw std::out_of_range("complete_frames: frame out of range");
    if (!held[i]) {
      held[i] = true;
      ++count;
    }
  }
  if (!cfg.deterministic) {
    int iters = 0;
    int cap = cfg.effective_while_cap();
    while (count < cfg.small_budget && iters < cap) {
      int pick = gumbel_select(sig.frame_scores, rng, cfg);
      if (!held[pick]) {
        held[pick] = true;
        ++count;
      }
      ++iters;
    }
  }
  // Deterministic completion, and the fallback once the cap is reached:
  // highest-score unselected frames first.
  if (count < cfg.small_budget) {
    for (int i : top_score_order(sig)) {
      if (count == cfg.small_budget) break;
      if (!held[i]) {
        held[i] = true;
        ++count;
      }
    }
  }
  std::vector<int> out;
  for (int i = 0; i < sig.frames(); ++i) {
    if (held[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::pair<int, int>> select_tokens(const SignificanceMap& sig, RngState& rng,
                                               const SelectionConfig& cfg) {
  cfg.validate();
  auto flat = sig.flat_token_scores();
  int n = int(flat.size());
  std::vector<bool> seen(n, false);
  for (int draw = 0; draw < n; ++draw) {
    seen[gumbel_select(flat, rng, cfg)] = true;
  }
  std::vector<std::pair<int, int>> out;
  for (int idx = 0; idx < n; ++idx) {
    if (seen[idx]) out.emplace_back(idx / sig.tokens_per_frame(), idx % sig.tokens_per_frame());
  }
  return out;
}

SelectionOutcome run_selection(const SignificanceMap& sig, RngState& rng,
                               const SelectionConfig& cfg) {
  SelectionOutcome outcome;
  outcome.frame_set = select_frames(sig, rng, cfg);
  auto [module, gate] = choose_module(outcome.frame_set, cfg);
  outcome.module = module;
  outcome.gate = gate;
  if (module == ModuleChoice::kSmall) {
    outcome.final_frames = complete_frames(outcome.frame_set, sig, rng, cfg);
  } else {
    outcome.final_frames.resize(sig.frames());
    for (int i = 0; i < sig.frames(); ++i) outcome.final_frames[i] = i;
  }
  outcome.token_set = select_tokens(sig, rng, cfg);
  return outcome;
}

}  // namespace adacap
