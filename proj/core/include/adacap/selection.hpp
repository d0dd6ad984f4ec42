// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "adacap/rng.hpp"
#include "adacap/scoring.hpp"

namespace adacap {

struct SelectionConfig {
  int small_budget = 4;    // frame budget of the small module
  int large_budget = 16;   // frame budget of the large module
  double temperature = 1.0;
  bool deterministic = false;  // noise off; argmax with lowest-index tie-break
  int max_while_iters = 0;     // 0 means 50 * small_budget

  int effective_while_cap() const {
    return max_while_iters > 0 ? max_while_iters : 50 * small_budget;
  }
  void validate() const;
};

enum class ModuleChoice { kSmall, kLarge };

// Exactly one of the two weights is 1, the other 0.
struct LossGate {
  double large = 0.0;
  double small = 0.0;
};

struct SelectionOutcome {
  std::vector<int> frame_set;     // distinct drawn frame indices, sorted
  std::vector<int> final_frames;  // frames fed to the chosen module, sorted
  std::vector<std::pair<int, int>> token_set;  // distinct (frame, token) pairs, sorted
  ModuleChoice module = ModuleChoice::kLarge;
  LossGate gate;
};

const char* module_name(ModuleChoice m);

// One hard draw: argmax_k (log w_k + g_k) / tau. Zero weights are never
// selected (log 0 treated as -inf). Deterministic mode uses g = 0 and breaks
// ties toward the lowest index. Throws when all weights are zero.
int gumbel_select(std::span<const double> weights, RngState& rng, const SelectionConfig& cfg);

// The soft relaxation softmax((log w + g) / tau); diagnostics only, the
// routing path uses hard selection.
std::vector<double> gumbel_soft(std::span<const double> weights, std::span<const double> noise,
                                double tau);

// large_budget independent draws over frame scores; the distinct indices.
std::vector<int> select_frames(const SignificanceMap& sig, RngState& rng,
                               const SelectionConfig& cfg);

// |frame_set| <= small_budget selects the small module with gate (0,1);
// otherwise the large module with gate (1,0).
std::pair<ModuleChoice, LossGate> choose_module(const std::vector<int>& frame_set,
                                                const SelectionConfig& cfg);

// Keeps drawing until exactly small_budget distinct frames are held, then
// sorts. After the iteration cap (and immediately in deterministic mode) the
// remaining slots are filled with the highest-scoring unselected frames.
std::vector<int> complete_frames(const std::vector<int>& frame_set, const SignificanceMap& sig,
                                 RngState& rng, const SelectionConfig& cfg);

// large_budget * tokens_per_frame draws over the flattened token scores; the
// distinct (frame, token) pairs.
std::vector<std::pair<int, int>> select_tokens(const SignificanceMap& sig, RngState& rng,
                                               const SelectionConfig& cfg);

// Full pipeline: select_frames -> choose_module -> (complete_frames) ->
// select_tokens. For the large module final_frames is all frame indices.
SelectionOutcome run_selection(const SignificanceMap& sig, RngState& rng,
                               const SelectionConfig& cfg);

}  // namespace adacap
