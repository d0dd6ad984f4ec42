// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adacap/captioner.hpp"
#include "adacap/dataset.hpp"
#include "adacap/metrics.hpp"
#include "adacap/selection.hpp"

namespace adacap {

enum class MaskMode { kNone, kFixedLearnable, kAdaptive };
enum class RoutingMode { kMams, kAlwaysLarge, kAlwaysSmall, kSwappedRule, kInvertedScore };

const char* mask_mode_name(MaskMode m);
const char* routing_mode_name(RoutingMode m);
MaskMode parse_mask_mode(const std::string& s);
RoutingMode parse_routing_mode(const std::string& s);

struct ExperimentConfig {
  std::string preset = "mams";
  std::uint64_t seed = 1;
  ModelConfig model;
  SelectionConfig selection;
  MaskMode mask_mode = MaskMode::kAdaptive;
  RoutingMode routing = RoutingMode::kMams;
  int epochs = 30;
  int dataset_videos = 400;
  double high_fraction = 0.5;
  double lr = 0.05;
  bool full_batch = false;
  int eval_every = 0;  // 0: evaluate only after the last epoch
  // Three-candidate ablation: adds a mid module; two-stage selection rule.
  bool three_candidates = false;
  int mid_budget = 8;
  DataConfig data;

  void validate() const;
};

std::vector<std::string> preset_names();
ExperimentConfig preset_config(const std::string& name);

// Flat key=value text config: starts from the file's `preset` (or the given
// fallback) and applies overrides line by line. '#' starts a comment.
ExperimentConfig load_config_file(const std::string& path,
                                  const std::string& fallback_preset = "mams");
void save_config_file(const ExperimentConfig& cfg, const std::string& path);

// One per-video record of what the selector decided.
struct AuditRecord {
  int video_id = 0;
  int frame_set_size = 0;
  std::string module;
  int token_set_size = 0;
  bool high_dynamics = false;
};

std::string audit_csv_header();
std::string audit_to_csv_line(const AuditRecord& r);

// What the routing layer decided for one video (covers every routing mode
// and the three-candidate composition).
struct RoutingDecision {
  int module_index = 0;
  std::vector<int> frame_set;
  std::vector<int> final_frames;
  std::vector<std::pair<int, int>> token_set;
  LossGate gate;  // meaningful for the two-module configurations
};

struct EvalResult {
  MetricsReport metrics;
  std::vector<AuditRecord> audit;
  double routing_rate_high = 0.0;  // large-module rate on high-dynamics videos
  double routing_rate_low = 0.0;   // ... on low-dynamics videos
  std::vector<std::vector<int>> decoded;  // per video, word ids
};

struct TrainResult {
  std::vector<MetricsReport> epoch_reports;
  EvalResult final_eval;
};

std::unique_ptr<CaptionModel> build_model(const ExperimentConfig& cfg);

// Significance scoring + routing for one video; `sig` is computed from the
// model's scoring pass (with the inverted-score mode applied when set).
SignificanceMap video_significance(CaptionModel& model, const TokenGrid& grid,
                                   RoutingMode routing);
RoutingDecision route_video(const CaptionModel& model, const SignificanceMap& sig, RngState& rng,
                            const ExperimentConfig& cfg);

// Full training loop per the configured preset; reports one metrics record
// per epoch (BLEU on eval epochs) and returns the final deterministic eval.
// Throws after writing a diagnostic dump if a loss turns non-finite.
TrainResult train_experiment(const ExperimentConfig& cfg, const Dataset& ds,
                             CaptionModel& model, std::ostream* log = nullptr,
                             const std::string& dump_dir = "");

// Deterministic-mode selection + greedy decoding + metrics over a dataset.
EvalResult evaluate(CaptionModel& model, const Dataset& ds, const ExperimentConfig& cfg);

struct SweepRow {
  std::string label;
  int frames = 0;
  std::uint64_t seed = 0;
  BleuScores bleu{};
  double routing_rate = 0.0;
};

// Trains stand-alone large baselines at each frame count plus the adaptive
// configuration at the largest, per seed; one row per (arm, seed).
std::vector<SweepRow> frame_sweep(const ExperimentConfig& base, const Dataset& ds,
                                  const std::vector<int>& frame_counts,
                                  const std::vector<std::uint64_t>& seeds,
                                  std::ostream* log = nullptr);

std::string sweep_csv(const std::vector<SweepRow>& rows);

// Rebuilds a dataset view whose videos are subsampled to `frames` frames.
Dataset dataset_with_frames(const Dataset& ds, int frames);

}  // namespace adacap
