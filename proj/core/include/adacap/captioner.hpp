// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adacap/autodiff.hpp"
#include "adacap/masking.hpp"
#include "adacap/rng.hpp"
#include "adacap/scoring.hpp"
#include "adacap/selection.hpp"

namespace adacap {

struct ModelConfig {
  int width = 64;  // embedding width, divisible by heads
  int heads = 2;
  int layers = 2;  // attention blocks per generation module
  int vocab = 48;
  int max_caption_len = 12;
  int frames_large = 16;
  int frames_small = 4;
  int tokens_per_frame = 4;
  int frame_height = 16;
  int frame_width = 16;
  // Patch grid per frame; patch_rows * patch_cols must equal tokens_per_frame.
  int patch_rows = 2;
  int patch_cols = 2;
  double ln_eps = 1e-5;
  double init_scale = 0.06;        // weight matrices
  double embed_init_scale = 0.30;  // embedding tables
  int pad_id = 0;
  int begin_id = 1;
  int end_id = 2;

  void validate() const;
  int patch_dim() const { return (frame_height / patch_rows) * (frame_width / patch_cols); }
  int visual_tokens_large() const { return frames_large * tokens_per_frame; }
  int visual_tokens_small() const { return frames_small * tokens_per_frame; }
};

// Teacher-forcing view of one caption: inputs start at the begin (CLS) token,
// targets are the inputs shifted left by one, padded to max_caption_len.
struct CaptionBatch {
  std::vector<int> input_ids;
  std::vector<int> target_ids;
  std::vector<double> target_weights;  // 1 for real targets, 0 for padding
};

CaptionBatch make_caption_batch(std::span<const int> words, const ModelConfig& cfg);

// Raw grayscale video, frame-major.
struct VideoFrames {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int f, int r, int c) const {
    return pixels[(std::size_t(f) * height + r) * width + c];
  }
};

// How the visual-visual attention block is restricted in a forward pass.
struct VisualMaskSpec {
  enum class Kind { kNone, kAdaptive, kLearnable };
  Kind kind = Kind::kNone;
  const MaskMatrix* adaptive = nullptr;  // kAdaptive
  Parameter* learnable = nullptr;        // kLearnable; full large-grid size
  // kLearnable only: rows of the large grid visible to this module (empty
  // means all). Used when the small module sees a frame subset.
  std::vector<int> visible_tokens;
  double eps = 1e-6;

  static VisualMaskSpec none() { return {}; }
  static VisualMaskSpec adaptive_mask(const MaskMatrix& m) {
    VisualMaskSpec s;
    s.kind = Kind::kAdaptive;
    s.adaptive = &m;
    return s;
  }
};

struct GatedLoss {
  double large_loss = 0.0;
  double small_loss = 0.0;
  LossGate gate;
  double total = 0.0;
};

// Evaluates only the gated-on branch; the other loss is 0 and its module
// receives no gradient because its graph is never built.
GatedLoss gated_loss(const std::function<double()>& large_loss_fn,
                     const std::function<double()>& small_loss_fn, const LossGate& gate);

class ParamRegistry {
 public:
  void add(Parameter* p) { items_.push_back(p); }
  std::span<Parameter* const> items() const { return items_; }
  Parameter* find(std::string_view name) const;
  void zero_grad();
  std::size_t total_size() const;

 private:
  std::vector<Parameter*> items_;
};

// p.value -= lr * p.grad for every listed parameter.
void apply_sgd(std::span<Parameter* const> params, double lr);

struct AttentionBlockParams {
  Parameter ln1_gamma, ln1_beta;
  Parameter wq, bq, wk, bk, wv, bv, wo, bo;
  Parameter ln2_gamma, ln2_beta;
  Parameter w1, b1, w2, b2;
};

struct GenerationModuleParams {
  std::string name;
  int frame_budget = 0;
  std::vector<AttentionBlockParams> blocks;
  Parameter ln_f_gamma, ln_f_beta;
  Parameter head_w, head_b;
};

// Toy multi-modal captioner: a shared patch-embedding video encoder and
// vocabulary table, plus independently parameterized generation modules
// sized for different frame budgets (by default one large, one small).
class CaptionModel {
 public:
  struct ModuleSpec {
    std::string name;
    int frame_budget = 0;
  };

  CaptionModel(const ModelConfig& cfg, RngState init_rng, bool with_learnable_mask = false);
  CaptionModel(const ModelConfig& cfg, RngState init_rng, std::vector<ModuleSpec> modules,
               bool with_learnable_mask = false);

  const ModelConfig& config() const { return cfg_; }
  int module_count() const { return int(modules_.size()); }
  int module_index(std::string_view name) const;
  int large_index() const { return module_index("large"); }
  int small_index() const { return module_index("small"); }
  int frame_budget(int module) const { return modules_[module].frame_budget; }
  const std::string& module_name_at(int module) const { return modules_[module].name; }

  // Patch embedding + frame/position embeddings; tokens only.
  TokenGrid encode_video(const VideoFrames& video) const;
  // Taped variants bind parameters for gradient accumulation, hence non-const.
  ad::Var encode_video_taped(ad::Tape& tape, const VideoFrames& video);

  // Attention blocks over [text; visual] with causal text masking and the
  // given visual-visual restriction; next-token logits at text positions.
  // Throws "module capacity violation" if the visual token count does not
  // match the module's budget.
  ad::Var module_forward(ad::Tape& tape, int module, ad::Var visual_tokens,
                         std::span<const int> text_ids, const VisualMaskSpec& vis_mask);

  ad::Var caption_loss(ad::Tape& tape, int module, ad::Var visual_tokens,
                       const CaptionBatch& batch, const VisualMaskSpec& vis_mask);

  std::vector<int> greedy_decode(int module, const Matrix2D& visual_tokens,
                                 const VisualMaskSpec& vis_mask, int max_len);

  // Begin-token embedding at text position 0; the scoring pass query.
  Matrix2D cls_embedding() const;
  ScoreAttentionParams score_attention_view() const;

  ParamRegistry& params() { return registry_; }
  const ParamRegistry& params() const { return registry_; }
  std::span<Parameter* const> shared_params() const { return shared_list_; }
  std::span<Parameter* const> module_params(int module) const { return module_lists_[module]; }
  Parameter* learnable_mask() { return learnable_mask_.get(); }

  // Flat token-row indices covering the given frames.
  static std::vector<int> token_rows_for_frames(std::span<const int> frames, int tokens_per_frame);

 private:
  void init_params(RngState& rng);
  Matrix2D build_allowed_mask(std::span<const int> text_ids, int n_vis,
                              const MaskMatrix* adaptive) const;

  ModelConfig cfg_;
  struct SharedParams {
    Parameter patch_w, patch_b;
    Parameter frame_embed, patch_pos_embed;
    Parameter token_embed, text_pos_embed;
  };
  SharedParams shared_;
  std::vector<GenerationModuleParams> modules_;
  std::unique_ptr<Parameter> learnable_mask_;
  ParamRegistry registry_;
  std::vector<Parameter*> shared_list_;
  std::vector<std::vector<Parameter*>> module_lists_;
};

}  // namespace adacap
