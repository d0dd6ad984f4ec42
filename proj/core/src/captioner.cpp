// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "adacap/captioner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "adacap/kernels.hpp"

namespace adacap {

void ModelConfig::validate() const {
  if (width <= 0 || width % heads != 0) {
    throw std::invalid_argument("ModelConfig: width must be positive and divisible by heads");
  }
  if (patch_rows * patch_cols != tokens_per_frame) {
    throw std::invalid_argument("ModelConfig: patch grid does not yield tokens_per_frame");
  }
  if (frame_height % patch_rows != 0 || frame_width % patch_cols != 0) {
    throw std::invalid_argument("ModelConfig: frame dims not divisible by patch grid");
  }
  if (frames_small >= frames_large || frames_small < 1) {
    throw std::invalid_argument("ModelConfig: requires 1 <= frames_small < frames_large");
  }
  if (vocab <= std::max({pad_id, begin_id, end_id})) {
    throw std::invalid_argument("ModelConfig: vocab too small for special ids");
  }
  if (max_caption_len < 2) throw std::invalid_argument("ModelConfig: max_caption_len too small");
  if (layers < 1) throw std::invalid_argument("ModelConfig: needs at least one layer");
}

CaptionBatch make_caption_batch(std::span<const int> words, const ModelConfig& cfg) {
  const int cap = cfg.max_caption_len;
  CaptionBatch batch;
  batch.input_ids.assign(cap, cfg.pad_id);
  batch.target_ids.assign(cap, cfg.pad_id);
  batch.target_weights.assign(cap, 0.0);

  int m = std::min(int(words.size()), cap - 1);
  batch.input_ids[0] = cfg.begin_id;
  for (int k = 0; k < m; ++k) {
    batch.input_ids[k + 1] = words[k];
    batch.target_ids[k] = words[k];
    batch.target_weights[k] = 1.0;
  }
  if (m < cap) {
    batch.target_ids[m] = cfg.end_id;
    batch.target_weights[m] = 1.0;
  }
  return batch;
}

GatedLoss gated_loss(const std::function<double()>& large_loss_fn,
                     const std::function<double()>& small_loss_fn, const LossGate& gate) {
  bool large_on = gate.large == 1.0 && gate.small == 0.0;
  bool small_on = gate.large == 0.0 && gate.small == 1.0;
  if (!large_on && !small_on) throw std::invalid_argument("gated_loss: gate is not one-hot");
  GatedLoss out;
  out.gate = gate;
  if (large_on) {
    out.large_loss = large_loss_fn();
    out.total = out.large_loss;
  } else {
    out.small_loss = small_loss_fn();
    out.total = out.small_loss;
  }
  return out;
}

Parameter* ParamRegistry::find(std::string_view name) const {
  for (Parameter* p : items_) {
    if (p->name == name) return p;
  }
  return nullptr;
}

void ParamRegistry::zero_grad() {
  for (Parameter* p : items_) p->zero_grad();
}

std::size_t ParamRegistry::total_size() const {
  std::size_t n = 0;
  for (Parameter* p : items_) n += p->value.size();
  return n;
}

void apply_sgd(std::span<Parameter* const> params, double lr) {
  for (Parameter* p : params) p->value.add_scaled(p->grad, -lr);
}

namespace {

enum class Init { kZero, kOne, kNormal };

Parameter make_param(const std::string& name, int rows, int cols, Init init, double scale,
                     const RngState& root) {
  Matrix2D value(rows, cols);
  switch (init) {
    case Init::kZero:
      break;
    case Init::kOne:
      value.fill(1.0);
      break;
    case Init::kNormal: {
      // Name-keyed stream: a parameter initializes identically across model
      // variants that contain it, so ablation arms share encoder inits.
      RngState rng = root.fork(hash_string(name.c_str()));
      for (double& v : value.flat()) v = scale * rng.normal();
      break;
    }
  }
  return Parameter(name, std::move(value));
}

}  // namespace

CaptionModel::CaptionModel(const ModelConfig& cfg, RngState init_rng, bool with_learnable_mask)
    : CaptionModel(cfg, init_rng,
                   {{"large", cfg.frames_large}, {"small", cfg.frames_small}},
                   with_learnable_mask) {}

CaptionModel::CaptionModel(const ModelConfig& cfg, RngState init_rng,
                           std::vector<ModuleSpec> modules, bool with_learnable_mask)
    : cfg_(cfg) {
  cfg_.validate();
  if (modules.empty()) throw std::invalid_argument("CaptionModel: no generation modules");

  const int d = cfg_.width;
  const int ffn = 4 * d;
  const double ws = cfg_.init_scale;
  const double es = cfg_.embed_init_scale;

  shared_.patch_w = make_param("shared.patch_w", cfg_.patch_dim(), d, Init::kNormal, ws, init_rng);
  shared_.patch_b = make_param("shared.patch_b", 1, d, Init::kZero, 0, init_rng);
  shared_.frame_embed =
      make_param("shared.frame_embed", cfg_.frames_large, d, Init::kNormal, es, init_rng);
  shared_.patch_pos_embed =
      make_param("shared.patch_pos_embed", cfg_.tokens_per_frame, d, Init::kNormal, es, init_rng);
  shared_.token_embed = make_param("shared.token_embed", cfg_.vocab, d, Init::kNormal, es, init_rng);
  shared_.text_pos_embed =
      make_param("shared.text_pos_embed", cfg_.max_caption_len, d, Init::kNormal, es, init_rng);

  modules_.reserve(modules.size());
  for (const ModuleSpec& spec : modules) {
    if (spec.frame_budget < 1 || spec.frame_budget > cfg_.frames_large) {
      throw std::invalid_argument("CaptionModel: module frame budget out of range");
    }
    GenerationModuleParams mod;
    mod.name = spec.name;
    mod.frame_budget = spec.frame_budget;
    mod.blocks.reserve(cfg_.layers);
    for (int l = 0; l < cfg_.layers; ++l) {
      std::string base = spec.name + ".block" + std::to_string(l) + ".";
      AttentionBlockParams b;
      b.ln1_gamma = make_param(base + "ln1_gamma", 1, d, Init::kOne, 0, init_rng);
      b.ln1_beta = make_param(base + "ln1_beta", 1, d, Init::kZero, 0, init_rng);
      b.wq = make_param(base + "wq", d, d, Init::kNormal, ws, init_rng);
      b.bq = make_param(base + "bq", 1, d, Init::kZero, 0, init_rng);
      b.wk = make_param(base + "wk", d, d, Init::kNormal, ws, init_rng);
      b.bk = make_param(base + "bk", 1, d, Init::kZero, 0, init_rng);
      b.wv = make_param(base + "wv", d, d, Init::kNormal, ws, init_rng);
      b.bv = make_param(base + "bv", 1, d, Init::kZero, 0, init_rng);
      b.wo = make_param(base + "wo", d, d, Init::kNormal, ws, init_rng);
      b.bo = make_param(base + "bo", 1, d, Init::kZero, 0, init_rng);
      b.ln2_gamma = make_param(base + "ln2_gamma", 1, d, Init::kOne, 0, init_rng);
      b.ln2_beta = make_param(base + "ln2_beta", 1, d, Init::kZero, 0, init_rng);
      b.w1 = make_param(base + "w1", d, ffn, Init::kNormal, ws, init_rng);
      b.b1 = make_param(base + "b1", 1, ffn, Init::kZero, 0, init_rng);
      b.w2 = make_param(base + "w2", ffn, d, Init::kNormal, ws, init_rng);
      b.b2 = make_param(base + "b2", 1, d, Init::kZero, 0, init_rng);
      mod.blocks.push_back(std::move(b));
    }
    std::string base = spec.name + ".";
    mod.ln_f_gamma = make_param(base + "ln_f_gamma", 1, d, Init::kOne, 0, init_rng);
    mod.ln_f_beta = make_param(base + "ln_f_beta", 1, d, Init::kZero, 0, init_rng);
    mod.head_w = make_param(base + "head_w", d, cfg_.vocab, Init::kNormal, ws, init_rng);
    mod.head_b = make_param(base + "head_b", 1, cfg_.vocab, Init::kZero, 0, init_rng);
    modules_.push_back(std::move(mod));
  }

  if (with_learnable_mask) {
    int n = cfg_.visual_tokens_large();
    learnable_mask_ = std::make_unique<Parameter>(
        make_param("mask.learnable", n, n, Init::kZero, 0, init_rng));
  }

  // Registration order defines the checkpoint manifest order.
  auto reg_shared = [&](Parameter& p) {
    registry_.add(&p);
    shared_list_.push_back(&p);
  };
  reg_shared(shared_.patch_w);
  reg_shared(shared_.patch_b);
  reg_shared(shared_.frame_embed);
  reg_shared(shared_.patch_pos_embed);
  reg_shared(shared_.token_embed);
  reg_shared(shared_.text_pos_embed);

  module_lists_.resize(modules_.size());
  for (std::size_t m = 0; m < modules_.size(); ++m) {
    auto reg_mod = [&](Parameter& p) {
      registry_.add(&p);
      module_lists_[m].push_back(&p);
    };
    for (AttentionBlockParams& b : modules_[m].blocks) {
      reg_mod(b.ln1_gamma);
      reg_mod(b.ln1_beta);
      reg_mod(b.wq);
      reg_mod(b.bq);
      reg_mod(b.wk);
      reg_mod(b.bk);
      reg_mod(b.wv);
      reg_mod(b.bv);
      reg_mod(b.wo);
      reg_mod(b.bo);
      reg_mod(b.ln2_gamma);
      reg_mod(b.ln2_beta);
      reg_mod(b.w1);
      reg_mod(b.b1);
      reg_mod(b.w2);
      reg_mod(b.b2);
    }
    reg_mod(modules_[m].ln_f_gamma);
    reg_mod(modules_[m].ln_f_beta);
    reg_mod(modules_[m].head_w);
    reg_mod(modules_[m].head_b);
  }
  if (learnable_mask_) registry_.add(learnable_mask_.get());
}

int CaptionModel::module_index(std::string_view name) const {
  for (std::size_t m = 0; m < modules_.size(); ++m) {
    if (modules_[m].name == name) return int(m);
  }
  throw std::invalid_argument("CaptionModel: no module named " + std::string(name));
}

namespace {

Matrix2D patch_matrix(const VideoFrames& video, const ModelConfig& cfg) {
  if (video.frames < 1 || video.height != cfg.frame_height || video.width != cfg.frame_width) {
    throw std::invalid_argument("encode_video: frame dimensions do not match config");
  }
  const int ph = cfg.frame_height / cfg.patch_rows;
  const int pw = cfg.frame_width / cfg.patch_cols;
  Matrix2D patches(video.frames * cfg.tokens_per_frame, cfg.patch_dim());
  for (int f = 0; f < video.frames; ++f) {
    for (int pr = 0; pr < cfg.patch_rows; ++pr) {
      for (int pc = 0; pc < cfg.patch_cols; ++pc) {
        int p = pr * cfg.patch_cols + pc;
        auto row = patches.row_span(f * cfg.tokens_per_frame + p);
        int at = 0;
        for (int r = 0; r < ph; ++r) {
          for (int c = 0; c < pw; ++c) {
            row[at++] = video.at(f, pr * ph + r, pc * pw + c) / 255.0;
          }
        }
      }
    }
  }
  return patches;
}

std::pair<std::vector<int>, std::vector<int>> embed_indices(int frames, int tokens_per_frame) {
  std::vector<int> frame_ids(frames * tokens_per_frame);
  std::vector<int> pos_ids(frames * tokens_per_frame);
  for (int f = 0; f < frames; ++f) {
    for (int p = 0; p < tokens_per_frame; ++p) {
      frame_ids[f * tokens_per_frame + p] = f;
      pos_ids[f * tokens_per_frame + p] = p;
    }
  }
  return {std::move(frame_ids), std::move(pos_ids)};
}

}  // namespace

TokenGrid CaptionModel::encode_video(const VideoFrames& video) const {
  if (video.frames != cfg_.frames_large) {
    throw std::invalid_argument("encode_video: frame count does not match config");
  }
  Matrix2D patches = patch_matrix(video, cfg_);
  Matrix2D tokens = matmul(patches, shared_.patch_w.value);
  auto [frame_ids, pos_ids] = embed_indices(video.frames, cfg_.tokens_per_frame);
  for (int r = 0; r < tokens.rows(); ++r) {
    auto row = tokens.row_span(r);
    auto fe = shared_.frame_embed.value.row_span(frame_ids[r]);
    auto pe = shared_.patch_pos_embed.value.row_span(pos_ids[r]);
    for (int c = 0; c < tokens.cols(); ++c) {
      row[c] += shared_.patch_b.value(0, c) + fe[c] + pe[c];
    }
  }
  TokenGrid grid;
  grid.frames = video.frames;
  grid.tokens_per_frame = cfg_.tokens_per_frame;
  grid.width = cfg_.width;
  grid.tokens = std::move(tokens);
  return grid;
}

ad::Var CaptionModel::encode_video_taped(ad::Tape& tape, const VideoFrames& video) {
  if (video.frames != cfg_.frames_large) {
    throw std::invalid_argument("encode_video: frame count does not match config");
  }
  auto [frame_ids, pos_ids] = embed_indices(video.frames, cfg_.tokens_per_frame);
  ad::Var patches = tape.constant(patch_matrix(video, cfg_));
  ad::Var w = tape.param(shared_.patch_w);
  ad::Var b = tape.param(shared_.patch_b);
  ad::Var fe = tape.param(shared_.frame_embed);
  ad::Var pe = tape.param(shared_.patch_pos_embed);
  ad::Var tokens = tape.add_row_vector(tape.matmul(patches, w), b);
  tokens = tape.add_gathered_rows(tokens, fe, std::move(frame_ids));
  tokens = tape.add_gathered_rows(tokens, pe, std::move(pos_ids));
  return tokens;
}

Matrix2D CaptionModel::build_allowed_mask(std::span<const int> text_ids, int n_vis,
                                          const MaskMatrix* adaptive) const {
  const int lc = int(text_ids.size());
  const int s = lc + n_vis;
  Matrix2D allowed(s, s, 0.0);
  for (int x = 0; x < lc; ++x) {
    // Causal over text; padding positions are visible only to themselves.
    for (int y = 0; y <= x; ++y) {
      if (text_ids[y] != cfg_.pad_id || y == x) allowed(x, y) = 1.0;
    }
    for (int y = lc; y < s; ++y) allowed(x, y) = 1.0;
  }
  // Visual rows never attend to text: visual states must not depend on the
  // caption so teacher-forced training and incremental decoding agree.
  for (int x = lc; x < s; ++x) {
    if (adaptive != nullptr) {
      for (int y = lc; y < s; ++y) allowed(x, y) = adaptive->at(x - lc, y - lc);
    } else {
      for (int y = lc; y < s; ++y) allowed(x, y) = 1.0;
    }
  }
  return allowed;
}

ad::Var CaptionModel::module_forward(ad::Tape& tape, int module, ad::Var visual_tokens,
                                     std::span<const int> text_ids,
                                     const VisualMaskSpec& vis_mask) {
  GenerationModuleParams& mod = modules_.at(module);
  const int d = cfg_.width;
  const int n_vis = tape.value(visual_tokens).rows();
  const int lc = int(text_ids.size());
  if (lc < 1 || lc > cfg_.max_caption_len) {
    throw std::invalid_argument("module_forward: bad text length");
  }
  if (n_vis != mod.frame_budget * cfg_.tokens_per_frame || tape.value(visual_tokens).cols() != d) {
    throw std::invalid_argument("module capacity violation");
  }
  for (int id : text_ids) {
    if (id < 0 || id >= cfg_.vocab) throw std::out_of_range("module_forward: text id out of range");
  }

  const MaskMatrix* adaptive = nullptr;
  if (vis_mask.kind == VisualMaskSpec::Kind::kAdaptive) {
    if (vis_mask.adaptive == nullptr || vis_mask.adaptive->n != n_vis) {
      throw std::invalid_argument("module_forward: adaptive mask side mismatch");
    }
    adaptive = vis_mask.adaptive;
  }

  // Soft logit bias for the fixed learnable mask, shared by all layers.
  ad::Var mask_bias;
  if (vis_mask.kind == VisualMaskSpec::Kind::kLearnable) {
    if (vis_mask.learnable == nullptr) {
      throw std::invalid_argument("module_forward: missing learnable mask parameter");
    }
    ad::Var raw = tape.param(*vis_mask.learnable);
    if (!vis_mask.visible_tokens.empty()) {
      if (int(vis_mask.visible_tokens.size()) != n_vis) {
        throw std::invalid_argument("module_forward: learnable mask restriction mismatch");
      }
      raw = tape.gather_submatrix(raw, vis_mask.visible_tokens, vis_mask.visible_tokens);
    } else if (tape.value(raw).rows() != n_vis) {
      throw std::invalid_argument("module_forward: learnable mask side mismatch");
    }
    mask_bias = tape.log_sigmoid_eps(raw, vis_mask.eps);
  }

  Matrix2D allowed = build_allowed_mask(text_ids, n_vis, adaptive);

  // Text embeddings: token + position.
  std::vector<int> ids(text_ids.begin(), text_ids.end());
  std::vector<int> positions(lc);
  for (int k = 0; k < lc; ++k) positions[k] = k;
  ad::Var tok_emb = tape.param(shared_.token_embed);
  ad::Var pos_emb = tape.param(shared_.text_pos_embed);
  ad::Var text = tape.gather_rows(tok_emb, std::move(ids));
  text = tape.add_gathered_rows(text, pos_emb, std::move(positions));

  std::vector<ad::Var> seq_parts{text, visual_tokens};
  ad::Var x = tape.concat_rows(seq_parts);

  const int heads = cfg_.heads;
  const int dh = d / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(double(dh));

  for (AttentionBlockParams& b : mod.blocks) {
    ad::Var h = tape.layer_norm(x, tape.param(b.ln1_gamma), tape.param(b.ln1_beta), cfg_.ln_eps);
    ad::Var q = tape.add_row_vector(tape.matmul(h, tape.param(b.wq)), tape.param(b.bq));
    ad::Var k = tape.add_row_vector(tape.matmul(h, tape.param(b.wk)), tape.param(b.bk));
    ad::Var v = tape.add_row_vector(tape.matmul(h, tape.param(b.wv)), tape.param(b.bv));
    std::vector<ad::Var> head_ctx;
    head_ctx.reserve(heads);
    for (int hd = 0; hd < heads; ++hd) {
      ad::Var qh = tape.slice_cols(q, hd * dh, (hd + 1) * dh);
      ad::Var kh = tape.slice_cols(k, hd * dh, (hd + 1) * dh);
      ad::Var vh = tape.slice_cols(v, hd * dh, (hd + 1) * dh);
      ad::Var scores = tape.scale(tape.matmul_nt(qh, kh), inv_sqrt_dh);
      if (mask_bias.valid()) scores = tape.add_block(scores, mask_bias, lc, lc);
      ad::Var attn = tape.masked_softmax(scores, allowed);
      head_ctx.push_back(tape.matmul(attn, vh));
    }
    ad::Var ctx = tape.concat_cols(head_ctx);
    ad::Var att_out = tape.add_row_vector(tape.matmul(ctx, tape.param(b.wo)), tape.param(b.bo));
    x = tape.add(x, att_out);
    ad::Var h2 = tape.layer_norm(x, tape.param(b.ln2_gamma), tape.param(b.ln2_beta), cfg_.ln_eps);
    ad::Var f = tape.add_row_vector(tape.matmul(h2, tape.param(b.w1)), tape.param(b.b1));
    f = tape.gelu(f);
    f = tape.add_row_vector(tape.matmul(f, tape.param(b.w2)), tape.param(b.b2));
    x = tape.add(x, f);
  }

  x = tape.layer_norm(x, tape.param(mod.ln_f_gamma), tape.param(mod.ln_f_beta), cfg_.ln_eps);
  ad::Var text_states = tape.slice_rows(x, 0, lc);
  return tape.add_row_vector(tape.matmul(text_states, tape.param(mod.head_w)),
                             tape.param(mod.head_b));
}

ad::Var CaptionModel::caption_loss(ad::Tape& tape, int module, ad::Var visual_tokens,
                                   const CaptionBatch& batch, const VisualMaskSpec& vis_mask) {
  ad::Var logits = module_forward(tape, module, visual_tokens, batch.input_ids, vis_mask);
  return tape.cross_entropy(logits, batch.target_ids, batch.target_weights);
}

std::vector<int> CaptionModel::greedy_decode(int module, const Matrix2D& visual_tokens,
                                             const VisualMaskSpec& vis_mask, int max_len) {
  max_len = std::min(max_len, cfg_.max_caption_len);
  std::vector<int> seq{cfg_.begin_id};
  std::vector<int> out;
  for (int step = 0; step < max_len; ++step) {
    ad::Tape tape(/*grad_enabled=*/false);
    ad::Var visual = tape.constant(visual_tokens);
    ad::Var logits = module_forward(tape, module, visual, seq, vis_mask);
    const Matrix2D& lv = tape.value(logits);
    int last = lv.rows() - 1;
    int best = 0;
    for (int c = 1; c < lv.cols(); ++c) {
      if (lv(last, c) > lv(last, best)) best = c;
    }
    if (best == cfg_.end_id) break;
    out.push_back(best);
    if (int(seq.size()) < cfg_.max_caption_len) {
      seq.push_back(best);
    } else {
      break;
    }
  }
  return out;
}

Matrix2D CaptionModel::cls_embedding() const {
  Matrix2D out(1, cfg_.width);
  auto tok = shared_.token_embed.value.row_span(cfg_.begin_id);
  auto pos = shared_.text_pos_embed.value.row_span(0);
  for (int c = 0; c < cfg_.width; ++c) out(0, c) = tok[c] + pos[c];
  return out;
}

ScoreAttentionParams CaptionModel::score_attention_view() const {
  const GenerationModuleParams& large = modules_[large_index()];
  const AttentionBlockParams& b0 = large.blocks.front();
  ScoreAttentionParams view;
  view.ln_gamma = b0.ln1_gamma.value.row_span(0);
  view.ln_beta = b0.ln1_beta.value.row_span(0);
  view.ln_eps = cfg_.ln_eps;
  view.wq = &b0.wq.value;
  view.bq = b0.bq.value.row_span(0);
  view.wk = &b0.wk.value;
  view.bk = b0.bk.value.row_span(0);
  view.heads = cfg_.heads;
  return view;
}

std::vector<int> CaptionModel::token_rows_for_frames(std::span<const int> frames,
                                                     int tokens_per_frame) {
  std::vector<int> rows;
  rows.reserve(frames.size() * tokens_per_frame);
  for (int f : frames) {
    for (int p = 0; p < tokens_per_frame; ++p) rows.push_back(f * tokens_per_frame + p);
  }
  return rows;
}

}  // namespace adacap
