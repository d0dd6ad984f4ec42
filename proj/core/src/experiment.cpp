// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "adacap/experiment.hpp"

#include "adacap/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace adacap {

const char* mask_mode_name(MaskMode m) {
  switch (m) {
    case MaskMode::kNone: return "none";
    case MaskMode::kFixedLearnable: return "fixed-learnable";
    case MaskMode::kAdaptive: return "adaptive";
  }
  return "none";
}

const char* routing_mode_name(RoutingMode m) {
  switch (m) {
    case RoutingMode::kMams: return "mams";
    case RoutingMode::kAlwaysLarge: return "always-large";
    case RoutingMode::kAlwaysSmall: return "always-small";
    case RoutingMode::kSwappedRule: return "swapped-rule";
    case RoutingMode::kInvertedScore: return "inverted-score";
  }
  return "mams";
}

MaskMode parse_mask_mode(const std::string& s) {
  if (s == "none") return MaskMode::kNone;
  if (s == "fixed-learnable" || s == "fixed") return MaskMode::kFixedLearnable;
  if (s == "adaptive") return MaskMode::kAdaptive;
  throw std::invalid_argument("unknown mask mode: " + s);
}

RoutingMode parse_routing_mode(const std::string& s) {
  if (s == "mams") return RoutingMode::kMams;
  if (s == "always-large") return RoutingMode::kAlwaysLarge;
  if (s == "always-small") return RoutingMode::kAlwaysSmall;
  if (s == "swapped-rule" || s == "swapped") return RoutingMode::kSwappedRule;
  if (s == "inverted-score" || s == "inverted") return RoutingMode::kInvertedScore;
  throw std::invalid_argument("unknown routing mode: " + s);
}

void ExperimentConfig::validate() const {
  model.validate();
  selection.validate();
  if (selection.large_budget != model.frames_large ||
      selection.small_budget != model.frames_small) {
    throw std::invalid_argument("ExperimentConfig: selection budgets do not match model frames");
  }
  if (three_candidates &&
      (mid_budget <= model.frames_small || mid_budget >= model.frames_large)) {
    throw std::invalid_argument("ExperimentConfig: mid budget must lie between small and large");
  }
  if (three_candidates && routing != RoutingMode::kMams) {
    throw std::invalid_argument("ExperimentConfig: three-candidate preset requires mams routing");
  }
  if (epochs < 1 || dataset_videos < 1) {
    throw std::invalid_argument("ExperimentConfig: epochs and dataset size must be positive");
  }
  if (lr <= 0.0) throw std::invalid_argument("ExperimentConfig: lr must be positive");
  if (high_fraction < 0.0 || high_fraction > 1.0) {
    throw std::invalid_argument("ExperimentConfig: high_fraction out of [0,1]");
  }
  if (data.frames != model.frames_large) {
    throw std::invalid_argument("ExperimentConfig: dataset frames do not match model frames");
  }
}

namespace {

void sync_derived(ExperimentConfig& cfg) {
  cfg.selection.large_budget = cfg.model.frames_large;
  cfg.selection.small_budget = cfg.model.frames_small;
  cfg.data.frames = cfg.model.frames_large;
  cfg.model.vocab = int(caption_vocabulary().size());
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"mams",           "mams-nomask",    "mams-fixedmask",
          "baseline-large", "baseline-large-adamask", "baseline-large-fixedmask",
          "baseline-small", "swapped-rule",   "inverted-score",
          "three-candidate", "overfit8"};
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.preset = name;
  cfg.epochs = 30;
  cfg.dataset_videos = 400;
  if (name == "mams") {
    // defaults
  } else if (name == "mams-nomask") {
    cfg.mask_mode = MaskMode::kNone;
  } else if (name == "mams-fixedmask") {
    cfg.mask_mode = MaskMode::kFixedLearnable;
  } else if (name == "baseline-large") {
    cfg.routing = RoutingMode::kAlwaysLarge;
    cfg.mask_mode = MaskMode::kNone;
  } else if (name == "baseline-large-adamask") {
    cfg.routing = RoutingMode::kAlwaysLarge;
    cfg.mask_mode = MaskMode::kAdaptive;
  } else if (name == "baseline-large-fixedmask") {
    cfg.routing = RoutingMode::kAlwaysLarge;
    cfg.mask_mode = MaskMode::kFixedLearnable;
  } else if (name == "baseline-small") {
    cfg.routing = RoutingMode::kAlwaysSmall;
    cfg.mask_mode = MaskMode::kNone;
  } else if (name == "swapped-rule") {
    cfg.routing = RoutingMode::kSwappedRule;
  } else if (name == "inverted-score") {
    cfg.routing = RoutingMode::kInvertedScore;
  } else if (name == "three-candidate") {
    cfg.three_candidates = true;
    cfg.mid_budget = 8;
  } else if (name == "overfit8") {
    cfg.routing = RoutingMode::kAlwaysLarge;
    cfg.mask_mode = MaskMode::kNone;
    cfg.dataset_videos = 8;
    cfg.epochs = 250;
    cfg.lr = 0.15;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  sync_derived(cfg);
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path, const std::string& fallback_preset) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) entries.emplace_back(key, value);
  }
  std::string preset = fallback_preset;
  for (const auto& [k, v] : entries) {
    if (k == "preset") preset = v;
  }
  ExperimentConfig cfg = preset_config(preset);
  for (const auto& [key, value] : entries) {
    if (key == "preset") {
      continue;
    } else if (key == "seed") {
      cfg.seed = std::stoull(value);
    } else if (key == "epochs") {
      cfg.epochs = std::stoi(value);
    } else if (key == "dataset_videos" || key == "videos") {
      cfg.dataset_videos = std::stoi(value);
    } else if (key == "high_fraction") {
      cfg.high_fraction = std::stod(value);
    } else if (key == "lr") {
      cfg.lr = std::stod(value);
    } else if (key == "full_batch") {
      cfg.full_batch = value == "1" || value == "true";
    } else if (key == "eval_every") {
      cfg.eval_every = std::stoi(value);
    } else if (key == "mask_mode") {
      cfg.mask_mode = parse_mask_mode(value);
    } else if (key == "routing") {
      cfg.routing = parse_routing_mode(value);
    } else if (key == "width") {
      cfg.model.width = std::stoi(value);
    } else if (key == "heads") {
      cfg.model.heads = std::stoi(value);
    } else if (key == "layers") {
      cfg.model.layers = std::stoi(value);
    } else if (key == "max_caption_len") {
      cfg.model.max_caption_len = std::stoi(value);
    } else if (key == "frames_large") {
      cfg.model.frames_large = std::stoi(value);
    } else if (key == "frames_small") {
      cfg.model.frames_small = std::stoi(value);
    } else if (key == "tokens_per_frame") {
      cfg.model.tokens_per_frame = std::stoi(value);
    } else if (key == "init_scale") {
      cfg.model.init_scale = std::stod(value);
    } else if (key == "embed_init_scale") {
      cfg.model.embed_init_scale = std::stod(value);
    } else if (key == "tau" || key == "temperature") {
      cfg.selection.temperature = std::stod(value);
    } else if (key == "deterministic") {
      cfg.selection.deterministic = value == "1" || value == "true";
    } else if (key == "max_while_iters") {
      cfg.selection.max_while_iters = std::stoi(value);
    } else if (key == "three_candidates") {
      cfg.three_candidates = value == "1" || value == "true";
    } else if (key == "mid_budget") {
      cfg.mid_budget = std::stoi(value);
    } else if (key == "static_fraction") {
      cfg.data.static_fraction = std::stod(value);
    } else if (key == "distractor_prob") {
      cfg.data.distractor_prob = std::stod(value);
    } else {
      throw std::invalid_argument("config: unknown key " + key);
    }
  }
  sync_derived(cfg);
  return cfg;
}

void save_config_file(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << "preset = " << cfg.preset << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "dataset_videos = " << cfg.dataset_videos << "\n";
  out << "high_fraction = " << cfg.high_fraction << "\n";
  out << "lr = " << cfg.lr << "\n";
  out << "full_batch = " << (cfg.full_batch ? 1 : 0) << "\n";
  out << "eval_every = " << cfg.eval_every << "\n";
  out << "mask_mode = " << mask_mode_name(cfg.mask_mode) << "\n";
  out << "routing = " << routing_mode_name(cfg.routing) << "\n";
  out << "width = " << cfg.model.width << "\n";
  out << "heads = " << cfg.model.heads << "\n";
  out << "layers = " << cfg.model.layers << "\n";
  out << "max_caption_len = " << cfg.model.max_caption_len << "\n";
  out << "frames_large = " << cfg.model.frames_large << "\n";
  out << "frames_small = " << cfg.model.frames_small << "\n";
  out << "tokens_per_frame = " << cfg.model.tokens_per_frame << "\n";
  out << "init_scale = " << cfg.model.init_scale << "\n";
  out << "embed_init_scale = " << cfg.model.embed_init_scale << "\n";
  out << "tau = " << cfg.selection.temperature << "\n";
  out << "three_candidates = " << (cfg.three_candidates ? 1 : 0) << "\n";
  out << "mid_budget = " << cfg.mid_budget << "\n";
  out << "static_fraction = " << cfg.data.static_fraction << "\n";
  out << "distractor_prob = " << cfg.data.distractor_prob << "\n";
}

std::string audit_csv_header() {
  return "video_id,frame_set_size,module,token_set_size,high_dynamics";
}

std::string audit_to_csv_line(const AuditRecord& r) {
  std::ostringstream os;
  os << r.video_id << "," << r.frame_set_size << "," << r.module << "," << r.token_set_size << ","
     << (r.high_dynamics ? 1 : 0);
  return os.str();
}

std::unique_ptr<CaptionModel> build_model(const ExperimentConfig& cfg) {
  bool learnable = cfg.mask_mode == MaskMode::kFixedLearnable;
  RngState init(cfg.seed);
  if (cfg.three_candidates) {
    std::vector<CaptionModel::ModuleSpec> mods{{"large", cfg.model.frames_large},
                                               {"mid", cfg.mid_budget},
                                               {"small", cfg.model.frames_small}};
    return std::make_unique<CaptionModel>(cfg.model, init, std::move(mods), learnable);
  }
  return std::make_unique<CaptionModel>(cfg.model, init, learnable);
}

SignificanceMap video_significance(CaptionModel& model, const TokenGrid& grid,
                                   RoutingMode routing) {
  SignificanceMap sig = token_significance_or_uniform(grid);
  if (routing == RoutingMode::kInvertedScore) sig = invert_significance(sig);
  return sig;
}

namespace {

// Highest-score members of `frames` first, ties toward the lower index; the
// first `budget` of them, ascending.
std::vector<int> top_frames_of(const std::vector<int>& frames, const SignificanceMap& sig,
                               int budget) {
  std::vector<int> order = frames;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return sig.frame_scores[a] > sig.frame_scores[b];
  });
  order.resize(std::min<std::size_t>(order.size(), budget));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<int> all_frames(int n) {
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) out[i] = i;
  return out;
}

}  // namespace

RoutingDecision route_video(const CaptionModel& model, const SignificanceMap& sig, RngState& rng,
                            const ExperimentConfig& cfg) {
  const SelectionConfig& sel = cfg.selection;
  RoutingDecision d;
  d.frame_set = select_frames(sig, rng, sel);
  d.token_set = select_tokens(sig, rng, sel);
  const int chosen = int(d.frame_set.size());

  if (cfg.three_candidates) {
    // Two-stage threshold rule over small < mid < large budgets.
    if (chosen <= sel.small_budget) {
      d.module_index = model.module_index("small");
      d.final_frames = complete_frames(d.frame_set, sig, rng, sel);
      d.gate = LossGate{0.0, 1.0};
    } else if (chosen <= cfg.mid_budget) {
      SelectionConfig mid = sel;
      mid.small_budget = cfg.mid_budget;
      d.module_index = model.module_index("mid");
      d.final_frames = complete_frames(d.frame_set, sig, rng, mid);
      d.gate = LossGate{0.0, 1.0};
    } else {
      d.module_index = model.module_index("large");
      d.final_frames = all_frames(sel.large_budget);
      d.gate = LossGate{1.0, 0.0};
    }
    return d;
  }

  switch (cfg.routing) {
    case RoutingMode::kMams:
    case RoutingMode::kInvertedScore: {  // score inversion happened upstream
      auto [module, gate] = choose_module(d.frame_set, sel);
      d.gate = gate;
      if (module == ModuleChoice::kSmall) {
        d.module_index = model.module_index("small");
        d.final_frames = complete_frames(d.frame_set, sig, rng, sel);
      } else {
        d.module_index = model.module_index("large");
        d.final_frames = all_frames(sel.large_budget);
      }
      break;
    }
    case RoutingMode::kSwappedRule: {
      // Inverts only the comparator of the module-selection rule.
      if (chosen <= sel.small_budget) {
        d.module_index = model.module_index("large");
        d.gate = LossGate{1.0, 0.0};
        d.final_frames = all_frames(sel.large_budget);
      } else {
        d.module_index = model.module_index("small");
        d.gate = LossGate{0.0, 1.0};
        d.final_frames = top_frames_of(d.frame_set, sig, sel.small_budget);
      }
      break;
    }
    case RoutingMode::kAlwaysLarge: {
      d.module_index = model.module_index("large");
      d.gate = LossGate{1.0, 0.0};
      d.final_frames = all_frames(sel.large_budget);
      break;
    }
    case RoutingMode::kAlwaysSmall: {
      d.module_index = model.module_index("small");
      d.gate = LossGate{0.0, 1.0};
      d.final_frames = chosen <= sel.small_budget
                           ? complete_frames(d.frame_set, sig, rng, sel)
                           : top_frames_of(d.frame_set, sig, sel.small_budget);
      break;
    }
  }
  return d;
}

namespace {

struct VideoForward {
  RoutingDecision decision;
  SignificanceMap sig;
  MaskMatrix adaptive_mask;  // storage when mask mode is adaptive
  VisualMaskSpec spec;
  std::vector<int> visual_rows;  // empty when the module sees the full grid
  bool full_grid = true;
};

VideoForward prepare_video(CaptionModel& model, const TokenGrid& grid, RngState& rng,
                           const ExperimentConfig& cfg) {
  VideoForward vf;
  vf.sig = video_significance(model, grid, cfg.routing);
  vf.decision = route_video(model, vf.sig, rng, cfg);

  const int budget = model.frame_budget(vf.decision.module_index);
  vf.full_grid = budget == cfg.model.frames_large;
  if (!vf.full_grid) {
    vf.visual_rows = CaptionModel::token_rows_for_frames(vf.decision.final_frames,
                                                         cfg.model.tokens_per_frame);
  }

  switch (cfg.mask_mode) {
    case MaskMode::kNone:
      vf.spec = VisualMaskSpec::none();
      break;
    case MaskMode::kAdaptive: {
      MaskMatrix large = build_mask_large(vf.decision.token_set, cfg.model.frames_large,
                                          cfg.model.tokens_per_frame);
      vf.adaptive_mask = vf.full_grid
                             ? std::move(large)
                             : restrict_mask_small(large, vf.decision.final_frames,
                                                   cfg.model.tokens_per_frame);
      vf.spec = VisualMaskSpec::adaptive_mask(vf.adaptive_mask);
      break;
    }
    case MaskMode::kFixedLearnable: {
      vf.spec.kind = VisualMaskSpec::Kind::kLearnable;
      vf.spec.learnable = model.learnable_mask();
      if (!vf.full_grid) vf.spec.visible_tokens = vf.visual_rows;
      break;
    }
  }
  return vf;
}

TokenGrid grid_from_tokens(Matrix2D tokens, const ModelConfig& mc) {
  TokenGrid grid;
  grid.frames = mc.frames_large;
  grid.tokens_per_frame = mc.tokens_per_frame;
  grid.width = mc.width;
  grid.tokens = std::move(tokens);
  return grid;
}

Matrix2D gather_matrix_rows(const Matrix2D& m, const std::vector<int>& rows) {
  Matrix2D out(int(rows.size()), m.cols());
  for (int r = 0; r < out.rows(); ++r) {
    auto src = m.row_span(rows[r]);
    auto dst = out.row_span(r);
    for (int c = 0; c < m.cols(); ++c) dst[c] = src[c];
  }
  return out;
}

}  // namespace

TrainResult train_experiment(const ExperimentConfig& cfg, const Dataset& ds, CaptionModel& model,
                             std::ostream* log, const std::string& dump_dir) {
  cfg.validate();
  if (ds.videos.empty()) throw std::invalid_argument("train: empty dataset");

  TrainResult result;
  RngState root(cfg.seed);
  RngState noise_root = root.fork(hash_string("train-noise"));
  RngState order_root = root.fork(hash_string("train-order"));
  const int n = int(ds.videos.size());

  std::vector<CaptionBatch> batches;
  batches.reserve(n);
  for (const auto& v : ds.videos) batches.push_back(make_caption_batch(v.caption, cfg.model));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    RngState order_rng = order_root.fork(std::uint64_t(epoch));
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[order_rng.uniform_int(i + 1)]);

    RngState epoch_noise = noise_root.fork(std::uint64_t(epoch));
    double loss_sum = 0.0;
    long routed_large = 0;
    double frame_set_sum = 0.0;
    double token_frac_sum = 0.0;

    if (cfg.full_batch) model.params().zero_grad();

    for (int vid : order) {
      const SyntheticVideo& video = ds.videos[vid];
      RngState vrng = epoch_noise.fork(std::uint64_t(vid));

      ad::Tape tape;
      ad::Var visual_full = model.encode_video_taped(tape, video.frames);
      // The scoring pass reads token values only; selection never carries
      // gradient.
      TokenGrid grid = grid_from_tokens(tape.value(visual_full), cfg.model);
      grid = score_pass(grid, model.cls_embedding(), model.score_attention_view());
      VideoForward vf = prepare_video(model, grid, vrng, cfg);

      ad::Var loss_var;
      auto branch = [&](const char* name) {
        // Only the gated-on branch ever runs, so vf's decision data matches.
        return [&, name]() {
          int mi = model.module_index(name);
          ad::Var vis =
              vf.full_grid ? visual_full : tape.gather_rows(visual_full, vf.visual_rows);
          loss_var = model.caption_loss(tape, mi, vis, batches[vid], vf.spec);
          return tape.scalar(loss_var);
        };
      };

      double total = 0.0;
      if (cfg.three_candidates) {
        // Harness composition: exactly one module evaluated, as in the
        // two-candidate gate.
        ad::Var vis = vf.full_grid ? visual_full : tape.gather_rows(visual_full, vf.visual_rows);
        loss_var = model.caption_loss(tape, vf.decision.module_index, vis, batches[vid], vf.spec);
        total = tape.scalar(loss_var);
      } else {
        GatedLoss gl = gated_loss(branch("large"), branch("small"), vf.decision.gate);
        total = gl.total;
      }

      if (!std::isfinite(total)) {
        std::string msg = "non-finite loss at epoch " + std::to_string(epoch) + ", video " +
                          std::to_string(vid) + ", module " +
                          model.module_name_at(vf.decision.module_index);
        if (!dump_dir.empty()) {
          std::filesystem::create_directories(dump_dir);
          std::ofstream dump(std::filesystem::path(dump_dir) / "diagnostic-dump.txt");
          dump << msg << "\n";
          dump << "frame_set_size " << vf.decision.frame_set.size() << "\n";
          dump << "token_set_size " << vf.decision.token_set.size() << "\n";
          dump << "frame_scores";
          for (double f : vf.sig.frame_scores) dump << " " << f;
          dump << "\n";
        }
        throw std::runtime_error(msg);
      }

      loss_sum += total;
      routed_large += model.module_name_at(vf.decision.module_index) == "large" ? 1 : 0;
      frame_set_sum += double(vf.decision.frame_set.size());
      token_frac_sum += double(vf.decision.token_set.size()) /
                        double(cfg.model.frames_large * cfg.model.tokens_per_frame);

      if (!cfg.full_batch) model.params().zero_grad();
      tape.backward(loss_var);
      if (!cfg.full_batch) {
        std::vector<Parameter*> update(model.shared_params().begin(),
                                       model.shared_params().end());
        auto mod = model.module_params(vf.decision.module_index);
        update.insert(update.end(), mod.begin(), mod.end());
        if (cfg.mask_mode == MaskMode::kFixedLearnable) update.push_back(model.learnable_mask());
        apply_sgd(update, cfg.lr);
      }
    }

    if (cfg.full_batch) apply_sgd(model.params().items(), cfg.lr / n);

    MetricsReport report;
    report.epoch = epoch;
    report.loss = loss_sum / n;
    report.routing_rate = double(routed_large) / n;
    report.mean_frame_set = frame_set_sum / n;
    report.mean_token_fraction = token_frac_sum / n;

    bool eval_now = cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0;
    if (eval_now) {
      EvalResult ev = evaluate(model, ds, cfg);
      report.token_accuracy = ev.metrics.token_accuracy;
      report.has_bleu = true;
      report.bleu = ev.metrics.bleu;
    }
    if (log != nullptr) {
      (*log) << metrics_to_json_line(report) << "\n";
    }
    result.epoch_reports.push_back(report);
  }

  result.final_eval = evaluate(model, ds, cfg);
  return result;
}

EvalResult evaluate(CaptionModel& model, const Dataset& ds, const ExperimentConfig& cfg) {
  ExperimentConfig ecfg = cfg;
  ecfg.selection.deterministic = true;

  EvalResult result;
  BleuAccumulator bleu;
  double loss_sum = 0.0;
  long correct = 0, counted = 0;
  long routed_large = 0;
  double frame_set_sum = 0.0, token_frac_sum = 0.0;
  long high_total = 0, high_large = 0, low_total = 0, low_large = 0;

  RngState unused(0);
  for (std::size_t vid = 0; vid < ds.videos.size(); ++vid) {
    const SyntheticVideo& video = ds.videos[vid];
    TokenGrid grid = model.encode_video(video.frames);
    grid = score_pass(grid, model.cls_embedding(), model.score_attention_view());
    VideoForward vf = prepare_video(model, grid, unused, ecfg);

    Matrix2D visual = vf.full_grid ? grid.tokens : gather_matrix_rows(grid.tokens, vf.visual_rows);

    // Teacher-forced loss and accuracy.
    CaptionBatch batch = make_caption_batch(video.caption, ecfg.model);
    ad::Tape tape(/*grad_enabled=*/false);
    ad::Var vis = tape.constant(visual);
    ad::Var logits = model.module_forward(tape, vf.decision.module_index, vis, batch.input_ids,
                                          vf.spec);
    const Matrix2D& lv = tape.value(logits);
    loss_sum += cross_entropy(lv, batch.target_ids, batch.target_weights);
    for (int r = 0; r < lv.rows(); ++r) {
      if (batch.target_weights[r] == 0.0) continue;
      int best = 0;
      for (int c = 1; c < lv.cols(); ++c) {
        if (lv(r, c) > lv(r, best)) best = c;
      }
      correct += best == batch.target_ids[r] ? 1 : 0;
      ++counted;
    }

    std::vector<int> decoded = model.greedy_decode(vf.decision.module_index, visual, vf.spec,
                                                   ecfg.model.max_caption_len);
    bleu.add(decoded, video.caption);
    result.decoded.push_back(decoded);

    bool large = model.module_name_at(vf.decision.module_index) == "large";
    routed_large += large ? 1 : 0;
    frame_set_sum += double(vf.decision.frame_set.size());
    token_frac_sum += double(vf.decision.token_set.size()) /
                      double(ecfg.model.frames_large * ecfg.model.tokens_per_frame);
    if (video.high_dynamics) {
      ++high_total;
      high_large += large ? 1 : 0;
    } else {
      ++low_total;
      low_large += large ? 1 : 0;
    }

    AuditRecord rec;
    rec.video_id = int(vid);
    rec.frame_set_size = int(vf.decision.frame_set.size());
    rec.module = model.module_name_at(vf.decision.module_index);
    rec.token_set_size = int(vf.decision.token_set.size());
    rec.high_dynamics = video.high_dynamics;
    result.audit.push_back(rec);
  }

  const double n = double(ds.videos.size());
  result.metrics.epoch = -1;
  result.metrics.loss = loss_sum / n;
  result.metrics.token_accuracy = counted > 0 ? double(correct) / double(counted) : 0.0;
  result.metrics.has_bleu = true;
  result.metrics.bleu = bleu.corpus();
  result.metrics.routing_rate = double(routed_large) / n;
  result.metrics.mean_frame_set = frame_set_sum / n;
  result.metrics.mean_token_fraction = token_frac_sum / n;
  result.routing_rate_high = high_total > 0 ? double(high_large) / high_total : 0.0;
  result.routing_rate_low = low_total > 0 ? double(low_large) / low_total : 0.0;
  return result;
}

Dataset dataset_with_frames(const Dataset& ds, int frames) {
  Dataset out;
  out.config = ds.config;
  out.config.frames = frames;
  out.videos.reserve(ds.videos.size());
  for (const auto& v : ds.videos) {
    SyntheticVideo copy;
    copy.scene = v.scene;
    copy.caption = v.caption;
    copy.high_dynamics = v.high_dynamics;
    copy.frames = subsample_frames(v.frames, frames);
    out.videos.push_back(std::move(copy));
  }
  return out;
}

std::vector<SweepRow> frame_sweep(const ExperimentConfig& base, const Dataset& ds,
                                  const std::vector<int>& frame_counts,
                                  const std::vector<std::uint64_t>& seeds, std::ostream* log) {
  if (frame_counts.empty()) throw std::invalid_argument("frame_sweep: no frame counts");
  if (!std::is_sorted(frame_counts.begin(), frame_counts.end())) {
    throw std::invalid_argument("frame_sweep: frame counts must ascend");
  }
  std::vector<SweepRow> rows;
  for (std::uint64_t seed : seeds) {
    for (int t : frame_counts) {
      ExperimentConfig cfg = base;
      cfg.preset = "sweep-baseline";
      cfg.seed = seed;
      cfg.routing = RoutingMode::kAlwaysLarge;
      cfg.mask_mode = MaskMode::kNone;
      cfg.model.frames_large = t;
      cfg.model.frames_small = std::max(1, std::min(base.model.frames_small, t - 1));
      cfg.selection.large_budget = cfg.model.frames_large;
      cfg.selection.small_budget = cfg.model.frames_small;
      cfg.data.frames = t;
      Dataset view = dataset_with_frames(ds, t);
      auto model = build_model(cfg);
      if (log != nullptr) (*log) << "# sweep baseline T=" << t << " seed=" << seed << "\n";
      TrainResult tr = train_experiment(cfg, view, *model, nullptr);
      SweepRow row;
      row.label = "baseline-T" + std::to_string(t);
      row.frames = t;
      row.seed = seed;
      row.bleu = tr.final_eval.metrics.bleu;
      row.routing_rate = tr.final_eval.metrics.routing_rate;
      rows.push_back(row);
    }
    {
      ExperimentConfig cfg = base;
      cfg.preset = "sweep-mams";
      cfg.seed = seed;
      cfg.routing = RoutingMode::kMams;
      cfg.mask_mode = MaskMode::kAdaptive;
      int t = frame_counts.back();
      cfg.model.frames_large = t;
      cfg.model.frames_small = std::max(1, std::min(base.model.frames_small, t - 1));
      cfg.selection.large_budget = t;
      cfg.selection.small_budget = cfg.model.frames_small;
      cfg.data.frames = t;
      Dataset view = dataset_with_frames(ds, t);
      auto model = build_model(cfg);
      if (log != nullptr) (*log) << "# sweep adaptive T=" << t << " seed=" << seed << "\n";
      TrainResult tr = train_experiment(cfg, view, *model, nullptr);
      SweepRow row;
      row.label = "mams-T" + std::to_string(t);
      row.frames = t;
      row.seed = seed;
      row.bleu = tr.final_eval.metrics.bleu;
      row.routing_rate = tr.final_eval.metrics.routing_rate;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "label,frames,seed,bleu1,bleu2,bleu3,bleu4,routing_rate\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.label << "," << r.frames << "," << r.seed;
    for (int n = 0; n < 4; ++n) {
      std::snprintf(buf, sizeof(buf), "%.10g", r.bleu[n]);
      os << "," << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.10g", r.routing_rate);
    os << "," << buf << "\n";
  }
  return os.str();
}

}  // namespace adacap
