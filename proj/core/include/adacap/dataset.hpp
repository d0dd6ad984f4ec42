// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "adacap/captioner.hpp"
#include "adacap/rng.hpp"

namespace adacap {

enum class Shape { kSquare, kTriangle, kCircle };
enum class Direction { kNone, kLeft, kRight, kUp, kDown };

struct MotionSegment {
  Direction dir = Direction::kNone;
  double speed = 0.0;  // pixels per frame
};

// One synthetic scene: a primary glyph with a motion program (static, one
// linear segment, or two segments split at event_frame) and an optional
// dimmer static distractor glyph. The caption is a deterministic function
// of this spec.
struct SceneSpec {
  Shape shape = Shape::kSquare;
  int color_level = 0;
  double start_row = 0.0;
  double start_col = 0.0;
  MotionSegment first;
  bool has_event = false;
  int event_frame = 0;
  MotionSegment second;
  bool has_distractor = false;
  Shape distractor_shape = Shape::kSquare;
  int distractor_row = 0;
  int distractor_col = 0;
};

struct SyntheticVideo {
  SceneSpec scene;
  VideoFrames frames;
  std::vector<int> caption;  // word ids, specials excluded
  bool high_dynamics = false;
};

struct DataConfig {
  int frames = 16;
  int height = 16;
  int width = 16;
  int glyph = 4;                  // glyph bounding box side
  double static_fraction = 0.5;   // of low-dynamics videos
  double distractor_prob = 0.35;
};

struct Dataset {
  DataConfig config;
  std::vector<SyntheticVideo> videos;
};

// The fixed caption vocabulary; index equals token id. The first three
// entries are <pad>, <bos>, <eos>.
const std::vector<std::string>& caption_vocabulary();

std::string caption_to_string(std::span<const int> ids);

// n_videos scenes with exactly round(n * high_fraction) high-dynamics ones
// (an event mid-video), deterministically shuffled. High dynamics get the
// two-clause caption form.
Dataset generate_dataset(int n_videos, double high_fraction, RngState rng,
                         const DataConfig& cfg = {});

// On-disk layout under `dir`: header.txt (counts, frame dims, vocab list,
// per-video dynamics labels), frames.bin (raw frame-major bytes), and
// captions.bin (per video: u32 length then u32 word ids, little-endian).
void write_dataset(const Dataset& ds, const std::string& dir);
Dataset read_dataset(const std::string& dir);

// Uniform-stride frame subset, used by the frame sweep.
VideoFrames subsample_frames(const VideoFrames& video, int target_frames);

}  // namespace adacap
