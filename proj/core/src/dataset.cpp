// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "adacap/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace adacap {

namespace {

static_assert(std::endian::native == std::endian::little,
              "dataset format is little-endian; byte swapping is not implemented");

constexpr int kDistractorIntensity = 45;

struct ColorDef {
  const char* word;
  int intensity;
};
constexpr ColorDef kColors[] = {
    {"dark", 70}, {"dim", 110}, {"gray", 150}, {"pale", 195}, {"bright", 230}, {"white", 255},
};
constexpr int kColorCount = int(std::size(kColors));

constexpr double kSlowSpeed = 0.4;
constexpr double kFastSpeed = 0.8;

const char* shape_word(Shape s) {
  switch (s) {
    case Shape::kSquare: return "square";
    case Shape::kTriangle: return "triangle";
    case Shape::kCircle: return "circle";
  }
  return "square";
}

const char* direction_word(Direction d) {
  switch (d) {
    case Direction::kNone: return "still";
    case Direction::kLeft: return "left";
    case Direction::kRight: return "right";
    case Direction::kUp: return "up";
    case Direction::kDown: return "down";
  }
  return "still";
}

const char* verb_word(const MotionSegment& seg) {
  if (seg.dir == Direction::kNone || seg.speed == 0.0) return "sits";
  return seg.speed < 0.6 ? "drifts" : "slides";
}

std::pair<double, double> direction_delta(Direction d) {
  switch (d) {
    case Direction::kLeft: return {0.0, -1.0};
    case Direction::kRight: return {0.0, 1.0};
    case Direction::kUp: return {-1.0, 0.0};
    case Direction::kDown: return {1.0, 0.0};
    case Direction::kNone: return {0.0, 0.0};
  }
  return {0.0, 0.0};
}

// Cumulative displacement after t steps, accumulated in integer fifths of a
// pixel so trajectory extents are exact.
std::pair<double, double> displacement(const SceneSpec& scene, int t) {
  long fr = 0, fc = 0;
  for (int s = 1; s <= t; ++s) {
    const MotionSegment& seg = (scene.has_event && s > scene.event_frame) ? scene.second : scene.first;
    auto [ddr, ddc] = direction_delta(seg.dir);
    long fifths = std::lround(seg.speed * 5.0);
    fr += long(ddr) * fifths;
    fc += long(ddc) * fifths;
  }
  return {fr / 5.0, fc / 5.0};
}

void draw_glyph(VideoFrames& video, int frame, Shape shape, int top, int left, int glyph,
                int intensity) {
  for (int r = 0; r < glyph; ++r) {
    for (int c = 0; c < glyph; ++c) {
      bool on = false;
      switch (shape) {
        case Shape::kSquare: on = true; break;
        case Shape::kTriangle: on = c <= r; break;
        case Shape::kCircle: on = (r == 0 || r == glyph - 1) ? (c > 0 && c < glyph - 1) : true; break;
      }
      if (!on) continue;
      int rr = top + r, cc = left + c;
      if (rr < 0 || rr >= video.height || cc < 0 || cc >= video.width) continue;
      video.pixels[(std::size_t(frame) * video.height + rr) * video.width + cc] =
          std::uint8_t(intensity);
    }
  }
}

int word_id(const std::string& w) {
  const auto& vocab = caption_vocabulary();
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (vocab[i] == w) return int(i);
  }
  throw std::logic_error("unknown caption word: " + w);
}

std::vector<int> caption_for(const SceneSpec& scene) {
  std::vector<std::string> words{"a", kColors[scene.color_level].word, shape_word(scene.shape)};
  words.push_back(verb_word(scene.first));
  words.push_back(direction_word(scene.first.dir));
  if (scene.has_event) {
    words.push_back("then");
    words.push_back(verb_word(scene.second));
    words.push_back(direction_word(scene.second.dir));
  }
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(word_id(w));
  return ids;
}

Direction random_direction(RngState& rng) {
  constexpr Direction dirs[] = {Direction::kLeft, Direction::kRight, Direction::kUp,
                                Direction::kDown};
  return dirs[rng.uniform_int(4)];
}

SceneSpec sample_scene(RngState& rng, bool high_dynamics, const DataConfig& cfg) {
  SceneSpec scene;
  scene.shape = Shape(rng.uniform_int(3));
  scene.color_level = rng.uniform_int(kColorCount);
  scene.has_distractor = rng.uniform_open01() < cfg.distractor_prob;
  scene.distractor_shape = Shape(rng.uniform_int(3));
  scene.distractor_row = rng.uniform_int(cfg.height - cfg.glyph + 1);
  scene.distractor_col = rng.uniform_int(cfg.width - cfg.glyph + 1);

  if (high_dynamics) {
    scene.has_event = true;
    // Mid-video direction change; both legs stay short enough to fit.
    int lo = cfg.frames / 3, hi = 2 * cfg.frames / 3;
    scene.event_frame = lo + rng.uniform_int(hi - lo + 1);
    scene.first.dir = random_direction(rng);
    scene.first.speed = rng.uniform_int(2) == 0 ? kSlowSpeed : kFastSpeed;
    do {
      scene.second.dir = random_direction(rng);
    } while (scene.second.dir == scene.first.dir);
    scene.second.speed = rng.uniform_int(2) == 0 ? kSlowSpeed : kFastSpeed;
  } else if (rng.uniform_open01() < cfg.static_fraction) {
    scene.first = MotionSegment{Direction::kNone, 0.0};
  } else {
    scene.first.dir = random_direction(rng);
    scene.first.speed = rng.uniform_int(2) == 0 ? kSlowSpeed : kFastSpeed;
  }

  // Pick a start position keeping the whole trajectory in frame.
  double rmin = 0.0, rmax = 0.0, cmin = 0.0, cmax = 0.0;
  for (int t = 0; t < cfg.frames; ++t) {
    auto [dr, dc] = displacement(scene, t);
    rmin = std::min(rmin, dr);
    rmax = std::max(rmax, dr);
    cmin = std::min(cmin, dc);
    cmax = std::max(cmax, dc);
  }
  int row_lo = int(std::ceil(-rmin));
  int row_hi = int(std::floor(cfg.height - cfg.glyph - rmax));
  int col_lo = int(std::ceil(-cmin));
  int col_hi = int(std::floor(cfg.width - cfg.glyph - cmax));
  if (row_hi < row_lo || col_hi < col_lo) {
    throw std::logic_error("sample_scene: infeasible trajectory for frame size");
  }
  scene.start_row = row_lo + rng.uniform_int(row_hi - row_lo + 1);
  scene.start_col = col_lo + rng.uniform_int(col_hi - col_lo + 1);
  return scene;
}

VideoFrames render_scene(const SceneSpec& scene, const DataConfig& cfg) {
  VideoFrames video;
  video.frames = cfg.frames;
  video.height = cfg.height;
  video.width = cfg.width;
  video.pixels.assign(std::size_t(cfg.frames) * cfg.height * cfg.width, 0);
  for (int t = 0; t < cfg.frames; ++t) {
    if (scene.has_distractor) {
      draw_glyph(video, t, scene.distractor_shape, scene.distractor_row, scene.distractor_col,
                 cfg.glyph, kDistractorIntensity);
    }
    auto [dr, dc] = displacement(scene, t);
    int top = int(std::lround(scene.start_row + dr));
    int left = int(std::lround(scene.start_col + dc));
    draw_glyph(video, t, scene.shape, top, left, cfg.glyph,
               kColors[scene.color_level].intensity);
  }
  return video;
}

template <typename T>
void write_raw(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

}  // namespace

const std::vector<std::string>& caption_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v{"<pad>", "<bos>", "<eos>", "a"};
    for (const auto& c : kColors) v.push_back(c.word);
    v.insert(v.end(), {"square", "triangle", "circle"});
    v.insert(v.end(), {"sits", "drifts", "slides"});
    v.insert(v.end(), {"still", "left", "right", "up", "down"});
    v.push_back("then");
    return v;
  }();
  return vocab;
}

std::string caption_to_string(std::span<const int> ids) {
  const auto& vocab = caption_vocabulary();
  std::string out;
  for (int id : ids) {
    if (!out.empty()) out += ' ';
    out += (id >= 0 && id < int(vocab.size())) ? vocab[id] : "<unk>";
  }
  return out;
}

Dataset generate_dataset(int n_videos, double high_fraction, RngState rng, const DataConfig& cfg) {
  if (n_videos < 1) throw std::invalid_argument("generate_dataset: n_videos must be >= 1");
  if (high_fraction < 0.0 || high_fraction > 1.0) {
    throw std::invalid_argument("generate_dataset: high_fraction out of [0,1]");
  }
  Dataset ds;
  ds.config = cfg;

  // Exact stratification, then a deterministic shuffle.
  int n_high = int(std::lround(n_videos * high_fraction));
  std::vector<bool> label(n_videos, false);
  for (int i = 0; i < n_high; ++i) label[i] = true;
  RngState shuffle_rng = rng.fork(hash_string("shuffle"));
  for (int i = n_videos - 1; i > 0; --i) {
    int j = shuffle_rng.uniform_int(i + 1);
    std::swap(label[i], label[j]);
  }

  RngState scenes = rng.fork(hash_string("scenes"));
  ds.videos.reserve(n_videos);
  for (int i = 0; i < n_videos; ++i) {
    RngState vr = scenes.fork(std::uint64_t(i));
    SyntheticVideo video;
    video.high_dynamics = label[i];
    video.scene = sample_scene(vr, label[i], cfg);
    video.frames = render_scene(video.scene, cfg);
    video.caption = caption_for(video.scene);
    ds.videos.push_back(std::move(video));
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::ofstream header(fs::path(dir) / "header.txt");
  if (!header) throw std::runtime_error("write_dataset: cannot write header");
  const auto& vocab = caption_vocabulary();
  header << "adacap-dataset v1\n";
  header << "videos " << ds.videos.size() << "\n";
  header << "frames " << ds.config.frames << "\n";
  header << "height " << ds.config.height << "\n";
  header << "width " << ds.config.width << "\n";
  header << "vocab " << vocab.size() << "\n";
  for (const auto& w : vocab) header << w << "\n";
  header << "labels\n";
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    header << i << " " << (ds.videos[i].high_dynamics ? 1 : 0) << "\n";
  }
  header.close();

  std::ofstream frames(fs::path(dir) / "frames.bin", std::ios::binary);
  for (const auto& v : ds.videos) {
    frames.write(reinterpret_cast<const char*>(v.frames.pixels.data()),
                 std::streamsize(v.frames.pixels.size()));
  }
  frames.close();

  std::ofstream captions(fs::path(dir) / "captions.bin", std::ios::binary);
  for (const auto& v : ds.videos) {
    write_raw<std::uint32_t>(captions, std::uint32_t(v.caption.size()));
    for (int id : v.caption) write_raw<std::uint32_t>(captions, std::uint32_t(id));
  }
  if (!captions) throw std::runtime_error("write_dataset: write failed");
}

Dataset read_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream header(fs::path(dir) / "header.txt");
  if (!header) throw std::runtime_error("read_dataset: cannot open header in " + dir);
  std::string line;
  std::getline(header, line);
  if (line != "adacap-dataset v1") throw std::runtime_error("read_dataset: bad header magic");

  auto read_kv = [&](const std::string& key) {
    std::getline(header, line);
    std::istringstream ls(line);
    std::string k;
    long v = 0;
    ls >> k >> v;
    if (k != key) throw std::runtime_error("read_dataset: expected " + key + ", got " + line);
    return v;
  };
  long n_videos = read_kv("videos");
  Dataset ds;
  ds.config.frames = int(read_kv("frames"));
  ds.config.height = int(read_kv("height"));
  ds.config.width = int(read_kv("width"));
  long vocab_count = read_kv("vocab");
  const auto& vocab = caption_vocabulary();
  if (vocab_count != long(vocab.size())) {
    throw std::runtime_error("read_dataset: vocab mismatch");
  }
  for (long i = 0; i < vocab_count; ++i) {
    std::getline(header, line);
    if (line != vocab[i]) throw std::runtime_error("read_dataset: vocab word mismatch: " + line);
  }
  std::getline(header, line);
  if (line != "labels") throw std::runtime_error("read_dataset: missing labels section");
  std::vector<bool> labels(n_videos);
  for (long i = 0; i < n_videos; ++i) {
    std::getline(header, line);
    std::istringstream ls(line);
    long id = 0;
    int lab = 0;
    ls >> id >> lab;
    if (id != i) throw std::runtime_error("read_dataset: label id out of order");
    labels[i] = lab != 0;
  }

  std::ifstream frames(fs::path(dir) / "frames.bin", std::ios::binary);
  std::ifstream captions(fs::path(dir) / "captions.bin", std::ios::binary);
  if (!frames || !captions) throw std::runtime_error("read_dataset: missing data files");
  std::size_t frame_bytes = std::size_t(ds.config.frames) * ds.config.height * ds.config.width;
  ds.videos.resize(n_videos);
  for (long i = 0; i < n_videos; ++i) {
    SyntheticVideo& v = ds.videos[i];
    v.high_dynamics = labels[i];
    v.frames.frames = ds.config.frames;
    v.frames.height = ds.config.height;
    v.frames.width = ds.config.width;
    v.frames.pixels.resize(frame_bytes);
    frames.read(reinterpret_cast<char*>(v.frames.pixels.data()), std::streamsize(frame_bytes));
    auto len = read_raw<std::uint32_t>(captions);
    v.caption.resize(len);
    for (std::uint32_t k = 0; k < len; ++k) v.caption[k] = int(read_raw<std::uint32_t>(captions));
  }
  if (!frames || !captions) throw std::runtime_error("read_dataset: truncated data files");
  return ds;
}

VideoFrames subsample_frames(const VideoFrames& video, int target_frames) {
  if (target_frames < 1 || target_frames > video.frames) {
    throw std::invalid_argument("subsample_frames: bad target count");
  }
  VideoFrames out;
  out.frames = target_frames;
  out.height = video.height;
  out.width = video.width;
  out.pixels.reserve(std::size_t(target_frames) * video.height * video.width);
  std::size_t frame_bytes = std::size_t(video.height) * video.width;
  for (int j = 0; j < target_frames; ++j) {
    int src = target_frames == 1
                  ? 0
                  : int(std::lround(double(j) * (video.frames - 1) / (target_frames - 1)));
    const std::uint8_t* begin = video.pixels.data() + std::size_t(src) * frame_bytes;
    out.pixels.insert(out.pixels.end(), begin, begin + frame_bytes);
  }
  return out;
}

}  // namespace adacap
