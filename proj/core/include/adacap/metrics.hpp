// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace adacap {

// BLEU-1..4 (index n-1 holds BLEU-n).
using BleuScores = std::array<double, 4>;

// Corpus-level BLEU with modified (clipped) n-gram precision against a
// single reference and the standard brevity penalty. No smoothing: a zero
// precision at any order zeroes the score of that order and above.
class BleuAccumulator {
 public:
  void add(std::span<const int> candidate, std::span<const int> reference);
  BleuScores corpus() const;

 private:
  std::array<long long, 4> matched_{};
  std::array<long long, 4> total_{};
  long long candidate_len_ = 0;
  long long reference_len_ = 0;
};

BleuScores sentence_bleu(std::span<const int> candidate, std::span<const int> reference);

struct MetricsReport {
  int epoch = -1;
  double loss = 0.0;
  double token_accuracy = 0.0;
  bool has_bleu = false;
  BleuScores bleu{};
  double routing_rate = 0.0;        // fraction of videos sent to the large module
  double mean_frame_set = 0.0;      // mean |selected frame set|
  double mean_token_fraction = 0.0; // mean |selected token set| / total tokens
};

// One line-delimited JSON record per report.
std::string metrics_to_json_line(const MetricsReport& r);

// CSV with a fixed column order; `header` emits the column names.
std::string metrics_csv_header();
std::string metrics_to_csv_line(const std::string& label, const MetricsReport& r);

}  // namespace adacap
