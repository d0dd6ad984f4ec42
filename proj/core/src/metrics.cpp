// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "adacap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace adacap {

namespace {

using Ngram = std::vector<int>;

std::map<Ngram, int> ngram_counts(std::span<const int> tokens, int n) {
  std::map<Ngram, int> counts;
  if (int(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    counts[Ngram(tokens.begin() + i, tokens.begin() + i + n)] += 1;
  }
  return counts;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void BleuAccumulator::add(std::span<const int> candidate, std::span<const int> reference) {
  candidate_len_ += static_cast<long long>(candidate.size());
  reference_len_ += static_cast<long long>(reference.size());
  for (int n = 1; n <= 4; ++n) {
    auto cand = ngram_counts(candidate, n);
    auto ref = ngram_counts(reference, n);
    long long matched = 0, total = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      auto it = ref.find(gram);
      if (it != ref.end()) matched += std::min(count, it->second);
    }
    matched_[n - 1] += matched;
    total_[n - 1] += total;
  }
}

BleuScores BleuAccumulator::corpus() const {
  BleuScores scores{};
  if (candidate_len_ == 0) return scores;
  double brevity = candidate_len_ >= reference_len_
                       ? 1.0
                       : std::exp(1.0 - double(reference_len_) / double(candidate_len_));
  double log_sum = 0.0;
  bool zero = false;
  for (int n = 1; n <= 4; ++n) {
    if (total_[n - 1] == 0 || matched_[n - 1] == 0) zero = true;
    if (!zero) log_sum += std::log(double(matched_[n - 1]) / double(total_[n - 1]));
    scores[n - 1] = zero ? 0.0 : brevity * std::exp(log_sum / n);
  }
  return scores;
}

BleuScores sentence_bleu(std::span<const int> candidate, std::span<const int> reference) {
  BleuAccumulator acc;
  acc.add(candidate, reference);
  return acc.corpus();
}

std::string metrics_to_json_line(const MetricsReport& r) {
  std::string out = "{";
  out += "\"epoch\":" + std::to_string(r.epoch);
  out += ",\"loss\":" + format_double(r.loss);
  out += ",\"token_accuracy\":" + format_double(r.token_accuracy);
  if (r.has_bleu) {
    for (int n = 1; n <= 4; ++n) {
      out += ",\"bleu" + std::to_string(n) + "\":" + format_double(r.bleu[n - 1]);
    }
  }
  out += ",\"routing_rate\":" + format_double(r.routing_rate);
  out += ",\"mean_frame_set\":" + format_double(r.mean_frame_set);
  out += ",\"mean_token_fraction\":" + format_double(r.mean_token_fraction);
  out += "}";
  return out;
}

std::string metrics_csv_header() {
  return "label,epoch,loss,token_accuracy,bleu1,bleu2,bleu3,bleu4,routing_rate,mean_frame_set,"
         "mean_token_fraction";
}

std::string metrics_to_csv_line(const std::string& label, const MetricsReport& r) {
  std::string out = label + "," + std::to_string(r.epoch);
  out += "," + format_double(r.loss);
  out += "," + format_double(r.token_accuracy);
  for (int n = 0; n < 4; ++n) out += "," + format_double(r.has_bleu ? r.bleu[n] : 0.0);
  out += "," + format_double(r.routing_rate);
  out += "," + format_double(r.mean_frame_set);
  out += "," + format_double(r.mean_token_fraction);
  return out;
}

}  // namespace adacap
