// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "adacap/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace adacap {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kForkSalt = 0xD1B54A32D192ED03ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t RngState::next_u64() {
  ++position;
  return mix64(seed + position * kGolden);
}

double RngState::uniform_open01() {
  // 53 mantissa bits, shifted off the endpoints.
  std::uint64_t bits = next_u64() >> 11;
  return (double(bits) + 0.5) * (1.0 / 9007199254740992.0);  // 2^-53
}

double RngState::normal() {
  double u1 = uniform_open01();
  double u2 = uniform_open01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double RngState::gumbel() { return gumbel_from_uniform(uniform_open01()); }

int RngState::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  return int(next_u64() % std::uint64_t(n));
}

RngState RngState::fork(std::uint64_t stream) const {
  RngState child;
  child.seed = mix64(seed ^ kForkSalt ^ mix64(stream + kGolden));
  return child;
}

double gumbel_from_uniform(double u) {
  return -std::log(-std::log(u));
}

std::vector<double> gumbel_noise(RngState& rng, int n) {
  if (n < 1) throw std::invalid_argument("gumbel_noise: n must be >= 1");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = rng.gumbel();
  return out;
}

std::uint64_t hash_string(const char* s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (; *s; ++s) {
    h ^= std::uint64_t(static_cast<unsigned char>(*s));
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace adacap
