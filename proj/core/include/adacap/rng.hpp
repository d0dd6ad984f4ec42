// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

namespace adacap {

// Counter-based generator: the output at each step is a pure function of
// (seed, position), so identical seed + call sequence reproduces the same
// stream bit-exactly. There is no global RNG anywhere in the library; every
// stochastic operation takes an explicit RngState.
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t position = 0;

  RngState() = default;
  explicit RngState(std::uint64_t s) : seed(s) {}

  std::uint64_t next_u64();

  // Uniform on (0,1), both endpoints excluded.
  double uniform_open01();

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();

  double gumbel();

  // Uniform integer in [0, n).
  int uniform_int(int n);

  // Independent substream keyed by `stream`. Forking does not advance this
  // state, so fork(a), fork(b) are order-independent.
  RngState fork(std::uint64_t stream) const;
};

// g = -log(-log(u)) for u in (0,1).
double gumbel_from_uniform(double u);

std::vector<double> gumbel_noise(RngState& rng, int n);

// FNV-1a, used to derive named parameter-init streams.
std::uint64_t hash_string(const char* s);

}  // namespace adacap
