// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "adacap/captioner.hpp"

namespace adacap {

struct ManifestEntry {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t count = 0;
};

// One file per checkpoint: a text manifest (ordered parameter names, shapes,
// element counts), then the raw little-endian 64-bit float buffers in
// manifest order.
void save_checkpoint(const ParamRegistry& params, const std::string& path);

// Loads into an existing registry; manifest must match the registry's
// parameter names and shapes in order.
void load_checkpoint(ParamRegistry& params, const std::string& path);

std::vector<ManifestEntry> read_manifest(const std::string& path);

}  // namespace adacap
