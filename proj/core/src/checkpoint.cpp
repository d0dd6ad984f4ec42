// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "adacap/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace adacap {

namespace {

constexpr const char* kMagic = "adacap-checkpoint v1";

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; byte swapping is not implemented");

std::vector<ManifestEntry> parse_manifest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw std::runtime_error("checkpoint: bad magic line");
  }
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint: truncated header");
  std::istringstream head(line);
  std::string word;
  std::size_t count = 0;
  head >> word >> count;
  if (word != "params") throw std::runtime_error("checkpoint: missing params count");
  std::vector<ManifestEntry> manifest(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint: truncated manifest");
    std::istringstream ls(line);
    ManifestEntry& e = manifest[i];
    if (!(ls >> e.name >> e.rows >> e.cols >> e.count) ||
        e.count != std::size_t(e.rows) * e.cols) {
      throw std::runtime_error("checkpoint: malformed manifest entry: " + line);
    }
  }
  if (!std::getline(in, line) || line != "data") {
    throw std::runtime_error("checkpoint: missing data marker");
  }
  return manifest;
}

}  // namespace

void save_checkpoint(const ParamRegistry& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  out << kMagic << "\n";
  out << "params " << params.items().size() << "\n";
  for (const Parameter* p : params.items()) {
    out << p->name << " " << p->value.rows() << " " << p->value.cols() << " " << p->value.size()
        << "\n";
  }
  out << "data\n";
  for (const Parameter* p : params.items()) {
    out.write(reinterpret_cast<const char*>(p->value.data()),
              std::streamsize(p->value.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

void load_checkpoint(ParamRegistry& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
  std::vector<ManifestEntry> manifest = parse_manifest(in);
  if (manifest.size() != params.items().size()) {
    throw std::runtime_error("checkpoint: parameter count mismatch");
  }
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    Parameter* p = params.items()[i];
    const ManifestEntry& e = manifest[i];
    if (e.name != p->name || e.rows != p->value.rows() || e.cols != p->value.cols()) {
      throw std::runtime_error("checkpoint: manifest mismatch at " + e.name + " vs " + p->name);
    }
    in.read(reinterpret_cast<char*>(p->value.data()),
            std::streamsize(p->value.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated data at " + e.name);
  }
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
  return parse_manifest(in);
}

}  // namespace adacap
