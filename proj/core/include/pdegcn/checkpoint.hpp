#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pdegcn/dataset.hpp"
#include "pdegcn/feature_matrix.hpp"
#include "pdegcn/network.hpp"

namespace pdegcn {

struct OptimizerSnapshot {
  std::uint64_t step = 0;
  std::vector<FeatureMatrix> first_moments;
  std::vector<FeatureMatrix> second_moments;
};

struct RunSeeds {
  std::uint64_t init = 0;
  std::uint64_t dropout = 0;
  std::uint64_t split = 0;

  /// Independent per-concern seeds derived from one run seed.
  static RunSeeds from_run_seed(std::uint64_t seed);
  bool operator==(const RunSeeds&) const = default;
};

struct Checkpoint {
  ModelConfig config;
  ModelShape shape;
  SplitSpec split;
  bool row_normalize = true;
  RunSeeds seeds;
  std::size_t epoch = 0;
  /// Parameter values in declaration order (see ModelParams::all()).
  std::vector<FeatureMatrix> params;
  std::optional<OptimizerSnapshot> optimizer;

  ModelParams to_params() const;
};

/// Canonical JSON of everything that fixes the parameter layout and the
/// forward computation.
std::string architecture_json(const ModelConfig& config, const ModelShape& shape);
/// 16 hex digits (FNV-1a 64) of architecture_json().
std::string architecture_hash(const ModelConfig& config, const ModelShape& shape);

/// File layout: the line "PDEGCN-CKPT 1", a little-endian uint64 header
/// length, the JSON header, then every parameter block (and optimizer moment
/// block) as little-endian IEEE-754 doubles in declaration order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws CheckpointError on a bad magic line, unreadable header, hash
/// mismatch, or a payload whose size disagrees with the header.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// As above, and additionally rejects a checkpoint whose architecture differs
/// from the expected one (the message names the expected architecture).
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected_config,
                           const ModelShape& expected_shape);

}  // namespace pdegcn
