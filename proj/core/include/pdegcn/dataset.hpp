#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pdegcn/feature_matrix.hpp"
#include "pdegcn/graph.hpp"

namespace pdegcn {

struct SplitMasks {
  std::vector<bool> train;
  std::vector<bool> val;
  std::vector<bool> test;

  bool empty() const { return train.empty(); }
  static std::vector<std::size_t> indices(const std::vector<bool>& mask);
};

struct Dataset {
  Graph graph;
  FeatureMatrix features;                     // n x c_in
  std::optional<FeatureMatrix> edge_features;  // m x c_edge, aligned with graph.edges()
  std::vector<int> labels;                     // -1 marks an unlabeled vertex
  SplitMasks masks;                            // empty until a split is made or loaded
  std::size_t class_count = 0;
  std::vector<std::string> class_names;
  /// Citation records read and dropped (unresolvable ids) by load_citation.
  std::size_t citation_records = 0;
  std::size_t dropped_citations = 0;

  /// Throws DataError if masks overlap, a masked vertex is unlabeled, or
  /// class_count disagrees with the labels.
  void validate() const;
};

struct LoadOptions {
  /// Scale each non-zero feature row to unit sum.
  bool row_normalize = true;
};

void row_normalize(FeatureMatrix& features);

/// Plain-text citation distribution: `content` lines are
/// `id f1 ... fk label`, `cites` lines are `cited citing`. Ids map to indices
/// in first-appearance order, labels to classes alphabetically; direction is
/// discarded. Throws DataError with the line number on malformed input.
Dataset load_citation(const std::filesystem::path& content, const std::filesystem::path& cites,
                      const LoadOptions& options = {});

enum class SplitMode { standard_semi, fractional };

struct SplitSpec {
  SplitMode mode = SplitMode::standard_semi;
  std::uint64_t seed = 0;
  std::size_t per_class = 20;
  std::size_t val_count = 500;
  std::size_t test_count = 1000;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
};

std::string_view to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view name);

/// standard_semi: after a seeded shuffle of the labeled vertices, the first
/// `per_class` of each class train, the next `val_count` validate, the next
/// `test_count` test. fractional: seeded per-class shuffle split by the
/// train/val fractions (remainder tests). Throws DataError when infeasible.
SplitMasks make_split(const Dataset& dataset, const SplitSpec& spec);

/// Directory bundle: meta.json, edges.csv, features.csv, labels.csv and
/// optional edge_features.csv and masks.csv. Masks found on disk are used
/// verbatim.
Dataset load_bundle(const std::filesystem::path& dir, const LoadOptions& options = {});
void save_bundle(const Dataset& dataset, const std::filesystem::path& dir);

/// Bundle directory if it holds meta.json, otherwise a directory with one
/// *.content and one *.cites file.
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});

}  // namespace pdegcn
