#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "pdegcn/feature_matrix.hpp"

namespace pdegcn {

/// Undirected edge stored with canonical orientation i < j.
struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;

  auto operator<=>(const Edge&) const = default;
};

/// Per-edge scale gamma_ij used by the gradient and average operators.
///   quarter_inv: (d_i d_j)^(-1/4)
///   half_inv:    (d_i d_j)^(-1/2)
///   unit:        1
enum class Normalization { quarter_inv, half_inv, unit };

std::string_view to_string(Normalization mode);
/// Throws UsageError for unknown names.
Normalization parse_normalization(std::string_view name);

/// Simple undirected graph: no self-loops, no parallel edges, edges sorted
/// lexicographically. Immutable once built.
class Graph {
 public:
  Graph() = default;

  std::size_t vertex_count() const { return degree_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const std::size_t> degrees() const { return degree_; }
  std::size_t degree(std::size_t v) const { return degree_[v]; }

  /// Index of edge {a, b} in edges(), in either orientation.
  std::optional<std::size_t> find_edge(std::size_t a, std::size_t b) const;

  bool operator==(const Graph&) const = default;

 private:
  friend Graph build_graph(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> pairs);

  std::vector<Edge> edges_;
  std::vector<std::size_t> degree_;
};

/// Drops self-loops, merges duplicates in either orientation and computes
/// degrees. Throws DataError naming the offending pair when an index is >= n.
Graph build_graph(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> pairs);

inline Graph build_graph(std::size_t n, std::initializer_list<std::pair<std::size_t, std::size_t>> pairs) {
  return build_graph(n, std::span<const std::pair<std::size_t, std::size_t>>(pairs.begin(), pairs.size()));
}

/// gamma_ij for an edge of the graph. Degrees are clamped to at least 1.
/// Throws UsageError if the edge is not present.
double edge_weight(const Graph& graph, Edge edge, Normalization mode);

/// 4-connected width x height lattice; vertex (x, y) has index y * width + x.
Graph grid_graph(std::size_t width, std::size_t height);

/// k-nearest-neighbour graph plus the Euclidean length of every stored edge
/// (aligned with graph.edges()), for callers that want d_ij^-1 weights.
struct KnnGraph {
  Graph graph;
  std::vector<double> edge_lengths;
};

/// Rows of `points` are coordinates. An edge is kept if either endpoint
/// selects the other; distance ties go to the lower index.
KnnGraph knn_graph(const FeatureMatrix& points, std::size_t k);

}  // namespace pdegcn
