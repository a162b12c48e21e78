#include "pdegcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pdegcn/errors.hpp"

namespace pdegcn {

std::string_view to_string(Normalization mode) {
  switch (mode) {
    case Normalization::quarter_inv: return "quarter_inv";
    case Normalization::half_inv: return "half_inv";
    case Normalization::unit: return "unit";
  }
  return "?";
}

Normalization parse_normalization(std::string_view name) {
  if (name == "quarter_inv") return Normalization::quarter_inv;
  if (name == "half_inv") return Normalization::half_inv;
  if (name == "unit") return Normalization::unit;
  throw UsageError("unknown normalization '" + std::string(name) + "' (expected quarter_inv, half_inv or unit)");
}

Graph build_graph(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  Graph g;
  g.edges_.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    if (a >= n || b >= n) {
      std::ostringstream msg;
      msg << "edge (" << a << ", " << b << ") references a vertex outside [0, " << n << ")";
      throw DataError(msg.str());
    }
    if (a == b) continue;
    g.edges_.push_back(Edge{std::min(a, b), std::max(a, b)});
  }
  std::sort(g.edges_.begin(), g.edges_.end());
  g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());
  g.degree_.assign(n, 0);
  for (const auto& e : g.edges_) {
    ++g.degree_[e.i];
    ++g.degree_[e.j];
  }
  return g;
}

std::optional<std::size_t> Graph::find_edge(std::size_t a, std::size_t b) const {
  const Edge key{std::min(a, b), std::max(a, b)};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
  if (it == edges_.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - edges_.begin());
}

double edge_weight(const Graph& graph, Edge edge, Normalization mode) {
  if (!graph.find_edge(edge.i, edge.j)) {
    std::ostringstream msg;
    msg << "edge_weight: (" << edge.i << ", " << edge.j << ") is not an edge of the graph";
    throw UsageError(msg.str());
  }
  const double di = static_cast<double>(std::max<std::size_t>(graph.degree(edge.i), 1));
  const double dj = static_cast<double>(std::max<std::size_t>(graph.degree(edge.j), 1));
  switch (mode) {
    case Normalization::quarter_inv: return 1.0 / std::sqrt(std::sqrt(di * dj));
    case Normalization::half_inv: return 1.0 / std::sqrt(di * dj);
    case Normalization::unit: return 1.0;
  }
  return 1.0;
}

Graph grid_graph(std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw UsageError("grid_graph: width and height must be >= 1");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(2 * width * height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t v = y * width + x;
      if (x + 1 < width) pairs.emplace_back(v, v + 1);
      if (y + 1 < height) pairs.emplace_back(v, v + width);
    }
  }
  return build_graph(width * height, pairs);
}

KnnGraph knn_graph(const FeatureMatrix& points, std::size_t k) {
  const std::size_t n = points.rows();
  if (k < 1 || k >= n) {
    std::ostringstream msg;
    msg << "knn_graph: k = " << k << " must satisfy 1 <= k < " << n;
    throw UsageError(msg.str());
  }
  auto dist2 = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t c = 0; c < points.cols(); ++c) {
      const double d = points(a, c) - points(b, c);
      s += d * d;
    }
    return s;
  };
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * k);
  std::vector<std::size_t> order(n - 1);
  std::vector<double> d(n);
  for (std::size_t v = 0; v < n; ++v) {
    order.clear();
    for (std::size_t u = 0; u < n; ++u) {
      if (u == v) continue;
      d[u] = dist2(v, u);
      order.push_back(u);
    }
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
    for (std::size_t r = 0; r < k; ++r) pairs.emplace_back(v, order[r]);
  }
  KnnGraph out{build_graph(n, pairs), {}};
  out.edge_lengths.reserve(out.graph.edge_count());
  for (const auto& e : out.graph.edges()) out.edge_lengths.push_back(std::sqrt(dist2(e.i, e.j)));
  return out;
}

}  // namespace pdegcn
