#include "pdegcn/sparse_operator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pdegcn/errors.hpp"
#include "pdegcn/random.hpp"

namespace pdegcn {

namespace {

void build_csr(std::size_t rows, std::vector<Triplet>& entries, std::vector<std::size_t>& row_ptr,
               std::vector<std::size_t>& col_idx, std::vector<double>& values) {
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row < b.row || (a.row == b.row && a.col < b.col);
  });
  row_ptr.assign(rows + 1, 0);
  col_idx.resize(entries.size());
  values.resize(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    ++row_ptr[entries[k].row + 1];
    col_idx[k] = entries[k].col;
    values[k] = entries[k].weight;
  }
  for (std::size_t r = 0; r < rows; ++r) row_ptr[r + 1] += row_ptr[r];
}

void spmm(std::size_t out_rows, const std::vector<std::size_t>& row_ptr, const std::vector<std::size_t>& col_idx,
          const std::vector<double>& values, const FeatureMatrix& x, FeatureMatrix& out) {
  const std::size_t c = x.cols();
  for (std::size_t r = 0; r < out_rows; ++r) {
    double* dst = out.data() + r * c;
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const double w = values[k];
      const double* src = x.data() + col_idx[k] * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += w * src[j];
    }
  }
}

}  // namespace

SparseOperator::SparseOperator(std::size_t rows, std::size_t cols, std::vector<Triplet> entries)
    : rows_(rows), cols_(cols) {
  for (const auto& t : entries) {
    if (t.row >= rows || t.col >= cols) {
      std::ostringstream msg;
      msg << "SparseOperator: entry (" << t.row << ", " << t.col << ") outside " << rows << "x" << cols;
      throw DataError(msg.str());
    }
    if (!std::isfinite(t.weight)) {
      std::ostringstream msg;
      msg << "SparseOperator: non-finite weight at (" << t.row << ", " << t.col << ")";
      throw DataError(msg.str());
    }
  }
  build_csr(rows, entries, row_ptr_, col_idx_, values_);
  for (std::size_t k = 1; k < entries.size(); ++k) {
    if (entries[k].row == entries[k - 1].row && entries[k].col == entries[k - 1].col) {
      std::ostringstream msg;
      msg << "SparseOperator: duplicate entry (" << entries[k].row << ", " << entries[k].col << ")";
      throw DataError(msg.str());
    }
  }
  for (auto& t : entries) std::swap(t.row, t.col);
  build_csr(cols, entries, t_row_ptr_, t_col_idx_, t_values_);
}

std::vector<Triplet> SparseOperator::entries() const {
  std::vector<Triplet> out;
  out.reserve(values_.size());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out.push_back({r, col_idx_[k], values_[k]});
  }
  return out;
}

FeatureMatrix SparseOperator::apply(const FeatureMatrix& x) const {
  if (x.rows() != cols_) {
    std::ostringstream msg;
    msg << "SparseOperator::apply: expected " << cols_ << " input rows, got " << x.rows();
    throw ShapeError(msg.str());
  }
  FeatureMatrix out(rows_, x.cols());
  spmm(rows_, row_ptr_, col_idx_, values_, x, out);
  return out;
}

FeatureMatrix SparseOperator::apply_transpose(const FeatureMatrix& q) const {
  if (q.rows() != rows_) {
    std::ostringstream msg;
    msg << "SparseOperator::apply_transpose: expected " << rows_ << " input rows, got " << q.rows();
    throw ShapeError(msg.str());
  }
  FeatureMatrix out(cols_, q.cols());
  spmm(cols_, t_row_ptr_, t_col_idx_, t_values_, q, out);
  return out;
}

SparseOperator build_gradient(const Graph& graph, Normalization mode) {
  std::vector<Triplet> entries;
  entries.reserve(2 * graph.edge_count());
  const auto edges = graph.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double w = edge_weight(graph, edges[e], mode);
    entries.push_back({e, edges[e].i, w});
    entries.push_back({e, edges[e].j, -w});
  }
  return SparseOperator(graph.edge_count(), graph.vertex_count(), std::move(entries));
}

SparseOperator build_average(const Graph& graph, Normalization mode) {
  std::vector<Triplet> entries;
  entries.reserve(2 * graph.edge_count());
  const auto edges = graph.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double w = 0.5 * edge_weight(graph, edges[e], mode);
    entries.push_back({e, edges[e].i, w});
    entries.push_back({e, edges[e].j, w});
  }
  return SparseOperator(graph.edge_count(), graph.vertex_count(), std::move(entries));
}

double estimate_spectral_radius(const SparseOperator& op, std::size_t iterations, std::uint64_t seed) {
  const std::size_t n = op.cols();
  if (n == 0 || op.nonzeros() == 0) return 0.0;
  Rng rng(seed);
  FeatureMatrix v(n, 1);
  for (double& x : v.values()) x = rng.uniform(-1.0, 1.0);
  double best = 0.0;
  for (std::size_t it = 0; it <= iterations; ++it) {
    const double norm = std::sqrt(v.squared_norm());
    if (norm == 0.0) break;
    for (double& x : v.values()) x /= norm;
    const FeatureMatrix gv = op.apply(v);
    // Rayleigh quotient of M^T M at the unit vector v.
    best = std::max(best, gv.squared_norm());
    v = op.apply_transpose(gv);
  }
  return best;
}

}  // namespace pdegcn
