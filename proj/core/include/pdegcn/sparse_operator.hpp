#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pdegcn/feature_matrix.hpp"
#include "pdegcn/graph.hpp"

namespace pdegcn {

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double weight = 0.0;
};

/// Weighted sparse linear map acting channel-wise on feature matrices.
/// Compressed row layouts of both the operator and its transpose are built
/// once, so apply and apply_transpose each accumulate one output row at a
/// time in a fixed order.
class SparseOperator {
 public:
  SparseOperator() = default;
  /// Throws DataError on out-of-range indices, duplicate (row, col) pairs or
  /// non-finite weights.
  SparseOperator(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  /// Entries in row-major order.
  std::vector<Triplet> entries() const;

  /// M x. Throws ShapeError if x.rows() != cols().
  FeatureMatrix apply(const FeatureMatrix& x) const;
  /// M^T q. Throws ShapeError if q.rows() != rows().
  FeatureMatrix apply_transpose(const FeatureMatrix& q) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  // CSR of M
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
  // CSR of M^T
  std::vector<std::size_t> t_row_ptr_;
  std::vector<std::size_t> t_col_idx_;
  std::vector<double> t_values_;
};

/// Discrete gradient (weighted incidence matrix), m x n:
/// (G f)_e = gamma_ij (f_i - f_j) for e = (i, j), i < j.
SparseOperator build_gradient(const Graph& graph, Normalization mode);

/// Edge average, m x n: (A f)_e = gamma_ij (f_i + f_j) / 2.
SparseOperator build_average(const Graph& graph, Normalization mode);

/// Power-iteration estimate of lambda_max(M^T M) for an operator M. The
/// returned value is the largest Rayleigh quotient seen, so it never
/// decreases with more iterations and never exceeds the true value (up to
/// roundoff). Deterministic for a given seed; 0 for a zero operator.
double estimate_spectral_radius(const SparseOperator& op, std::size_t iterations, std::uint64_t seed);

}  // namespace pdegcn
