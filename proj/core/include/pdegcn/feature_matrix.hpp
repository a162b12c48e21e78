#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace pdegcn {

/// Dense row-major matrix of doubles. Rows index vertices (or edges),
/// columns index channels. The shape is fixed at construction.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static FeatureMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static FeatureMatrix identity(std::size_t n);
  /// n x 1 column.
  static FeatureMatrix column(std::initializer_list<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const FeatureMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  double squared_norm() const;
  void fill(double v);

  bool operator==(const FeatureMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Frobenius inner product. Throws ShapeError on mismatch.
double frobenius_dot(const FeatureMatrix& a, const FeatureMatrix& b);

/// a * b
FeatureMatrix matmul(const FeatureMatrix& a, const FeatureMatrix& b);
/// a * b^T
FeatureMatrix matmul_bt(const FeatureMatrix& a, const FeatureMatrix& b);
/// a^T * b
FeatureMatrix matmul_at(const FeatureMatrix& a, const FeatureMatrix& b);

FeatureMatrix transpose(const FeatureMatrix& a);

/// Horizontal concatenation; all blocks must share the row count.
FeatureMatrix concat_columns(std::span<const FeatureMatrix> blocks);

/// Largest absolute entrywise difference (ShapeError on mismatch).
double max_abs_diff(const FeatureMatrix& a, const FeatureMatrix& b);

}  // namespace pdegcn
