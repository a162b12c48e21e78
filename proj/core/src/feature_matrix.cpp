#include "pdegcn/feature_matrix.hpp"

#include <Eigen/Core>
#include <cmath>
#include <sstream>

#include "pdegcn/errors.hpp"

namespace pdegcn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

ConstMap view(const FeatureMatrix& m) {
  return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}
Map view(FeatureMatrix& m) {
  return Map(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

[[noreturn]] void shape_mismatch(const char* op, const FeatureMatrix& a, const FeatureMatrix& b) {
  std::ostringstream msg;
  msg << op << ": incompatible shapes " << a.rows() << "x" << a.cols() << " and " << b.rows() << "x"
      << b.cols();
  throw ShapeError(msg.str());
}

// Inputs such as bag-of-words features are mostly zeros; below this density
// a row-sparse kernel beats a dense product by orders of magnitude.
constexpr double kSparseDensity = 0.15;

double density(const FeatureMatrix& a) {
  if (a.size() == 0) return 0.0;
  std::size_t nz = 0;
  for (double v : a.values()) nz += (v != 0.0);
  return static_cast<double>(nz) / static_cast<double>(a.size());
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    std::ostringstream msg;
    msg << "FeatureMatrix: " << data_.size() << " values for shape " << rows << "x" << cols;
    throw ShapeError(msg.str());
  }
}

FeatureMatrix FeatureMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("FeatureMatrix::from_rows: ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return FeatureMatrix(r, c, std::move(values));
}

FeatureMatrix FeatureMatrix::identity(std::size_t n) {
  FeatureMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

FeatureMatrix FeatureMatrix::column(std::initializer_list<double> values) {
  return FeatureMatrix(values.size(), 1, std::vector<double>(values));
}

bool FeatureMatrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double FeatureMatrix::squared_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

void FeatureMatrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double frobenius_dot(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (!a.same_shape(b)) shape_mismatch("frobenius_dot", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

FeatureMatrix matmul(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  FeatureMatrix out(a.rows(), b.cols());
  if (out.size() == 0 || a.cols() == 0) return out;
  if (density(a) < kSparseDensity) {
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double* dst = out.data() + i * n;
      const double* arow = a.data() + i * a.cols();
      for (std::size_t k = 0; k < a.cols(); ++k) {
        const double s = arow[k];
        if (s == 0.0) continue;
        const double* brow = b.data() + k * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] += s * brow[j];
      }
    }
    return out;
  }
  view(out).noalias() = view(a) * view(b);
  return out;
}

FeatureMatrix matmul_bt(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.cols() != b.cols()) shape_mismatch("matmul_bt", a, b);
  FeatureMatrix out(a.rows(), b.rows());
  if (out.size() == 0 || a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b).transpose();
  return out;
}

FeatureMatrix matmul_at(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.rows() != b.rows()) shape_mismatch("matmul_at", a, b);
  FeatureMatrix out(a.cols(), b.cols());
  if (out.size() == 0 || a.rows() == 0) return out;
  if (density(a) < kSparseDensity) {
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double* arow = a.data() + i * a.cols();
      const double* brow = b.data() + i * n;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        const double s = arow[k];
        if (s == 0.0) continue;
        double* dst = out.data() + k * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] += s * brow[j];
      }
    }
    return out;
  }
  view(out).noalias() = view(a).transpose() * view(b);
  return out;
}

FeatureMatrix transpose(const FeatureMatrix& a) {
  FeatureMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

FeatureMatrix concat_columns(std::span<const FeatureMatrix> blocks) {
  if (blocks.empty()) return {};
  const std::size_t rows = blocks.front().rows();
  std::size_t cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) shape_mismatch("concat_columns", blocks.front(), b);
    cols += b.cols();
  }
  FeatureMatrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.data() + r * cols;
    for (const auto& b : blocks) {
      const auto src = b.row(r);
      std::copy(src.begin(), src.end(), dst);
      dst += b.cols();
    }
  }
  return out;
}

double max_abs_diff(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (!a.same_shape(b)) shape_mismatch("max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace pdegcn
