#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pdegcn/feature_matrix.hpp"
#include "pdegcn/random.hpp"
#include "pdegcn/sparse_operator.hpp"

namespace pdegcn::ad {

/// Shared handle to a value and its accumulated gradient. Copies alias the
/// same storage, so a parameter held by a model and captured by a tape
/// record is one object.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(FeatureMatrix value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const FeatureMatrix& value() const { return node_->value; }
  /// Writable access for optimizers and finite-difference probes.
  FeatureMatrix& mutable_value() { return node_->value; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  /// Value of a 1x1 tensor.
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return node_->has_grad; }
  /// Gradient buffer; all zeros (and correctly shaped) if nothing was accumulated.
  const FeatureMatrix& grad() const;
  // Gradient mutators are const: a Tensor is a handle and these act on the
  // shared node.
  void zero_grad() const;
  void accumulate_grad(const FeatureMatrix& g) const;
  void accumulate_grad_scaled(const FeatureMatrix& g, double scale) const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node {
    FeatureMatrix value;
    mutable FeatureMatrix grad;
    bool requires_grad = false;
    bool has_grad = false;
  };
  std::shared_ptr<Node> node_;
};

/// Ordered record of executed primitives. backward() replays the records in
/// exact reverse order, accumulating gradients additively into every input
/// that requires them. A tape constructed with recording = false builds no
/// records (inference mode). Sparse operators referenced by recorded
/// primitives must outlive the tape.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::size_t size() const { return records_.size(); }

  /// True when an op over these inputs must be recorded.
  bool needs_record(std::initializer_list<const Tensor*> inputs) const;
  void record(std::function<void()> backward_fn);

  /// Seeds d(loss)/d(loss) = 1 and runs all records backwards, then clears
  /// the tape. Throws ShapeError unless loss is 1x1 and NumericalError if a
  /// gradient turns non-finite.
  void backward(const Tensor& loss);
  void clear() { records_.clear(); }

 private:
  bool recording_;
  std::vector<std::function<void()>> records_;
};

/// Throws NumericalError naming `where` if any entry is NaN or infinite.
void require_finite(const FeatureMatrix& m, const char* where);

// Primitives. Each output requires grad iff any input does (and the tape is
// recording). Shape mismatches throw ShapeError.

/// x (n x a) * k (a x b). Rows of x that are mostly zero are cheap.
Tensor dense_linear(Tape& tape, const Tensor& x, const Tensor& k);
/// x (n x b) * k^T for k (a x b).
Tensor dense_linear_transposed(Tape& tape, const Tensor& x, const Tensor& k);
/// op * x
Tensor sparse_apply(Tape& tape, const SparseOperator& op, const Tensor& x);
/// op^T * q
Tensor sparse_apply_transpose(Tape& tape, const SparseOperator& op, const Tensor& q);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor subtract(Tape& tape, const Tensor& a, const Tensor& b);
/// a + s * b for a constant s.
Tensor axpy(Tape& tape, const Tensor& a, const Tensor& b, double s);
/// s * x for a constant s.
Tensor scale(Tape& tape, const Tensor& x, double s);
/// a * x + b elementwise for constants a, b.
Tensor affine(Tape& tape, const Tensor& x, double a, double b);
/// s * x where s is a 1x1 tensor (differentiable in both).
Tensor scalar_multiply(Tape& tape, const Tensor& x, const Tensor& s);
/// 1 / s for a 1x1 tensor.
Tensor reciprocal(Tape& tape, const Tensor& s);
Tensor concat_channels(Tape& tape, std::span<const Tensor> blocks);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);
enum class Nonlinearity { tanh, relu };

/// op^T (s(op x k) k^T), or op^T s(op x k) when not symmetric, for a square
/// k. Same value and gradients as chaining sparse_apply, dense_linear, the
/// activation, dense_linear_transposed and sparse_apply_transpose, but the
/// tape keeps only s(.) and recomputes op x, so a deep stack of these needs
/// one edge-sized buffer per layer instead of four.
Tensor edge_conv(Tape& tape, const SparseOperator& op, const Tensor& x, const Tensor& k, Nonlinearity s,
                 bool symmetric);
/// Logistic sigmoid of a 1x1 tensor.
Tensor sigmoid_scalar(Tape& tape, const Tensor& s);
/// Inverted dropout: kept entries are scaled by 1/(1-p). Identity (the same
/// tensor is returned) when training is false or p == 0. Throws UsageError
/// unless 0 <= p < 1.
Tensor dropout(Tape& tape, const Tensor& x, double p, Rng& rng, bool training);
/// Training-mode inverted dropout of a gradient-free data tensor. Zero entries
/// stay zero and consume no draws, so sparse inputs cost one draw per nonzero.
/// Throws UsageError if x requires a gradient.
Tensor input_dropout(const Tensor& x, double p, Rng& rng);

/// Mean over `rows` of -log softmax(logits[row])[labels[row]], stabilised by
/// subtracting the row maximum. Throws UsageError for an empty row set and
/// DataError for labels outside [0, logits.cols()).
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> labels,
                             std::span<const std::size_t> rows);

/// Sum of all entries as a 1x1 tensor.
Tensor sum(Tape& tape, const Tensor& x);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamGroup {
  std::string name;
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::vector<Tensor> params;
};

struct AdamHyperParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam with per-group learning rate and decoupled weight
/// decay: theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta).
class Adam {
 public:
  explicit Adam(std::vector<AdamGroup> groups, AdamHyperParams hyper = {});

  /// One update using each parameter's accumulated gradient (missing
  /// gradients count as zero). Parameters with requires_grad off are skipped.
  void step();
  /// One update with explicit gradients, flattened in group/param order.
  void step(std::span<const FeatureMatrix> grads);
  void zero_grad();

  std::uint64_t step_count() const { return t_; }
  const std::vector<AdamGroup>& groups() const { return groups_; }
  std::vector<AdamGroup>& groups() { return groups_; }
  const AdamHyperParams& hyper() const { return hyper_; }

  /// Moment buffers flattened in group/param order.
  const std::vector<FeatureMatrix>& first_moments() const { return m_; }
  const std::vector<FeatureMatrix>& second_moments() const { return v_; }
  /// Restores moments and step count; throws ShapeError on mismatch.
  void restore(std::uint64_t t, std::vector<FeatureMatrix> m, std::vector<FeatureMatrix> v);

 private:
  void update(std::size_t flat, Tensor& param, const FeatureMatrix& g, const AdamGroup& group,
              double bc1, double bc2);

  std::vector<AdamGroup> groups_;
  AdamHyperParams hyper_;
  std::uint64_t t_ = 0;
  std::vector<FeatureMatrix> m_;
  std::vector<FeatureMatrix> v_;
};

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// 0 checks every coordinate; otherwise a seeded sample per parameter.
  std::size_t max_coordinates_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
};

/// Central-difference check of the analytic gradient of the scalar built by
/// `loss_fn` on a fresh tape. Parameters with requires_grad off are skipped.
/// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const std::function<Tensor(Tape&)>& loss_fn, std::span<Tensor> params,
                           const GradCheckOptions& options = {});

}  // namespace pdegcn::ad
