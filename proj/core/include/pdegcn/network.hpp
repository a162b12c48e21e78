#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pdegcn/autodiff.hpp"
#include "pdegcn/graph.hpp"
#include "pdegcn/random.hpp"
#include "pdegcn/sparse_operator.hpp"

namespace pdegcn {

enum class Dynamics {
  diffusion,   // forward Euler on f_t = -G^T K^T s(K G f)
  hyperbolic,  // leapfrog on f_tt = -G^T K^T s(K G f)
  mixture,     // alpha f_tt + (1 - alpha) f_t = ..., alpha = sigmoid(beta)
  linear_diffusion,  // kernel-free f - h G^T G f; baseline for depth studies
};

enum class Activation { tanh, relu };

/// How the first leapfrog step treats the missing f^(-1).
enum class LeapfrogStart {
  repeat_initial,  // f^(-1) = f^(0)
  half_step,       // f^(1) = f^(0) - (h^2 / 2) force(f^(0))
};

std::string_view to_string(Dynamics d);
std::string_view to_string(Activation a);
std::string_view to_string(LeapfrogStart s);
Dynamics parse_dynamics(std::string_view name);
Activation parse_activation(std::string_view name);
LeapfrogStart parse_leapfrog_start(std::string_view name);

struct ModelConfig {
  Dynamics dynamics = Dynamics::diffusion;
  std::size_t layers = 2;
  std::size_t channels = 64;
  double step_size = 0.1;
  Activation activation = Activation::tanh;
  /// Include the leading K^T (symmetric positive semi-definite operator).
  bool symmetric = true;
  double dropout = 0.0;
  Normalization normalization = Normalization::quarter_inv;
  double alpha_init = 0.5;
  LeapfrogStart leapfrog_start = LeapfrogStart::repeat_initial;

  /// Throws UsageError on out-of-range fields.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Data-dependent sizes of a model.
struct ModelShape {
  std::size_t input_channels = 0;
  /// Edge attribute channels; 0 when the graph has none.
  std::size_t edge_channels = 0;
  std::size_t output_channels = 0;

  /// Width of the opening kernel input: c_in, or c_in + 2 c_edge.
  std::size_t opening_inputs() const { return input_channels + 2 * edge_channels; }
  bool operator==(const ModelShape&) const = default;
};

struct LayerParams {
  ad::Tensor kernel;  // c x c
};

struct ModelParams {
  ad::Tensor opening;  // c_in' x c
  std::vector<LayerParams> layers;
  ad::Tensor closing;  // c x c_out
  ad::Tensor beta;     // 1 x 1; trainable only for mixture dynamics

  double alpha() const;
  /// All tensors in declaration order: opening, layer kernels, closing, beta.
  std::vector<ad::Tensor> all() const;
  /// Deep copy (fresh storage, same values and flags).
  ModelParams clone() const;
};

/// Opening/closing kernels drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in));
/// layer kernels set to the identity; beta = logit(alpha_init).
ModelParams init_params(const ModelConfig& config, const ModelShape& shape, Rng& init_rng);

/// Gradient and average operators of one graph.
struct GraphOperators {
  SparseOperator gradient;
  SparseOperator average;

  static GraphOperators build(const Graph& graph, Normalization mode);
};

/// Warning text when h exceeds the explicit-scheme bound for the estimated
/// lambda_max(G^T G): h lambda > 2 (diffusion) or h^2 lambda > 4 (leapfrog).
std::optional<std::string> stability_warning(const ModelConfig& config, const SparseOperator& gradient);

/// G^T K^T s(K G f), or G^T s(K G f) when not symmetric.
ad::Tensor pde_force(ad::Tape& tape, const ad::Tensor& f, const ad::Tensor& kernel,
                     const SparseOperator& gradient, Activation activation, bool symmetric);

/// ReLU(dropout(u_V [+ A^T u_E + G^T u_E]) K_o).
ad::Tensor opening_layer(ad::Tape& tape, const ModelParams& params, const ad::Tensor& vertex_features,
                         const ad::Tensor* edge_features, const GraphOperators& ops, double dropout,
                         Rng* rng, bool training);

/// f - h G^T K^T s(K G f)
ad::Tensor diffusion_step(ad::Tape& tape, const ad::Tensor& f, const ad::Tensor& kernel,
                          const SparseOperator& gradient, double h, Activation activation, bool symmetric);

/// 2 f - f_prev - h^2 G^T K^T s(K G f)
ad::Tensor hyperbolic_step(ad::Tape& tape, const ad::Tensor& f, const ad::Tensor& f_prev,
                           const ad::Tensor& kernel, const SparseOperator& gradient, double h,
                           Activation activation, bool symmetric);

/// Solves alpha (f+ - 2f + f_prev) + h (1 - alpha)(f+ - f) = -h^2 force for f+.
/// `alpha` is a 1x1 tensor in (0, 1).
ad::Tensor mixture_step(ad::Tape& tape, const ad::Tensor& f, const ad::Tensor& f_prev,
                        const ad::Tensor& kernel, const SparseOperator& gradient, double h,
                        const ad::Tensor& alpha, Activation activation, bool symmetric);

/// dropout(f_L) K_c; no activation.
ad::Tensor closing_layer(ad::Tape& tape, const ModelParams& params, const ad::Tensor& f,
                         double dropout, Rng* rng, bool training);

struct ForwardOptions {
  bool training = false;
  /// Required when training with dropout > 0.
  Rng* dropout_rng = nullptr;
  /// When set, receives f^(0), ..., f^(L).
  std::vector<FeatureMatrix>* trace = nullptr;
};

/// opening -> L PDE blocks -> closing.
ad::Tensor forward_network(ad::Tape& tape, const ModelConfig& config, const ModelParams& params,
                           const GraphOperators& ops, const ad::Tensor& vertex_features,
                           const ad::Tensor* edge_features, const ForwardOptions& options = {});

}  // namespace pdegcn
