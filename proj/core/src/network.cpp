#include "pdegcn/network.hpp"

#include <cmath>
#include <sstream>

#include "pdegcn/errors.hpp"

namespace pdegcn {

std::string_view to_string(Dynamics d) {
  switch (d) {
    case Dynamics::diffusion: return "diffusion";
    case Dynamics::hyperbolic: return "hyperbolic";
    case Dynamics::mixture: return "mixture";
    case Dynamics::linear_diffusion: return "linear_diffusion";
  }
  return "?";
}

std::string_view to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

std::string_view to_string(LeapfrogStart s) {
  return s == LeapfrogStart::repeat_initial ? "repeat_initial" : "half_step";
}

Dynamics parse_dynamics(std::string_view name) {
  if (name == "diffusion") return Dynamics::diffusion;
  if (name == "hyperbolic") return Dynamics::hyperbolic;
  if (name == "mixture") return Dynamics::mixture;
  if (name == "linear_diffusion") return Dynamics::linear_diffusion;
  throw UsageError("unknown dynamics '" + std::string(name) +
                   "' (expected diffusion, hyperbolic, mixture or linear_diffusion)");
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw UsageError("unknown activation '" + std::string(name) + "' (expected tanh or relu)");
}

LeapfrogStart parse_leapfrog_start(std::string_view name) {
  if (name == "repeat_initial") return LeapfrogStart::repeat_initial;
  if (name == "half_step") return LeapfrogStart::half_step;
  throw UsageError("unknown leapfrog start '" + std::string(name) + "' (expected repeat_initial or half_step)");
}

void ModelConfig::validate() const {
  if (layers < 1) throw UsageError("model: layers must be >= 1");
  if (channels < 1) throw UsageError("model: channels must be >= 1");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw UsageError("model: step_size must be finite and > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("model: dropout must lie in [0, 1)");
  if (!(alpha_init > 0.0 && alpha_init < 1.0)) throw UsageError("model: alpha_init must lie in (0, 1)");
}

double ModelParams::alpha() const {
  const double b = beta.item();
  return b >= 0.0 ? 1.0 / (1.0 + std::exp(-b)) : std::exp(b) / (1.0 + std::exp(b));
}

std::vector<ad::Tensor> ModelParams::all() const {
  std::vector<ad::Tensor> out;
  out.reserve(layers.size() + 3);
  out.push_back(opening);
  for (const auto& layer : layers) out.push_back(layer.kernel);
  out.push_back(closing);
  out.push_back(beta);
  return out;
}

ModelParams ModelParams::clone() const {
  auto copy = [](const ad::Tensor& t) { return ad::Tensor(t.value(), t.requires_grad()); };
  ModelParams out;
  out.opening = copy(opening);
  for (const auto& layer : layers) out.layers.push_back({copy(layer.kernel)});
  out.closing = copy(closing);
  out.beta = copy(beta);
  return out;
}

ModelParams init_params(const ModelConfig& config, const ModelShape& shape, Rng& init_rng) {
  config.validate();
  if (shape.input_channels == 0 || shape.output_channels == 0) {
    throw UsageError("model shape needs at least one input and one output channel");
  }
  auto uniform_kernel = [&](std::size_t fan_in, std::size_t fan_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    FeatureMatrix k(fan_in, fan_out);
    for (double& v : k.values()) v = init_rng.uniform(-bound, bound);
    return ad::Tensor(std::move(k), true);
  };
  ModelParams params;
  params.opening = uniform_kernel(shape.opening_inputs(), config.channels);
  const bool kernels_trainable = config.dynamics != Dynamics::linear_diffusion;
  for (std::size_t l = 0; l < config.layers; ++l) {
    params.layers.push_back({ad::Tensor(FeatureMatrix::identity(config.channels), kernels_trainable)});
  }
  params.closing = uniform_kernel(config.channels, shape.output_channels);
  const double a = config.alpha_init;
  params.beta = ad::Tensor::scalar(std::log(a / (1.0 - a)), config.dynamics == Dynamics::mixture);
  return params;
}

GraphOperators GraphOperators::build(const Graph& graph, Normalization mode) {
  return {build_gradient(graph, mode), build_average(graph, mode)};
}

std::optional<std::string> stability_warning(const ModelConfig& config, const SparseOperator& gradient) {
  const double lambda = estimate_spectral_radius(gradient, 200, 0);
  const double h = config.step_size;
  std::ostringstream msg;
  msg.precision(4);
  switch (config.dynamics) {
    case Dynamics::diffusion:
    case Dynamics::linear_diffusion:
      if (h * lambda > 2.0) {
        msg << "step size h = " << h << " exceeds the forward Euler bound: h * lambda_max = " << h * lambda
            << " > 2 (lambda_max ~ " << lambda << ")";
        return msg.str();
      }
      break;
    case Dynamics::hyperbolic:
    case Dynamics::mixture:
      if (h * h * lambda > 4.0) {
        msg << "step size h = " << h << " exceeds the leapfrog bound: h^2 * lambda_max = " << h * h * lambda
            << " > 4 (lambda_max ~ " << lambda << ")";
        return msg.str();
      }
      break;
  }
  return std::nullopt;
}

ad::Tensor pde_force(ad::Tape& tape, const ad::Tensor& f, const ad::Tensor& kernel, const SparseOperator& gradient,
                     Activation activation, bool symmetric) {
  const auto s = activation == Activation::tanh ? ad::Nonlinearity::tanh : ad::Nonlinearity::relu;
  return ad::edge_conv(tape, gradient, f, kernel, s, symmetric);
}

namespace {

ad::Tensor opening_input(ad::Tape& tape, const ad::Tensor& vertex_features, const ad::Tensor* edge_features,
                         const GraphOperators& ops) {
  if (edge_features == nullptr) return vertex_features;
  if (edge_features->rows() != ops.gradient.rows()) {
    std::ostringstream msg;
    msg << "edge attributes have " << edge_features->rows() << " rows but the graph has " << ops.gradient.rows()
        << " edges";
    throw ShapeError(msg.str());
  }
  const ad::Tensor blocks[] = {vertex_features, ad::sparse_apply_transpose(tape, ops.average, *edge_features),
                               ad::sparse_apply_transpose(tape, ops.gradient, *edge_features)};
  return ad::concat_channels(tape, blocks);
}

ad::Tensor maybe_dropout(ad::Tape& tape, const ad::Tensor& x, double p, Rng* rng, bool training) {
  if (!(p >= 0.0 && p < 1.0)) throw UsageError("dropout probability must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  if (rng == nullptr) throw UsageError("dropout during training needs a random generator");
  return ad::dropout(tape, x, p, *rng, true);
}

}  // namespace

ad::Tensor opening_layer(ad::Tape& tape, const ModelParams& params, const ad::Tensor& vertex_features,
                         const ad::Tensor* edge_features, const GraphOperators& ops, double dropout, Rng* rng,
                         bool training) {
  if (vertex_features.rows() != ops.gradient.cols()) {
    std::ostringstream msg;
    msg << "vertex features have " << vertex_features.rows() << " rows but the graph has " << ops.gradient.cols()
        << " vertices";
    throw ShapeError(msg.str());
  }
  const ad::Tensor input = opening_input(tape, vertex_features, edge_features, ops);
  // Data inputs carry no gradient, so their zeros can skip the dropout draw.
  const bool data_only = !input.requires_grad() && training && rng != nullptr;
  const ad::Tensor dropped =
      data_only ? ad::input_dropout(input, dropout, *rng) : maybe_dropout(tape, input, dropout, rng, training);
  return ad::relu(tape, ad::dense_linear(tape, dropped, params.opening));
}

ad::Tensor diffusion_step(ad::Tape& tape, const ad::Tensor& f, const ad::Tensor& kernel,
                          const SparseOperator& gradient, double h, Activation activation, bool symmetric) {
  const ad::Tensor force = pde_force(tape, f, kernel, gradient, activation, symmetric);
  return ad::axpy(tape, f, force, -h);
}

ad::Tensor hyperbolic_step(ad::Tape& tape, const ad::Tensor& f, const ad::Tensor& f_prev, const ad::Tensor& kernel,
                           const SparseOperator& gradient, double h, Activation activation, bool symmetric) {
  if (!f.value().same_shape(f_prev.value())) throw ShapeError("hyperbolic_step: f and f_prev differ in shape");
  const ad::Tensor force = pde_force(tape, f, kernel, gradient, activation, symmetric);
  const ad::Tensor momentum = ad::subtract(tape, ad::scale(tape, f, 2.0), f_prev);
  return ad::axpy(tape, momentum, force, -h * h);
}

ad::Tensor mixture_step(ad::Tape& tape, const ad::Tensor& f, const ad::Tensor& f_prev, const ad::Tensor& kernel,
                        const SparseOperator& gradient, double h, const ad::Tensor& alpha, Activation activation,
                        bool symmetric) {
  if (!f.value().same_shape(f_prev.value())) throw ShapeError("mixture_step: f and f_prev differ in shape");
  const double a = alpha.item();
  const double denominator = a + h * (1.0 - a);
  if (!(denominator > 0.0)) {
    std::ostringstream msg;
    msg << "mixture_step: alpha + h (1 - alpha) = " << denominator << " is not positive";
    throw NumericalError(msg.str());
  }
  const ad::Tensor force = pde_force(tape, f, kernel, gradient, activation, symmetric);
  const ad::Tensor momentum = ad::subtract(tape, ad::scale(tape, f, 2.0), f_prev);
  const ad::Tensor wave = ad::scalar_multiply(tape, momentum, alpha);
  const ad::Tensor damping = ad::scalar_multiply(tape, ad::scale(tape, f, h), ad::affine(tape, alpha, -1.0, 1.0));
  const ad::Tensor numerator = ad::subtract(tape, ad::add(tape, wave, damping), ad::scale(tape, force, h * h));
  const ad::Tensor inv = ad::reciprocal(tape, ad::affine(tape, alpha, 1.0 - h, h));
  return ad::scalar_multiply(tape, numerator, inv);
}

ad::Tensor closing_layer(ad::Tape& tape, const ModelParams& params, const ad::Tensor& f, double dropout, Rng* rng,
                         bool training) {
  return ad::dense_linear(tape, maybe_dropout(tape, f, dropout, rng, training), params.closing);
}

ad::Tensor forward_network(ad::Tape& tape, const ModelConfig& config, const ModelParams& params,
                           const GraphOperators& ops, const ad::Tensor& vertex_features,
                           const ad::Tensor* edge_features, const ForwardOptions& options) {
  if (params.layers.size() != config.layers) {
    std::ostringstream msg;
    msg << "model has " << params.layers.size() << " layer kernels but the config asks for " << config.layers;
    throw ShapeError(msg.str());
  }
  const double h = config.step_size;
  ad::Tensor f = opening_layer(tape, params, vertex_features, edge_features, ops, config.dropout,
                               options.dropout_rng, options.training);
  ad::require_finite(f.value(), "opening layer output");
  if (options.trace) options.trace->push_back(f.value());

  ad::Tensor f_prev = f;
  ad::Tensor alpha;
  if (config.dynamics == Dynamics::mixture) alpha = ad::sigmoid_scalar(tape, params.beta);

  for (std::size_t l = 0; l < config.layers; ++l) {
    const ad::Tensor& kernel = params.layers[l].kernel;
    ad::Tensor next;
    switch (config.dynamics) {
      case Dynamics::diffusion:
        next = diffusion_step(tape, f, kernel, ops.gradient, h, config.activation, config.symmetric);
        break;
      case Dynamics::linear_diffusion: {
        const ad::Tensor lap =
            ad::sparse_apply_transpose(tape, ops.gradient, ad::sparse_apply(tape, ops.gradient, f));
        next = ad::axpy(tape, f, lap, -h);
        break;
      }
      case Dynamics::hyperbolic:
        if (l == 0 && config.leapfrog_start == LeapfrogStart::half_step) {
          const ad::Tensor force = pde_force(tape, f, kernel, ops.gradient, config.activation, config.symmetric);
          next = ad::axpy(tape, f, force, -0.5 * h * h);
        } else {
          next = hyperbolic_step(tape, f, f_prev, kernel, ops.gradient, h, config.activation, config.symmetric);
        }
        break;
      case Dynamics::mixture:
        next = mixture_step(tape, f, f_prev, kernel, ops.gradient, h, alpha, config.activation, config.symmetric);
        break;
    }
    ad::require_finite(next.value(), "PDE block output");
    f_prev = f;
    f = std::move(next);
    if (options.trace) options.trace->push_back(f.value());
  }
  return closing_layer(tape, params, f, config.dropout, options.dropout_rng, options.training);
}

}  // namespace pdegcn
