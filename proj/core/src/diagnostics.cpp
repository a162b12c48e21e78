#include "pdegcn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "pdegcn/errors.hpp"
#include "text_io.hpp"

namespace pdegcn {

std::vector<double> norm_trace(std::span<const FeatureMatrix> trace) {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& f : trace) out.push_back(f.squared_norm());
  return out;
}

namespace {

double activate(Activation a, double x) { return a == Activation::tanh ? std::tanh(x) : std::max(x, 0.0); }

FeatureMatrix kernel_gradient(const FeatureMatrix& f, const FeatureMatrix* kernel, const SparseOperator& gradient) {
  FeatureMatrix gf = gradient.apply(f);
  return kernel ? matmul(gf, *kernel) : gf;
}

EnergyTrace energy_of(std::span<const FeatureMatrix> trace, std::span<const FeatureMatrix> kernels,
                      const SparseOperator& gradient, double h, Activation activation) {
  auto kernel_at = [&](std::size_t l) -> const FeatureMatrix* {
    if (kernels.empty()) return nullptr;
    return &kernels[std::min(l, kernels.size() - 1)];
  };
  EnergyTrace out;
  out.records.reserve(trace.size());
  const double e_lin_0 = kernel_gradient(trace[0], kernel_at(0), gradient).squared_norm();
  for (std::size_t l = 0; l < trace.size(); ++l) {
    const FeatureMatrix& f = trace[l];
    const FeatureMatrix& prev = l == 0 ? trace[0] : trace[l - 1];
    EnergyRecord r;
    r.layer = l;
    r.feature_norm_sq = f.squared_norm();
    double v = 0.0;
    const auto fv = f.values();
    const auto pv = prev.values();
    for (std::size_t k = 0; k < fv.size(); ++k) {
      const double d = (fv[k] - pv[k]) / h;
      v += d * d;
    }
    r.velocity_norm_sq = v;
    const FeatureMatrix z = kernel_gradient(f, kernel_at(l), gradient);
    double p = 0.0;
    for (double x : z.values()) p += x * activate(activation, x);
    r.potential = p;
    r.e_net = r.velocity_norm_sq + r.potential;
    r.e_lin_0 = e_lin_0;
    out.records.push_back(r);
  }
  return out;
}

}  // namespace

EnergyTrace hyperbolic_energy(std::span<const FeatureMatrix> trace, std::span<const FeatureMatrix> kernels,
                              const SparseOperator& gradient, double h, Activation activation) {
  if (trace.size() < 2) throw UsageError("hyperbolic_energy: the trace needs at least two layers");
  if (!(h > 0.0)) throw UsageError("hyperbolic_energy: h must be > 0");
  return energy_of(trace, kernels, gradient, h, activation);
}

EnergyTrace hyperbolic_energy(std::span<const FeatureMatrix> trace, const ModelParams& params,
                              const SparseOperator& gradient, double h, Activation activation) {
  std::vector<FeatureMatrix> kernels;
  kernels.reserve(params.layers.size());
  for (const auto& layer : params.layers) kernels.push_back(layer.kernel.value());
  return hyperbolic_energy(trace, kernels, gradient, h, activation);
}

double field_variance(const FeatureMatrix& f) {
  if (f.empty()) return 0.0;
  double mean = 0.0;
  for (double v : f.values()) mean += v;
  mean /= static_cast<double>(f.size());
  double var = 0.0;
  for (double v : f.values()) var += (v - mean) * (v - mean);
  return var / static_cast<double>(f.size());
}

PropagationResult propagate(const Graph& graph, const FeatureMatrix& f0, const ModelConfig& config,
                            std::size_t steps, std::span<const FeatureMatrix> kernels) {
  config.validate();
  if (f0.rows() != graph.vertex_count()) {
    std::ostringstream msg;
    msg << "propagate: field has " << f0.rows() << " rows but the graph has " << graph.vertex_count() << " vertices";
    throw ShapeError(msg.str());
  }
  for (const auto& k : kernels) {
    if (k.rows() != f0.cols() || k.cols() != f0.cols()) throw ShapeError("propagate: kernels must be c x c");
  }
  const SparseOperator gradient = build_gradient(graph, config.normalization);
  ad::Tape tape(false);
  const ad::Tensor identity(FeatureMatrix::identity(f0.cols()));
  auto kernel_at = [&](std::size_t l) {
    if (kernels.empty()) return identity;
    return ad::Tensor(kernels[std::min(l, kernels.size() - 1)]);
  };
  const double h = config.step_size;
  const ad::Tensor alpha = ad::Tensor::scalar(config.alpha_init);

  PropagationResult result;
  result.trace.reserve(steps + 1);
  result.trace.push_back(f0);
  ad::Tensor f(f0);
  ad::Tensor f_prev = f;
  for (std::size_t l = 0; l < steps; ++l) {
    const ad::Tensor kernel = kernel_at(l);
    ad::Tensor next;
    switch (config.dynamics) {
      case Dynamics::diffusion:
        next = diffusion_step(tape, f, kernel, gradient, h, config.activation, config.symmetric);
        break;
      case Dynamics::linear_diffusion:
        next = ad::Tensor(f.value());
        {
          const FeatureMatrix lap = gradient.apply_transpose(gradient.apply(f.value()));
          auto nv = next.mutable_value().values();
          auto lv = lap.values();
          for (std::size_t k = 0; k < nv.size(); ++k) nv[k] -= h * lv[k];
        }
        break;
      case Dynamics::hyperbolic:
        if (l == 0 && config.leapfrog_start == LeapfrogStart::half_step) {
          const ad::Tensor force = pde_force(tape, f, kernel, gradient, config.activation, config.symmetric);
          next = ad::subtract(tape, f, ad::scale(tape, force, 0.5 * h * h));
        } else {
          next = hyperbolic_step(tape, f, f_prev, kernel, gradient, h, config.activation, config.symmetric);
        }
        break;
      case Dynamics::mixture:
        next = mixture_step(tape, f, f_prev, kernel, gradient, h, alpha, config.activation, config.symmetric);
        break;
    }
    ad::require_finite(next.value(), "propagated field");
    f_prev = f;
    f = next;
    result.trace.push_back(f.value());
  }
  std::vector<FeatureMatrix> kernel_values;
  if (!kernels.empty()) kernel_values.assign(kernels.begin(), kernels.end());
  result.energy = energy_of(result.trace, kernel_values, gradient, h, config.activation);
  return result;
}

void write_fields_csv(std::ostream& out, std::span<const FeatureMatrix> trace) {
  const std::size_t channels = trace.empty() ? 1 : trace.front().cols();
  out << "step,node";
  for (std::size_t c = 0; c < channels; ++c) out << ",c" << c;
  out << '\n';
  for (std::size_t step = 0; step < trace.size(); ++step) {
    const FeatureMatrix& f = trace[step];
    for (std::size_t v = 0; v < f.rows(); ++v) {
      out << step << ',' << v;
      for (double x : f.row(v)) out << ',' << detail::format_double17(x);
      out << '\n';
    }
  }
}

void write_energy_csv(std::ostream& out, const EnergyTrace& energy) {
  out << "step,norm_sq,velocity_sq,potential,e_net,e_lin_0\n";
  for (const auto& r : energy.records) {
    out << r.layer << ',' << detail::format_double17(r.feature_norm_sq) << ','
        << detail::format_double17(r.velocity_norm_sq) << ',' << detail::format_double17(r.potential) << ','
        << detail::format_double17(r.e_net) << ',' << detail::format_double17(r.e_lin_0) << '\n';
  }
}

namespace {

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  body(out);
  out.flush();
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace

PropagationResult propagate_and_record(const Graph& graph, const FeatureMatrix& f0, const ModelConfig& config,
                                       std::size_t steps, const std::filesystem::path& out_dir,
                                       std::span<const FeatureMatrix> kernels) {
  PropagationResult result = propagate(graph, f0, config, steps, kernels);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create directory '" + out_dir.string() + "': " + ec.message());
  write_file(out_dir / "fields.csv", [&](std::ostream& o) { write_fields_csv(o, result.trace); });
  write_file(out_dir / "energy.csv", [&](std::ostream& o) { write_energy_csv(o, result.energy); });
  return result;
}

bool activation_qualifies(Activation activation, std::span<const double> samples) {
  std::vector<double> xs(samples.begin(), samples.end());
  std::sort(xs.begin(), xs.end());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double y = activate(activation, xs[k]);
    if (y * xs[k] < 0.0) return false;
    if (xs[k] == 0.0 && y != 0.0) return false;
    if (k > 0 && y < activate(activation, xs[k - 1])) return false;
  }
  return true;
}

}  // namespace pdegcn
