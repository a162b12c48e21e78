#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "pdegcn/feature_matrix.hpp"
#include "pdegcn/graph.hpp"
#include "pdegcn/network.hpp"
#include "pdegcn/sparse_operator.hpp"

namespace pdegcn {

/// Squared Frobenius norm of every captured layer.
std::vector<double> norm_trace(std::span<const FeatureMatrix> trace);

struct EnergyRecord {
  std::size_t layer = 0;
  double feature_norm_sq = 0.0;
  /// ||(f^(l) - f^(l-1)) / h||^2 with f^(-1) = f^(0).
  double velocity_norm_sq = 0.0;
  /// (K G f^(l), s(K G f^(l)))
  double potential = 0.0;
  double e_net = 0.0;
  /// ||K_0 G f^(0)||^2, the conserved energy of the linear wave equation
  /// started at rest.
  double e_lin_0 = 0.0;
};

struct EnergyTrace {
  std::vector<EnergyRecord> records;
};

/// Energy quantities along a trace f^(0..L). Layer l uses kernel
/// min(l, L-1); an empty kernel list means identity kernels. Throws
/// UsageError for traces shorter than 2 or h <= 0.
EnergyTrace hyperbolic_energy(std::span<const FeatureMatrix> trace, std::span<const FeatureMatrix> kernels,
                              const SparseOperator& gradient, double h, Activation activation);

EnergyTrace hyperbolic_energy(std::span<const FeatureMatrix> trace, const ModelParams& params,
                              const SparseOperator& gradient, double h, Activation activation);

/// Population variance of all entries of the field.
double field_variance(const FeatureMatrix& f);

struct PropagationResult {
  std::vector<FeatureMatrix> trace;  // f^(0..steps)
  EnergyTrace energy;
};

/// Runs `steps` PDE blocks of `config.dynamics` from f0 with identity
/// kernels (or the given kernels, one per step) and no opening/closing.
PropagationResult propagate(const Graph& graph, const FeatureMatrix& f0, const ModelConfig& config,
                            std::size_t steps, std::span<const FeatureMatrix> kernels = {});

/// `step,node,c0[,c1,...]`, one row per step per node.
void write_fields_csv(std::ostream& out, std::span<const FeatureMatrix> trace);
/// `step,norm_sq,velocity_sq,potential,e_net,e_lin_0`.
void write_energy_csv(std::ostream& out, const EnergyTrace& energy);

/// propagate() followed by fields.csv and energy.csv in `out_dir`. Throws
/// DataError naming the path on I/O failure.
PropagationResult propagate_and_record(const Graph& graph, const FeatureMatrix& f0, const ModelConfig& config,
                                       std::size_t steps, const std::filesystem::path& out_dir,
                                       std::span<const FeatureMatrix> kernels = {});

/// True when s is monotone non-decreasing and sign-preserving on the sample
/// points (the precondition of both energy results).
bool activation_qualifies(Activation activation, std::span<const double> samples);

}  // namespace pdegcn
