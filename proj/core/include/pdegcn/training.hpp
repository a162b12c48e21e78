#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdegcn/checkpoint.hpp"
#include "pdegcn/dataset.hpp"
#include "pdegcn/network.hpp"

namespace pdegcn {

struct OptimizerConfig {
  double lr_gcn = 5e-5;   // PDE block kernels; never weight-decayed
  double lr_oc = 0.07;    // opening and closing kernels
  double lr_alpha = 0.01; // beta (mixture only)
  double wd_oc = 5e-4;
};

struct TrainConfig {
  std::string dataset;
  SplitSpec split;
  /// When unset the split seed is derived from each run seed.
  std::optional<std::uint64_t> split_seed;
  ModelConfig model;
  OptimizerConfig optimizer;
  std::size_t epochs = 1000;
  std::size_t patience = 100;
  std::size_t eval_every = 1;
  std::vector<std::uint64_t> seeds{0};
  bool row_normalize = true;

  /// Throws UsageError on invalid values.
  void validate() const;
};

/// Strict JSON parsing: unknown keys and wrong types throw UsageError.
TrainConfig parse_train_config(std::string_view json_text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string to_json(const TrainConfig& config);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  double alpha = 0.0;
  double wall_ms = 0.0;
};

struct Accuracy {
  double train = 0.0;
  double val = 0.0;
  double test = 0.0;
};

struct TrainResult {
  RunSeeds seeds;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  Accuracy best;  // accuracies of the best-validation parameters
  double final_alpha = 0.0;
  std::vector<EpochMetrics> history;
  ModelParams best_params;
  ModelShape shape;
  OptimizerSnapshot optimizer;
  std::optional<std::string> stability_warning;
};

struct TrainOptions {
  /// Record wall_ms per epoch; off gives bit-reproducible metrics.
  bool record_timing = true;
  /// Progress lines, if set.
  std::ostream* log = nullptr;
  std::size_t log_every = 50;
};

/// Seeded split unless the dataset already carries masks.
Dataset with_split(Dataset dataset, const TrainConfig& config, const RunSeeds& seeds);

/// Adam with three groups (PDE kernels at lr_gcn without weight decay,
/// opening/closing at lr_oc with wd_oc, beta at lr_alpha for mixture), early
/// stopping on validation accuracy after `patience` evaluations without a
/// strict improvement. Throws NumericalError on a non-finite loss.
TrainResult train(const Dataset& dataset, const TrainConfig& config, std::uint64_t seed,
                  const TrainOptions& options = {});

/// Fraction of rows whose arg-max (ties to the lowest class) equals the label.
double accuracy(const FeatureMatrix& logits, std::span<const int> labels, std::span<const std::size_t> rows);

Accuracy evaluate(const ModelConfig& config, const ModelParams& params, const Dataset& dataset,
                  const GraphOperators& ops);
Accuracy evaluate(const ModelConfig& config, const ModelParams& params, const Dataset& dataset);

/// epoch,train_loss,val_acc,test_acc[,alpha],wall_ms
void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> history, bool include_alpha);

Checkpoint make_checkpoint(const TrainConfig& config, const TrainResult& result);

}  // namespace pdegcn
