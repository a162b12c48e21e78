#include "pdegcn/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json_io.hpp"
#include "pdegcn/errors.hpp"
#include "text_io.hpp"

namespace pdegcn {

void TrainConfig::validate() const {
  model.validate();
  for (double lr : {optimizer.lr_gcn, optimizer.lr_oc, optimizer.lr_alpha, optimizer.wd_oc}) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw UsageError("config: learning rates and weight decay must be >= 0");
  }
  if (epochs < 1) throw UsageError("config: epochs must be >= 1");
  if (patience > epochs) throw UsageError("config: patience must not exceed epochs");
  if (eval_every < 1) throw UsageError("config: eval_every must be >= 1");
  if (seeds.empty()) throw UsageError("config: at least one seed is required");
}

TrainConfig parse_train_config(std::string_view json_text) {
  detail::json root;
  try {
    root = detail::json::parse(json_text);
  } catch (const detail::json::exception& e) {
    throw UsageError(std::string("config: invalid JSON: ") + e.what());
  }
  detail::require_keys(root, "config",
                       {"dataset", "split", "model", "optimizer", "epochs", "patience", "eval_every", "seeds",
                        "row_normalize"});
  TrainConfig c;
  detail::read_field(root, "config", "dataset", c.dataset);
  if (root.contains("split")) {
    bool has_seed = false;
    c.split = detail::split_from_json(root["split"], "config.split", &has_seed);
    if (has_seed) c.split_seed = c.split.seed;
  }
  if (root.contains("model")) c.model = detail::model_from_json(root["model"], "config.model");
  if (root.contains("optimizer")) {
    const auto& opt = root["optimizer"];
    detail::require_keys(opt, "config.optimizer", {"lr_gcn", "lr_oc", "lr_alpha", "wd_oc"});
    detail::read_field(opt, "config.optimizer", "lr_gcn", c.optimizer.lr_gcn);
    detail::read_field(opt, "config.optimizer", "lr_oc", c.optimizer.lr_oc);
    detail::read_field(opt, "config.optimizer", "lr_alpha", c.optimizer.lr_alpha);
    detail::read_field(opt, "config.optimizer", "wd_oc", c.optimizer.wd_oc);
  }
  detail::read_field(root, "config", "epochs", c.epochs);
  detail::read_field(root, "config", "patience", c.patience);
  detail::read_field(root, "config", "eval_every", c.eval_every);
  if (root.contains("seeds")) {
    const auto& seeds = root["seeds"];
    if (!seeds.is_array()) throw UsageError("config.seeds: expected an array of non-negative integers");
    c.seeds.clear();
    for (const auto& s : seeds) {
      if (!s.is_number_unsigned()) throw UsageError("config.seeds: expected an array of non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  detail::read_field(root, "config", "row_normalize", c.row_normalize);
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_train_config(ss.str());
  } catch (const UsageError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

std::string to_json(const TrainConfig& config) {
  SplitSpec split = config.split;
  if (config.split_seed) split.seed = *config.split_seed;
  detail::json root = {{"dataset", config.dataset},
                       {"split", detail::split_to_json(split, config.split_seed.has_value())},
                       {"model", detail::model_to_json(config.model)},
                       {"optimizer",
                        {{"lr_gcn", config.optimizer.lr_gcn},
                         {"lr_oc", config.optimizer.lr_oc},
                         {"lr_alpha", config.optimizer.lr_alpha},
                         {"wd_oc", config.optimizer.wd_oc}}},
                       {"epochs", config.epochs},
                       {"patience", config.patience},
                       {"eval_every", config.eval_every},
                       {"seeds", config.seeds},
                       {"row_normalize", config.row_normalize}};
  return root.dump(2) + "\n";
}

Dataset with_split(Dataset dataset, const TrainConfig& config, const RunSeeds& seeds) {
  if (!dataset.masks.empty()) return dataset;
  SplitSpec spec = config.split;
  spec.seed = seeds.split;
  dataset.masks = make_split(dataset, spec);
  dataset.validate();
  return dataset;
}

double accuracy(const FeatureMatrix& logits, std::span<const int> labels, std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t r : rows) {
    const auto z = logits.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < z.size(); ++c) {
      if (z[c] > z[best]) best = c;
    }
    if (labels[r] >= 0 && static_cast<std::size_t>(labels[r]) == best) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

namespace {

struct Inputs {
  ad::Tensor vertices;
  std::optional<ad::Tensor> edges;
  const ad::Tensor* edge_ptr() const { return edges ? &*edges : nullptr; }
};

Inputs make_inputs(const Dataset& dataset) {
  Inputs in{ad::Tensor(dataset.features), std::nullopt};
  if (dataset.edge_features) in.edges = ad::Tensor(*dataset.edge_features);
  return in;
}

struct MaskRows {
  std::vector<std::size_t> train, val, test;
  explicit MaskRows(const SplitMasks& m)
      : train(SplitMasks::indices(m.train)), val(SplitMasks::indices(m.val)), test(SplitMasks::indices(m.test)) {}
};

Accuracy evaluate_rows(const ModelConfig& config, const ModelParams& params, const Dataset& dataset,
                       const GraphOperators& ops, const Inputs& inputs, const MaskRows& rows) {
  ad::Tape tape(false);
  const ad::Tensor logits = forward_network(tape, config, params, ops, inputs.vertices, inputs.edge_ptr());
  return {accuracy(logits.value(), dataset.labels, rows.train), accuracy(logits.value(), dataset.labels, rows.val),
          accuracy(logits.value(), dataset.labels, rows.test)};
}

ModelShape shape_of(const Dataset& dataset) {
  return {dataset.features.cols(), dataset.edge_features ? dataset.edge_features->cols() : 0, dataset.class_count};
}

}  // namespace

Accuracy evaluate(const ModelConfig& config, const ModelParams& params, const Dataset& dataset,
                  const GraphOperators& ops) {
  if (dataset.masks.empty()) throw UsageError("evaluate: the dataset has no train/val/test masks");
  return evaluate_rows(config, params, dataset, ops, make_inputs(dataset), MaskRows(dataset.masks));
}

Accuracy evaluate(const ModelConfig& config, const ModelParams& params, const Dataset& dataset) {
  return evaluate(config, params, dataset, GraphOperators::build(dataset.graph, config.normalization));
}

TrainResult train(const Dataset& source, const TrainConfig& config, std::uint64_t seed,
                  const TrainOptions& options) {
  config.validate();
  TrainResult result;
  result.seeds = RunSeeds::from_run_seed(seed);
  if (config.split_seed) result.seeds.split = *config.split_seed;
  const Dataset dataset = with_split(source, config, result.seeds);
  const MaskRows rows(dataset.masks);
  if (rows.train.empty()) throw DataError("train: the training mask is empty");

  result.shape = shape_of(dataset);
  const ModelConfig& model = config.model;
  const GraphOperators ops = GraphOperators::build(dataset.graph, model.normalization);
  result.stability_warning = stability_warning(model, ops.gradient);
  if (result.stability_warning && options.log) *options.log << "warning: " << *result.stability_warning << '\n';

  Rng init_rng(result.seeds.init);
  Rng dropout_rng(result.seeds.dropout);
  ModelParams params = init_params(model, result.shape, init_rng);

  std::vector<ad::AdamGroup> groups(3);
  groups[0] = {"pde", config.optimizer.lr_gcn, 0.0, {}};
  for (const auto& layer : params.layers) groups[0].params.push_back(layer.kernel);
  groups[1] = {"opening_closing", config.optimizer.lr_oc, config.optimizer.wd_oc, {params.opening, params.closing}};
  groups[2] = {"alpha", config.optimizer.lr_alpha, 0.0, {params.beta}};
  ad::Adam adam(std::move(groups));

  const Inputs inputs = make_inputs(dataset);
  ForwardOptions train_pass;
  train_pass.training = true;
  train_pass.dropout_rng = &dropout_rng;

  double best_val = -1.0;
  result.best_params = params.clone();
  using clock = std::chrono::steady_clock;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = clock::now();
    ad::Tape tape;
    const ad::Tensor logits = forward_network(tape, model, params, ops, inputs.vertices, inputs.edge_ptr(), train_pass);
    const ad::Tensor loss = ad::softmax_cross_entropy(tape, logits, dataset.labels, rows.train);
    if (!std::isfinite(loss.item())) {
      std::ostringstream msg;
      msg << "non-finite training loss at epoch " << epoch << " (alpha = " << params.alpha()
          << ", |K_o|^2 = " << params.opening.value().squared_norm()
          << ", |K_c|^2 = " << params.closing.value().squared_norm() << ")";
      throw NumericalError(msg.str());
    }
    try {
      tape.backward(loss);
    } catch (const NumericalError& e) {
      throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    adam.step();
    adam.zero_grad();
    result.epochs_run = epoch;

    const bool evaluate_now = epoch % config.eval_every == 0 || epoch == config.epochs;
    if (!evaluate_now) continue;
    const Accuracy acc = evaluate_rows(model, params, dataset, ops, inputs, rows);
    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.train_loss = loss.item();
    metrics.val_acc = acc.val;
    metrics.test_acc = acc.test;
    metrics.alpha = params.alpha();
    if (options.record_timing) {
      metrics.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
    }
    result.history.push_back(metrics);
    if (acc.val > best_val) {
      best_val = acc.val;
      result.best = acc;
      result.best_epoch = epoch;
      result.best_params = params.clone();
    }
    if (options.log && options.log_every > 0 && epoch % options.log_every == 0) {
      *options.log << "epoch " << epoch << " loss " << metrics.train_loss << " val " << acc.val << " test "
                   << acc.test << '\n';
    }
    if (epoch - result.best_epoch >= config.patience) break;
  }
  result.final_alpha = params.alpha();

  // Moments in declaration order (opening, kernels, closing, beta).
  const auto& m = adam.first_moments();
  const auto& v = adam.second_moments();
  const std::size_t layers = params.layers.size();
  std::vector<std::size_t> order;
  order.push_back(layers);
  for (std::size_t l = 0; l < layers; ++l) order.push_back(l);
  order.push_back(layers + 1);
  order.push_back(layers + 2);
  result.optimizer.step = adam.step_count();
  for (std::size_t k : order) {
    result.optimizer.first_moments.push_back(m[k]);
    result.optimizer.second_moments.push_back(v[k]);
  }
  return result;
}

void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> history, bool include_alpha) {
  out << "epoch,train_loss,val_acc,test_acc" << (include_alpha ? ",alpha" : "") << ",wall_ms\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << detail::format_double(h.train_loss) << ',' << detail::format_double(h.val_acc) << ','
        << detail::format_double(h.test_acc);
    if (include_alpha) out << ',' << detail::format_double(h.alpha);
    out << ',' << detail::format_double(h.wall_ms) << '\n';
  }
}

Checkpoint make_checkpoint(const TrainConfig& config, const TrainResult& result) {
  Checkpoint ck;
  ck.config = config.model;
  ck.shape = result.shape;
  ck.split = config.split;
  ck.split.seed = result.seeds.split;
  ck.row_normalize = config.row_normalize;
  ck.seeds = result.seeds;
  ck.epoch = result.best_epoch;
  for (const auto& t : result.best_params.all()) ck.params.push_back(t.value());
  ck.optimizer = result.optimizer;
  return ck;
}

}  // namespace pdegcn
