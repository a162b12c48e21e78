// Forward and forward+backward passes of the full network.

#include <benchmark/benchmark.h>

#include <random>

#include "pdegcn/autodiff.hpp"
#include "pdegcn/graph.hpp"
#include "pdegcn/network.hpp"

namespace {

using namespace pdegcn;

struct Instance {
  Graph graph;
  GraphOperators ops;
  ad::Tensor features;
  std::vector<int> labels;
  std::vector<std::size_t> rows;
  ModelConfig config;
  ModelParams params;
};

// Cora-sized random instance: 2708 vertices, ~5400 edges, 1433 sparse features.
Instance make_instance(Dynamics dynamics, std::size_t layers, std::size_t channels) {
  std::mt19937_64 rng(7);
  const std::size_t n = 2708, c_in = 1433, classes = 7;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t k = 0; k < 2 * n; ++k) {
    const std::size_t a = pick(rng), b = pick(rng);
    if (a != b) edges.emplace_back(a, b);
  }
  Instance s;
  s.graph = build_graph(n, edges);
  s.ops = GraphOperators::build(s.graph, Normalization::half_inv);
  FeatureMatrix u(n, c_in);
  std::bernoulli_distribution on(0.013);
  for (double& v : u.values()) v = on(rng) ? 1.0 : 0.0;
  s.features = ad::Tensor(u);
  for (std::size_t v = 0; v < n; ++v) s.labels.push_back(static_cast<int>(v % classes));
  for (std::size_t v = 0; v < 140; ++v) s.rows.push_back(v);
  s.config.dynamics = dynamics;
  s.config.layers = layers;
  s.config.channels = channels;
  s.config.step_size = 0.5;
  s.config.dropout = 0.6;
  s.config.normalization = Normalization::half_inv;
  Rng init(1);
  s.params = init_params(s.config, {c_in, 0, classes}, init);
  return s;
}

void BM_Forward(benchmark::State& state) {
  const auto s = make_instance(static_cast<Dynamics>(state.range(0)), static_cast<std::size_t>(state.range(1)), 64);
  for (auto _ : state) {
    ad::Tape tape(false);
    benchmark::DoNotOptimize(forward_network(tape, s.config, s.params, s.ops, s.features, nullptr));
  }
  state.SetLabel(std::string(to_string(s.config.dynamics)));
}

void BM_TrainingStep(benchmark::State& state) {
  const auto s = make_instance(static_cast<Dynamics>(state.range(0)), static_cast<std::size_t>(state.range(1)), 64);
  Rng drop(2);
  ForwardOptions options;
  options.training = true;
  options.dropout_rng = &drop;
  for (auto _ : state) {
    ad::Tape tape;
    const auto logits = forward_network(tape, s.config, s.params, s.ops, s.features, nullptr, options);
    const auto loss = ad::softmax_cross_entropy(tape, logits, s.labels, s.rows);
    tape.backward(loss);
    for (const auto& p : s.params.all()) p.zero_grad();
  }
  state.SetLabel(std::string(to_string(s.config.dynamics)));
}

void layer_sweep(benchmark::internal::Benchmark* b) {
  for (auto d : {Dynamics::diffusion, Dynamics::hyperbolic, Dynamics::mixture}) {
    for (long layers : {2, 16, 64}) b->Args({static_cast<long>(d), layers});
  }
  b->Unit(benchmark::kMillisecond);
}

BENCHMARK(BM_Forward)->Apply(layer_sweep);
BENCHMARK(BM_TrainingStep)->Apply(layer_sweep);

}  // namespace

BENCHMARK_MAIN();
