// Sparse gradient/average operators on grids and random graphs.

#include <benchmark/benchmark.h>

#include <random>

#include "pdegcn/graph.hpp"
#include "pdegcn/sparse_operator.hpp"

namespace {

using namespace pdegcn;

FeatureMatrix random_features(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  FeatureMatrix f(rows, cols);
  for (double& v : f.values()) v = normal(rng);
  return f;
}

// Roughly Cora-sized: n vertices, about 2n edges.
Graph sparse_random_graph(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t k = 0; k < 2 * n; ++k) {
    const std::size_t a = pick(rng), b = pick(rng);
    if (a != b) edges.emplace_back(a, b);
  }
  return build_graph(n, edges);
}

void BM_BuildGradient(benchmark::State& state) {
  const Graph g = sparse_random_graph(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(build_gradient(g, Normalization::half_inv));
  state.counters["edges"] = static_cast<double>(g.edge_count());
}
BENCHMARK(BM_BuildGradient)->Arg(2708)->Arg(19717);

void BM_GradientApply(benchmark::State& state) {
  const Graph g = sparse_random_graph(static_cast<std::size_t>(state.range(0)), 2);
  const SparseOperator G = build_gradient(g, Normalization::half_inv);
  const FeatureMatrix f = random_features(g.vertex_count(), static_cast<std::size_t>(state.range(1)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(G.apply(f));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(G.nonzeros() * f.cols()));
}
BENCHMARK(BM_GradientApply)->Args({2708, 64})->Args({19717, 256});

void BM_GradientTransposeApply(benchmark::State& state) {
  const Graph g = sparse_random_graph(static_cast<std::size_t>(state.range(0)), 2);
  const SparseOperator G = build_gradient(g, Normalization::half_inv);
  const FeatureMatrix q = random_features(g.edge_count(), static_cast<std::size_t>(state.range(1)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(G.apply_transpose(q));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(G.nonzeros() * q.cols()));
}
BENCHMARK(BM_GradientTransposeApply)->Args({2708, 64})->Args({19717, 256});

void BM_LaplacianGrid(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const Graph g = grid_graph(side, side);
  const SparseOperator G = build_gradient(g, Normalization::quarter_inv);
  const FeatureMatrix f = random_features(g.vertex_count(), 1, 5);
  for (auto _ : state) benchmark::DoNotOptimize(G.apply_transpose(G.apply(f)));
}
BENCHMARK(BM_LaplacianGrid)->Arg(20)->Arg(200);

void BM_SpectralRadius(benchmark::State& state) {
  const Graph g = sparse_random_graph(2708, 6);
  const SparseOperator G = build_gradient(g, Normalization::quarter_inv);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_spectral_radius(G, 200, 0));
}
BENCHMARK(BM_SpectralRadius);

}  // namespace

BENCHMARK_MAIN();
