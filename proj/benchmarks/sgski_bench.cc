#include <benchmark/benchmark.h>

#include <random>

#include "sgski/interp.h"
#include "sgski/kernel.h"
#include "sgski/sgmvm.h"

namespace {

using namespace sgski;

std::vector<double> random_vector(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = normal(rng);
  return v;
}

RowMatrix random_points(Index n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif;
  RowMatrix x(n, dim);
  for (double& v : x.data()) v = unif(rng);
  return x;
}

// Arguments: level, dim.
void BM_SparseGridMvmRecursive(benchmark::State& state) {
  const int level = static_cast<int>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  const MvmPlan plan = MvmPlan::build(level, dim, ProductKernel::isotropic(dim, 0.5));
  const auto v = random_vector(plan.size(), 1);
  std::vector<double> out(v.size());
  for (auto _ : state) {
    sg_mvm(plan, v, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["grid_size"] = static_cast<double>(plan.size());
}
BENCHMARK(BM_SparseGridMvmRecursive)
    ->ArgsProduct({{2, 3, 4, 5, 6}, {6}})
    ->Args({4, 8})
    ->Unit(benchmark::kMillisecond);

void BM_SparseGridMvmIterative(benchmark::State& state) {
  const int level = static_cast<int>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  const Index batch = state.range(2);
  const MvmPlan plan = MvmPlan::build(level, dim, ProductKernel::isotropic(dim, 0.5));
  const auto v = random_vector(plan.size() * batch, 2);
  std::vector<double> out(v.size());
  MvmWorkspace ws;
  for (auto _ : state) {
    sg_mvm_batched(plan, v, out, batch, &ws);
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["grid_size"] = static_cast<double>(plan.size());
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_SparseGridMvmIterative)
    ->ArgsProduct({{2, 3, 4, 5, 6}, {6}, {1}})
    ->Args({4, 8, 1})
    ->Args({4, 6, 8})
    ->Unit(benchmark::kMillisecond);

void BM_SparseGridMvmNaive(benchmark::State& state) {
  const int level = static_cast<int>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  const SparseGrid grid(level, dim);
  const NaiveKernelMatrix k(grid.coordinates(), ProductKernel::isotropic(dim, 0.5));
  const auto v = random_vector(grid.size(), 3);
  std::vector<double> out(v.size());
  for (auto _ : state) {
    k.apply(v, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["grid_size"] = static_cast<double>(grid.size());
}
BENCHMARK(BM_SparseGridMvmNaive)->ArgsProduct({{2, 3, 4}, {6}})->Unit(benchmark::kMillisecond);

void BM_ToeplitzMvm(benchmark::State& state) {
  const Index n = state.range(0);
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Index t = 0; t < n; ++t) col[t] = std::exp(-0.5 * std::pow(static_cast<double>(t) / n / 0.2, 2));
  const ToeplitzSpec spec(col);
  const auto v = random_vector(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(toeplitz_mvm(spec, v));
}
BENCHMARK(BM_ToeplitzMvm)->RangeMultiplier(4)->Range(15, 16383);

// Arguments: rule, level, dim.
void BM_AssembleWeights(benchmark::State& state) {
  const auto rule = static_cast<BaseRule>(state.range(0));
  const int level = static_cast<int>(state.range(1));
  const int dim = static_cast<int>(state.range(2));
  const auto interp = GridInterpolator::sparse(level, dim, rule);
  const RowMatrix x = random_points(1000, dim, 5);
  for (auto _ : state) {
    const WeightMatrix w = assemble_w(x, interp);
    benchmark::DoNotOptimize(w.nnz());
  }
  state.SetItemsProcessed(state.iterations() * x.rows());
}
BENCHMARK(BM_AssembleWeights)
    ->Args({static_cast<int>(BaseRule::kSimplicial), 4, 6})
    ->Args({static_cast<int>(BaseRule::kLinear), 4, 6})
    ->Args({static_cast<int>(BaseRule::kSimplicial), 4, 8})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
