#include <benchmark/benchmark.h>

#include <random>

#include "fdnet/harness.hpp"
#include "fdnet/model.hpp"

using namespace fdnet;

namespace {

Batch random_batch(std::size_t size, std::size_t points, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Batch b;
  b.size = size;
  b.points = points;
  b.inputs.resize(size * points);
  b.targets.resize(size * points);
  for (auto& x : b.inputs) x = u(rng);
  for (auto& x : b.targets) x = u(rng);
  return b;
}

NetConfig config(const benchmark::State& state) {
  return {static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)), false, 32, 10};
}

void BM_Forward(benchmark::State& state) {
  const auto params = init_params(config(state), 1);
  const auto batch = random_batch(1, 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(net_forward(batch.inputs, params));
}

void BM_LossAndGrad(benchmark::State& state) {
  const auto params = init_params(config(state), 1);
  const auto batch = random_batch(64, 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(params, batch));
}

void BM_Hvp(benchmark::State& state) {
  const auto params = init_params(config(state), 1);
  const auto batch = random_batch(64, 32, 2);
  const std::vector<double> v(params.size(), 1e-2);
  for (auto _ : state) benchmark::DoNotOptimize(hvp(params, v, batch));
}

void BM_Rollout(benchmark::State& state) {
  const CompiledNet net(init_params(config(state), 1));
  const auto batch = random_batch(1, 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(predict_rollout(net, batch.inputs, 1000));
}

void sizes(benchmark::internal::Benchmark* b) {
  for (const int f : {4, 16, 64}) {
    for (const int k : {1, 4, 10}) b->Args({f, k});
  }
}

}  // namespace

BENCHMARK(BM_Forward)->Apply(sizes);
BENCHMARK(BM_LossAndGrad)->Apply(sizes);
BENCHMARK(BM_Hvp)->Apply(sizes);
BENCHMARK(BM_Rollout)->Apply(sizes);
BENCHMARK_MAIN();
