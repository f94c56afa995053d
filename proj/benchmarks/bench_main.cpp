#include <benchmark/benchmark.h>

#include "cotdre/exact_transport.hpp"
#include "cotdre/quantize.hpp"
#include "cotdre/sinkhorn.hpp"
#include "cotdre/solvers.hpp"
#include "cotdre/synthetic.hpp"

using namespace cotdre;

namespace {

DiscreteMeasure bench_measure(int n, int T, std::uint64_t seed) {
  CounterRng rng(seed);
  return DiscreteMeasure::uniform(
      synthetic::random_paths(n, T, 1, Bounds{0, 1}, rng));
}

void BM_SinkhornPlan(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto mu = bench_measure(n, 4, 1);
  const auto nu = bench_measure(n, 4, 2);
  const auto costs =
      cost_matrix(CostSpec::scaled_quadratic(1.0), mu.support(), nu.support());
  SinkhornConfig cfg;
  cfg.tol = 1e-8;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sinkhorn_plan(mu, nu, costs, 0.05, cfg));
  }
}
BENCHMARK(BM_SinkhornPlan)->Arg(16)->Arg(64);

void BM_OtDistanceLp(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto mu = bench_measure(n, 3, 3);
  const auto nu = bench_measure(n, 3, 4);
  const auto cost = CostSpec::l1();
  for (auto _ : state) {
    benchmark::DoNotOptimize(ot_distance_lp(mu, nu, cost));
  }
}
BENCHMARK(BM_OtDistanceLp)->Arg(5)->Arg(10);

void BM_PrimalCotLp(benchmark::State& state) {
  CounterRng rng(7);
  const auto mu = bench_measure(4, 3, 5);
  std::vector<double> gdata(mu.support().data());
  const auto extra = synthetic::random_paths(4, 3, 1, Bounds{0, 1}, rng);
  gdata.insert(gdata.end(), extra.data().begin(), extra.data().end());
  const PathBatch grid(gdata, 8, 3, 1, Bounds{0, 1});
  const auto f = ObjectiveSpec::linear_relu({0.4, 0.3, 0.3}, 0.1);
  const auto cost = CostSpec::l1();
  for (auto _ : state) {
    benchmark::DoNotOptimize(primal_cot_lp(mu, grid, f, cost, 0.2));
  }
}
BENCHMARK(BM_PrimalCotLp);

void BM_AdaptedEmpirical(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  CounterRng rng(11);
  const auto paths = synthetic::random_paths(n, 12, 1, Bounds{0, 1}, rng);
  const auto cfg = QuantizerConfig::make(Bounds{0, 1}, 1, 12, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(adapted_empirical(cfg, paths));
  }
}
BENCHMARK(BM_AdaptedEmpirical)->Arg(100)->Arg(1000);

void BM_ForwardBackward(benchmark::State& state) {
  CounterRng rng(13);
  const DenseNet net = DenseNet::random(
      {12, 8, 8, 1},
      {Activation::Tanh, Activation::LeakyRelu, Activation::Identity}, rng);
  std::vector<double> x(12);
  for (auto& v : x) v = rng.uniform(-1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_backward(net, x));
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_GammaPrime(benchmark::State& state) {
  CounterRng rng(17);
  const int T = 12;
  const auto fam = TestFunctionFamily::make(2, T, 1, 4, {-50, 50}, rng);
  std::vector<double> x(T), y(T);
  for (auto& v : x) v = rng.uniform01();
  for (auto& v : y) v = rng.uniform01();
  for (auto _ : state) {
    benchmark::DoNotOptimize(gamma_prime(fam, x, y));
  }
}
BENCHMARK(BM_GammaPrime);

void BM_GdaOuterStep(benchmark::State& state) {
  const auto ex = synthetic::example1();
  GdaConfig cfg;
  cfg.L = 2;
  cfg.inner_mode = GdaConfig::InnerMode::Grid;
  cfg.seed = 1;
  cfg.outer_steps = static_cast<long>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        solve_dual_cot_gda(ex.mu, ex.f, ex.cost, ex.eps, cfg, &ex.grid));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GdaOuterStep)->Arg(50);

}  // namespace

BENCHMARK_MAIN();
