#include <benchmark/benchmark.h>

#include "floydwalk/floyd_function.hpp"
#include "floydwalk/floyd_metric.hpp"
#include "floydwalk/graph.hpp"
#include "floydwalk/green.hpp"
#include "floydwalk/kernel.hpp"
#include "floydwalk/spectral.hpp"

using namespace floydwalk;

static void BM_BallBuildTree(benchmark::State& state) {
  auto g = GraphOracle::regular_tree(2);
  int radius = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto ball = build_ball(g, g.base(), radius);
    benchmark::DoNotOptimize(ball.size());
  }
  state.SetItemsProcessed(state.iterations() * build_ball(g, g.base(), radius).size());
}
BENCHMARK(BM_BallBuildTree)->Arg(10)->Arg(13)->Arg(16);

static void BM_BallBuildLattice(benchmark::State& state) {
  auto g = GraphOracle::lattice(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto ball = build_ball(g, g.base(), 20);
    benchmark::DoNotOptimize(ball.size());
  }
}
BENCHMARK(BM_BallBuildLattice)->Arg(2)->Arg(3);

// Dijkstra with level-rescaled edges; trees bypass this with the exact formula,
// so the lattice is the family that actually pays for it
static void BM_FloydDistanceDijkstra(benchmark::State& state) {
  auto g = GraphOracle::lattice(2);
  auto f = FloydFunction::polynomial(3.0);
  FloydMetricEngine eng(g, f);
  auto ball = build_ball(g, g.base(), 10);
  VertexId v = ball.vertices[ball.size() / 3];
  VertexId w = ball.vertices[(2 * ball.size()) / 3];
  int radius = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto d = eng.distance(v, w, radius);
    benchmark::DoNotOptimize(d.value);
  }
}
BENCHMARK(BM_FloydDistanceDijkstra)->Arg(14)->Arg(20)->Arg(26);

static void BM_FloydDistanceTreeExact(benchmark::State& state) {
  auto g = GraphOracle::regular_tree(2);
  auto f = FloydFunction::geometric(0.5);
  FloydMetricEngine eng(g, f);
  std::vector<std::uint8_t> wa(40, 0), wb(40, 1);
  VertexId v = g.encode_word(wa), w = g.encode_word(wb);
  for (auto _ : state) {
    auto d = eng.distance(v, w, 60);
    benchmark::DoNotOptimize(d.value);
  }
}
BENCHMARK(BM_FloydDistanceTreeExact);

// radial level-chain solve vs materialized ball solve for the same quantity
static void BM_GreenLevelChain(benchmark::State& state) {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::simple_rw();
  VertexId v = g.encode_word({0, 0, 0, 0, 0});
  int radius = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto est = green_exact_truncated(k, g, radius, g.base(), v);
    benchmark::DoNotOptimize(est.value);
  }
}
BENCHMARK(BM_GreenLevelChain)->Arg(30)->Arg(100)->Arg(300);

static void BM_GreenBallSolve(benchmark::State& state) {
  auto g = GraphOracle::lattice(2);
  auto k = Kernel::simple_rw();
  VertexId v = g.neighbors(g.base())[0];
  int radius = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto est = green_exact_truncated(k, g, radius, g.base(), v);
    benchmark::DoNotOptimize(est.value);
  }
}
BENCHMARK(BM_GreenBallSolve)->Arg(8)->Arg(12)->Arg(16);

static void BM_TrajectorySampling(benchmark::State& state) {
  auto g = GraphOracle::regular_tree(2);
  auto k = Kernel::bounded_range_mixture({0.5, 0.3, 0.2});
  std::uint32_t steps = static_cast<std::uint32_t>(state.range(0));
  std::uint64_t stream = 0;
  for (auto _ : state) {
    auto t = sample_trajectory(k, g, g.base(), steps, 1, stream++);
    benchmark::DoNotOptimize(t.levels.back());
  }
  state.SetItemsProcessed(state.iterations() * steps);
}
BENCHMARK(BM_TrajectorySampling)->Arg(1000)->Arg(4000);

static void BM_SpectralPowerIteration(benchmark::State& state) {
  auto g = GraphOracle::lattice(2);
  auto k = Kernel::simple_rw();
  int radius = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto est = spectral_radius_estimate(k, g, {radius});
    benchmark::DoNotOptimize(est.rho_hat);
  }
}
BENCHMARK(BM_SpectralPowerIteration)->Arg(10)->Arg(20);

BENCHMARK_MAIN();
