// Serial against OpenMP timings of the hot kernels. Each benchmark takes the
// execution mode as its argument: 0 serial, 1 parallel.

#include <benchmark/benchmark.h>

#include "nanonmr/correlation.hpp"
#include "nanonmr/md.hpp"
#include "nanonmr/propagator.hpp"

using namespace nanonmr;

namespace {

Exec mode(const benchmark::State& s) { return s.range(0) ? Exec::parallel : Exec::serial; }

void BM_ModeSum(benchmark::State& s) {
  const auto ov = cached_overlaps(Geometry::cylinder(200, 200, 1), 0.5, 0, Truncation{60, 60, 0});
  const auto t = log_grid(1e-3, 1e6, 400);
  for (auto _ : s) benchmark::DoNotOptimize(mode_sum(*ov, t, mode(s)));
}

void BM_Overlaps(benchmark::State& s) {
  const auto g = Geometry::sphere(30, 1);
  for (auto _ : s) benchmark::DoNotOptimize(overlap_integrals(g, 0.5, 0, Truncation{30, 30, 0}, 1e-5, mode(s)));
}

void BM_RandomWalk(benchmark::State& s) {
  const auto g = Geometry::cylinder(2, 2, 1);
  WalkConfig cfg;
  cfg.walkers = 20000;
  cfg.step_dt = 1e-3;
  cfg.times = {1.0};
  for (auto _ : s) benchmark::DoNotOptimize(random_walk_oracle(g, 0.5, {0.3, 0.2, 1.0}, cfg, Binning{}, mode(s)));
}

void BM_MdForces(benchmark::State& s) {
  md::MdConfig cfg;
  cfg.N = 1271;
  cfg.container = Geometry::cylinder(8, 8, 1);
  const auto state = md::initialize(cfg);
  md::ForceField ff(cfg);
  std::vector<Vec3> f(state.x.size());
  ff.compute(state.x, f, mode(s));
  for (auto _ : s) {
    ff.compute(state.x, f, mode(s));
    benchmark::DoNotOptimize(f.data());
  }
}

}  // namespace

BENCHMARK(BM_ModeSum)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Overlaps)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RandomWalk)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MdForces)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
