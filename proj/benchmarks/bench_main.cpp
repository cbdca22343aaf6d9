#include <benchmark/benchmark.h>

#include "prdiv/exact.hpp"

using namespace prdiv;

namespace {

Density ring8(double radius = 2.0, double sigma = 0.2) {
  std::vector<Density::Component> comps;
  for (int i = 0; i < 8; ++i) {
    const double ang = 2.0 * M_PI * i / 8.0;
    comps.push_back({0.125,
                     {radius * std::cos(ang), radius * std::sin(ang)},
                     {sigma * sigma, 0.0, 0.0, sigma * sigma}});
  }
  return Density::mixture2d(comps);
}

void BM_Tabulate2D(benchmark::State& state) {
  const Density p = ring8();
  const Density q = ring8(1.6, 0.3);
  const QuadratureGrid grid = QuadratureGrid::for_pair(p, q, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto tab = Tabulation::make(p, q, grid);
    benchmark::DoNotOptimize(tab.q.data());
  }
}
BENCHMARK(BM_Tabulate2D)->Arg(128)->Arg(256)->Arg(512);

void BM_FdivOnTab(benchmark::State& state) {
  const Density p = ring8();
  const Density q = ring8(1.6, 0.3);
  const QuadratureGrid grid = QuadratureGrid::for_pair(p, q, 512);
  const Tabulation tab = Tabulation::make(p, q, grid);
  const GeneratorSpec kl = make_builtin("kl");
  for (auto _ : state) benchmark::DoNotOptimize(fdiv_exact(kl, tab));
}
BENCHMARK(BM_FdivOnTab);

void BM_PrCurve(benchmark::State& state) {
  const Density p = ring8();
  const Density q = ring8(1.6, 0.3);
  const QuadratureGrid grid = QuadratureGrid::for_pair(p, q, 256);
  const Tabulation tab = Tabulation::make(p, q, grid);
  for (auto _ : state) benchmark::DoNotOptimize(pr_curve(tab, 32).points.size());
}
BENCHMARK(BM_PrCurve);

}  // namespace

BENCHMARK_MAIN();
