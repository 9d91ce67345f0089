#include <benchmark/benchmark.h>

#include "mirrorqed/experiments.hpp"
#include "mirrorqed/wigner.hpp"

using namespace mirrorqed;

namespace {

// Captured mode at the critical drive, Gaussian xi = 0.5, 10 Fock levels.
const CMatrix& captured_state() {
  static const CMatrix rho = [] {
    const SystemParams d = driven_params(parse_config("{}"));
    return simulate_capture(d, experiments::build_filter("gaussian", 0.5, d)).rho_mode;
  }();
  return rho;
}

void BM_WignerGridSerial(benchmark::State& state) {
  const CMatrix& rho = captured_state();
  const double step = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(wigner::wigner_grid_serial(rho, 5.0, step));
}

void BM_WignerGridOpenMP(benchmark::State& state) {
  const CMatrix& rho = captured_state();
  const double step = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(wigner::wigner_grid(rho, 5.0, step));
}

}  // namespace

BENCHMARK(BM_WignerGridSerial)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WignerGridOpenMP)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
