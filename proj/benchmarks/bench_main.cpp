#include <benchmark/benchmark.h>

#include <cmath>

#include "rflab/diagnostics.hpp"
#include "rflab/entropy.hpp"
#include "rflab/flow.hpp"

using namespace rflab;

namespace {

constexpr double kPi = 3.14159265358979323846;

MetricState make_torus(int N, int order) {
  return MetricState(conformal_mode_torus(N, 2 * kPi, order, 0.05, 1, 0));
}

void BM_torus_geometry(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const int order = static_cast<int>(state.range(1));
  TorusGridState base = conformal_mode_torus(N, 2 * kPi, order, 0.05, 1, 0);
  for (auto _ : state) {
    TorusGridState rebuilt(N, 2 * kPi, base.g11, base.g12, base.g22, order);
    benchmark::DoNotOptimize(rebuilt.geom.gauss.data());
  }
  state.SetItemsProcessed(state.iterations() * N * N);
}
BENCHMARK(BM_torus_geometry)->Args({32, 2})->Args({64, 2})->Args({64, 4})->Args({128, 4});

void BM_tensor_laplacian(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  MetricState s = make_torus(N, 2);
  ScalarField f(field_shape(s));
  SymTensorField W = metric_tensor(s);
  for (auto _ : state) {
    SymTensorField lw = laplacian_f(s, W, f);
    benchmark::DoNotOptimize(lw.data.data());
  }
  state.SetItemsProcessed(state.iterations() * N * N);
}
BENCHMARK(BM_tensor_laplacian)->Arg(32)->Arg(64)->Arg(128);

void BM_entropy_cold(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  MetricState s = make_torus(N, 2);
  SolverConfig cfg = default_solver_config(s);
  for (auto _ : state) {
    EntropySolution es = minimize_entropy(s, cfg);
    benchmark::DoNotOptimize(es.mu);
  }
}
BENCHMARK(BM_entropy_cold)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_entropy_warm(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  MetricState s = make_torus(N, 2);
  SolverConfig cfg = default_solver_config(s);
  EntropySolution es0 = minimize_entropy(s, cfg);
  for (auto _ : state) {
    EntropySolution es = minimize_entropy(s, cfg, &es0.f);
    benchmark::DoNotOptimize(es.mu);
  }
}
BENCHMARK(BM_entropy_warm)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_mrf_step(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  MetricState s = make_torus(N, 2);
  FlowConfig cfg;
  cfg.kind = FlowConfig::Kind::mrf;
  cfg.dt_init = 1.0;
  cfg.t_end = 1.0;
  EntropySolution es = minimize_entropy(s, cfg.entropy_cfg);
  for (auto _ : state) {
    StepResult sr = step(s, cfg, &es.f);
    benchmark::DoNotOptimize(sr.dt_used);
  }
  state.SetLabel("one RK4 step incl. substage entropy solves");
}
BENCHMARK(BM_mrf_step)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_h_field(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  MetricState s = make_torus(N, 2);
  SolverConfig cfg = default_solver_config(s);
  EntropySolution es = minimize_entropy(s, cfg);
  SpectralGapReport gap = spectral_gap(s, es.f, 1e-8);
  for (auto _ : state) {
    ScalarField H = h_field(s, es, 1e-10, &gap);
    benchmark::DoNotOptimize(H.data.data());
  }
}
BENCHMARK(BM_h_field)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
