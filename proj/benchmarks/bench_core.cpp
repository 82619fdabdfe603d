#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>

#include "spdelab/averaging_engine.hpp"
#include "spdelab/drift.hpp"
#include "spdelab/frozen_dynamics.hpp"
#include "spdelab/mild_integrator.hpp"
#include "spdelab/spectral_space.hpp"
#include "spdelab/stable_noise.hpp"

using namespace spdelab;

namespace {

ModeSpectrum heat(int n = 8) { return ModeSpectrum::power_law(n, 2.0, 0.35, 1.0); }

void BM_SampleSas(benchmark::State& state) {
  const double alpha = state.range(0) / 100.0;
  RngStream rng(1);
  const StableParams params{alpha, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(sample_sas(params, rng));
}
BENCHMARK(BM_SampleSas)->Arg(150)->Arg(175)->Arg(195);

void BM_NoisePath(benchmark::State& state) {
  const auto spec = heat(static_cast<int>(state.range(0)));
  NoisePath path;
  const SeedLineage lineage{7, 0, StreamDomain::kSlowNoise, 0};
  for (auto _ : state) {
    regenerate_noise_path(path, spec, 1.75, NoiseBand::kSlow, 1e-3, 1000, 1.0, lineage);
    benchmark::DoNotOptimize(path.increments.data());
  }
  state.SetItemsProcessed(state.iterations() * 1000 * spec.n_modes());
}
BENCHMARK(BM_NoisePath)->Arg(8)->Arg(16);

void BM_MildStep(benchmark::State& state) {
  const auto spec = heat(static_cast<int>(state.range(0)));
  const StepKernel kernel(spec, 1e-3, 1.0);
  SpectralVec v(static_cast<std::size_t>(spec.n_modes()));
  std::vector<double> g(static_cast<std::size_t>(spec.n_modes()), 0.3);
  std::vector<double> w(static_cast<std::size_t>(spec.n_modes()), 0.01);
  for (auto _ : state) {
    kernel.advance(v.c, g, w);
    benchmark::DoNotOptimize(v.data());
  }
}
BENCHMARK(BM_MildStep)->Arg(8)->Arg(16);

void BM_DriftEval(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  auto tr = std::make_shared<SineTransform>(m, 2 * m);
  DriftSpec spec;
  spec.kind = "sincos";
  spec.ax = 1.0;
  spec.ay = 1.0;
  const Drift b = make_drift(spec, tr);
  SpectralVec x(static_cast<std::size_t>(m)), y(static_cast<std::size_t>(m)), out;
  x[0] = 0.5;
  y[0] = -0.25;
  Drift::Scratch scratch;
  for (auto _ : state) {
    b.eval(x, y, out, scratch);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_DriftEval)->Arg(8)->Arg(16);

void BM_AveragedDriftCall(benchmark::State& state) {
  const auto spec = heat();
  auto tr = std::make_shared<SineTransform>(8, 16);
  DriftSpec bs;
  bs.kind = "sincos";
  bs.ax = bs.ay = 1.0;
  DriftSpec fs_;
  fs_.kind = "sinsin";
  fs_.ax = 1.0;
  fs_.ay = 0.5;
  const Drift b = make_drift(bs, tr);
  const Drift f = make_drift(fs_, tr);
  EstimatorConfig cfg;
  cfg.t_burn = 15.0;
  cfg.t_avg = 25.0;
  cfg.dt = 0.02;
  cfg.n_replicas = 2;
  const SpectralVec x = 0.3 * SpectralVec::unit(8, 0);
  const SpectralVec y0 = SpectralVec::zero(8);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        estimate_averaged_drift(spec, 1.75, x, b, f, y0, cfg, seed++).value.data());
  }
}
BENCHMARK(BM_AveragedDriftCall)->Unit(benchmark::kMillisecond);

void BM_SlowFastReplica(benchmark::State& state) {
  SlowFastConfig cfg;
  cfg.spectrum = heat();
  cfg.alpha = 1.75;
  cfg.x0 = SpectralVec::unit(8, 0);
  cfg.y0 = SpectralVec::zero(8);
  cfg.epsilon = 0.02;
  cfg.T = 1.0;
  cfg.dt_macro = 1e-3;
  auto tr = std::make_shared<SineTransform>(8, 16);
  DriftSpec bs;
  bs.kind = "sincos";
  bs.ax = bs.ay = 1.0;
  DriftSpec fs_;
  fs_.kind = "sinsin";
  fs_.ax = 1.0;
  fs_.ay = 0.5;
  const Drift b = make_drift(bs, tr);
  const Drift f = make_drift(fs_, tr);
  for (auto _ : state) {
    cfg.replica++;
    benchmark::DoNotOptimize(run_slow_fast(cfg, b, f).x.back().data());
  }
}
BENCHMARK(BM_SlowFastReplica)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
