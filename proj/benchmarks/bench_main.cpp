#include <benchmark/benchmark.h>

#include <random>

#include "metaspectra/metrics.hpp"
#include "metaspectra/propagation.hpp"
#include "metaspectra/reconstruction.hpp"
#include "metaspectra/renderer.hpp"

using namespace msp;

namespace {

HyperspectralCube noise_cube(int n, const SpectralGrid& g) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  HyperspectralCube c(n, n, g);
  for (auto& v : c.data) v = u(rng);
  return c;
}

const ToySystem& toy() {
  static ToySystem t = toy_system();
  return t;
}

const PSFStack& toy_psfs() {
  static PSFStack p = psf_stack(toy().system, toy().psf);
  return p;
}

}  // namespace

static void BM_AngularSpectrum(benchmark::State& st) {
  const int n = int(st.range(0));
  ComplexField f(n, n, 0.25, 550.0);
  for (int r = n / 4; r < 3 * n / 4; ++r)
    for (int c = n / 4; c < 3 * n / 4; ++c) f(r, c) = 1.0;
  for (auto _ : st) benchmark::DoNotOptimize(angular_spectrum_propagate(f, 0.05, 550.0, false));
}
BENCHMARK(BM_AngularSpectrum)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_PsfStackToy(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(psf_stack(toy().system, toy().psf));
}
BENCHMARK(BM_PsfStackToy)->Unit(benchmark::kMillisecond);

static void BM_SynthesizePsfDefault(benchmark::State& st) {
  auto sys = default_system();
  for (auto _ : st) benchmark::DoNotOptimize(synthesize_psf(sys, 1, 550.0));
}
BENCHMARK(BM_SynthesizePsfDefault)->Unit(benchmark::kMillisecond);

static void BM_RenderForward(benchmark::State& st) {
  const int n = int(st.range(0));
  RenderOperator op(toy().system, toy_psfs(), n, n);
  auto cube = noise_cube(n, toy().system.grid);
  for (auto _ : st) benchmark::DoNotOptimize(op.forward(cube));
}
BENCHMARK(BM_RenderForward)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_RenderAdjoint(benchmark::State& st) {
  const int n = int(st.range(0));
  RenderOperator op(toy().system, toy_psfs(), n, n);
  auto planes = op.forward(noise_cube(n, toy().system.grid));
  for (auto _ : st) benchmark::DoNotOptimize(op.adjoint(planes));
}
BENCHMARK(BM_RenderAdjoint)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_GuidanceStep(benchmark::State& st) {
  const int n = 32;
  RenderOperator op(toy().system, toy_psfs(), n, n);
  auto truth = noise_cube(n, toy().system.grid);
  PatchContext ctx{{0, 0, n, n}, &op, op.forward(truth), op.forward(HyperspectralCube(n, n, toy().system.grid, 2.0, 1.0))};
  auto sch = DiffusionSchedule::linear();
  SmootherDenoiser den;
  auto s = noise_cube(n, toy().system.grid);
  for (auto _ : st) benchmark::DoNotOptimize(guidance_step(s, den, ctx, sch, 500, 0.5));
}
BENCHMARK(BM_GuidanceStep)->Unit(benchmark::kMillisecond);

static void BM_Metrics(benchmark::State& st) {
  auto a = noise_cube(64, default_grid()), b = noise_cube(64, default_grid());
  for (auto& v : b.data) v *= 0.9;
  for (auto _ : st) {
    benchmark::DoNotOptimize(psnr(a, b));
    benchmark::DoNotOptimize(ssim(a, b));
    benchmark::DoNotOptimize(sam(a, b));
  }
}
BENCHMARK(BM_Metrics)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
