#include <benchmark/benchmark.h>

#include <random>

#include "s2h/model.hpp"
#include "s2h/prox.hpp"
#include "s2h/simulate.hpp"
#include "s2h/unfold.hpp"

using namespace s2h;

namespace {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

void BM_YStepWoodbury(benchmark::State& state) {
  const Eigen::Index l = state.range(0);
  const Matrix d = uniform(6, 32, 1);
  const Matrix y_s = uniform(6, l, 2);
  const Matrix vu = uniform(32, l, 3);
  for (auto _ : state) benchmark::DoNotOptimize(y_step_closed_form(d, 0.1, y_s, vu));
  state.SetComplexityN(l);
}
BENCHMARK(BM_YStepWoodbury)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity(benchmark::oN);

// Factorises the full M x M system every call, for comparison.
void BM_YStepDense(benchmark::State& state) {
  const Eigen::Index l = state.range(0);
  const Matrix d = uniform(6, 32, 1);
  const Matrix y_s = uniform(6, l, 2);
  const Matrix vu = uniform(32, l, 3);
  for (auto _ : state) {
    const Matrix a = 2.0 * d.transpose() * d + 0.1 * Matrix::Identity(32, 32);
    const Matrix x = 2.0 * d.transpose() * y_s + 0.1 * vu;
    benchmark::DoNotOptimize(a.llt().solve(x).eval());
  }
  state.SetComplexityN(l);
}
BENCHMARK(BM_YStepDense)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity(benchmark::oN);

void BM_TvTautString(benchmark::State& state) {
  const Vector z = uniform(state.range(0), 1, 4);
  for (auto _ : state) benchmark::DoNotOptimize(prox_tv1d_taut_string(z, TvWeight(0.3)));
}
BENCHMARK(BM_TvTautString)->Arg(32)->Arg(64)->Arg(172);

void BM_TvSplitBregman(benchmark::State& state) {
  const Vector z = uniform(state.range(0), 1, 4);
  for (auto _ : state) benchmark::DoNotOptimize(prox_tv1d_split_bregman(z, TvWeight(0.3)));
}
BENCHMARK(BM_TvSplitBregman)->Arg(32)->Arg(64)->Arg(172);

void BM_SpectralTvCube(benchmark::State& state) {
  const Matrix z = uniform(32, state.range(0), 5);
  for (auto _ : state) benchmark::DoNotOptimize(prox_spectral_tv(z, 0.05));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SpectralTvCube)->RangeMultiplier(4)->Range(1 << 10, 1 << 14)->Complexity(benchmark::oN);

void BM_PipelineForward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto sensor = sensor_for(6);
  const auto wl = hyperspectral_wavelengths(32);
  const SrtMatrix srt = make_srt(sensor, wl);
  PipelineConfig cfg;
  cfg.unfold = UnfoldConfig::for_strategy(Strategy::Learnable);
  const PipelineParams params = init_pipeline(cfg, &srt, 1);
  SceneSpec spec;
  spec.width = spec.height = side;
  const AcquisitionPair pair = simulate_pair(spec, srt, sensor, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(pipeline_forward(cfg, params, pair.y_s));
  state.SetComplexityN(static_cast<std::int64_t>(side) * side);
}
BENCHMARK(BM_PipelineForward)->Arg(24)->Arg(48)->Arg(96)->Unit(benchmark::kMillisecond)->Complexity(benchmark::oN);

}  // namespace

BENCHMARK_MAIN();
