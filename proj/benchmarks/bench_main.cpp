#include <benchmark/benchmark.h>
#include <bmwf/costs.hpp>
#include <bmwf/pipeline.hpp>
#include <bmwf/scene.hpp>
#include <bmwf/solver.hpp>
#include <bmwf/stft.hpp>

#include <random>

namespace {

using namespace bmwf;

MultiSignal noise_signal(int channels, std::size_t length) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  MultiSignal s = MultiSignal::zeros(channels, length, 16000.0);
  for (auto& ch : s.channels)
    for (double& v : ch) v = g(rng);
  return s;
}

const SceneAnalysis& scene() {
  static const SceneAnalysis a = [] {
    SceneConfig cfg;
    return analyze_scene(render_scene(cfg, 1), -5.0, 0.0, StftConfig{}, cfg.ref_mic_left, cfg.resolved_ref_right());
  }();
  return a;
}

void BM_StftAnalyze(benchmark::State& state) {
  const auto s = noise_signal(6, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(stft_analyze(s, StftConfig{}));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 6);
}
BENCHMARK(BM_StftAnalyze)->Arg(16000)->Arg(48000);

void BM_StftRoundTrip(benchmark::State& state) {
  const auto s = noise_signal(1, 16000);
  for (auto _ : state) benchmark::DoNotOptimize(stft_synthesize(stft_analyze(s, StftConfig{})));
}
BENCHMARK(BM_StftRoundTrip);

void BM_SolveAugmentedBin(benchmark::State& state) {
  const BinProblem p = scene().stats.problem(static_cast<int>(state.range(0)));
  const std::vector<PenaltyTerm> terms{{PenaltyKind::kITF, 4e-4 * scene().stats.noise_power[state.range(0)]}};
  SolverOptions o;
  o.init = InitStrategy::kSelection;
  for (auto _ : state) benchmark::DoNotOptimize(solve_augmented(p, terms, o));
}
BENCHMARK(BM_SolveAugmentedBin)->Arg(10)->Arg(64)->Arg(120);

void BM_SolveSceneRobust(benchmark::State& state) {
  const auto& a = scene();
  const MethodSpec m = MethodSpec::robust(std::vector<double>(a.stats.num_bins(), 4e-4));
  for (auto _ : state) benchmark::DoNotOptimize(solve_scene(a.stats, m, SolverOptions{}, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_SolveSceneRobust)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_SolveSceneMwf(benchmark::State& state) {
  const auto& a = scene();
  for (auto _ : state) benchmark::DoNotOptimize(solve_scene(a.stats, MethodSpec::mwf(), SolverOptions{}));
}
BENCHMARK(BM_SolveSceneMwf)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
