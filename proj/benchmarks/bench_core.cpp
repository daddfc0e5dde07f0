#include <benchmark/benchmark.h>

#include "hfspec/model_io.hpp"
#include "hfspec/pump_sim.hpp"
#include "hfspec/scheme.hpp"
#include "hfspec/spectrum.hpp"

namespace {

using namespace hfspec;

const SpinModel& model() {
  static const SpinModel m = load_spin_model(std::string(HFSPEC_DATA_DIR) + "/eu151_yso_site1_surrogate.json");
  return m;
}

void BM_Diagonalize(benchmark::State& state) {
  const Matrix6c h = build_hamiltonian(model().ground.Q, model().ground.M, FieldVector(-22.7, 249.2, 0.0));
  for (auto _ : state) benchmark::DoNotOptimize(diagonalize(h));
}
BENCHMARK(BM_Diagonalize);

void BM_SolveAndBranching(benchmark::State& state) {
  const FieldVector b(-30.8, 227.0, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(branching_matrix(solve(model(), b)));
}
BENCHMARK(BM_SolveAndBranching);

// Probe window of +-range MHz at 10 kHz, thermal populations.
struct SpectrumSetup {
  Manifolds levels;
  DetuningGrid grid;
  FrequencyAxis probe;
  PopulationGrid pop;

  explicit SpectrumSetup(double range)
      : levels(solve(model(), FieldVector(0.0, 230.0, 0.0))),
        grid(DetuningGrid::covering(levels, -range, range, 0.01)),
        probe(FrequencyAxis::span(-range, range, 0.01)),
        pop(init_thermal(grid)) {}
};

void BM_SynthesizeFft(benchmark::State& state) {
  const SpectrumSetup s(static_cast<double>(state.range(0)));
  SynthesisOptions opt;
  opt.threads = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(synthesize_spectrum(s.pop, s.grid, BranchingMatrix::uniform(), s.levels, s.probe, opt));
  }
  state.counters["probe_points"] = s.probe.size;
}
BENCHMARK(BM_SynthesizeFft)->Arg(5)->Arg(50)->Arg(150)->Unit(benchmark::kMillisecond);

void BM_SynthesizeDirect(benchmark::State& state) {
  const SpectrumSetup s(static_cast<double>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        synthesize_spectrum_direct(s.pop, s.grid, BranchingMatrix::uniform(), s.levels, s.probe));
  }
  state.counters["probe_points"] = s.probe.size;
}
BENCHMARK(BM_SynthesizeDirect)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_CleanAndPolarize(benchmark::State& state) {
  const Manifolds lv = solve(model(), FieldVector(0.0, 230.0, 0.0));
  const std::vector<Transition> cc{{4, 5}, {2, 5}, {5, 4}, {0, 4}, {1, 5}, {3, 2}};
  SimulationConfig cfg;
  cfg.probe_min = -3.0;
  cfg.probe_max = 3.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_scheme(cc_sp_scheme(cc, {4, 5}, 2.2), lv, BranchingMatrix::uniform(), cfg));
  }
}
BENCHMARK(BM_CleanAndPolarize)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
