#include "dlcz/analysis.hpp"
#include "dlcz/simulator.hpp"

#include <benchmark/benchmark.h>

#include <omp.h>

#include <vector>

using namespace dlcz;

namespace {

constexpr std::uint64_t kTrials = 1'000'000;

struct Fixture {
  OpticsConfig optics;
  std::vector<PortModel> ports;
  std::vector<std::uint64_t> starts;
  TrialPlan plan;

  Fixture() {
    optics.p_excitation = 0.05;
    optics.eta1 = 0.5;
    optics.eta2_base = 0.5;
    const auto state = ideal_state(effective_eta(cg_branching_weights()), 0.0, 0.5);
    const AnalyzerSettings a;
    for (auto [t1, t2] : {std::pair{a.theta1, a.theta2}, std::pair{a.theta1p, a.theta2},
                          std::pair{a.theta1, a.theta2p}, std::pair{a.theta1p, a.theta2p}}) {
      starts.push_back(ports.size() * kTrials / 4);
      ports.push_back(port_model(state, t1, t2));
    }
    plan = {ports, starts, kTrials, {0.9, 0.99}, 42};
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_SampleSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(sample_trials_serial(f.optics, f.plan));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kTrials));
}
BENCHMARK(BM_SampleSerial)->Unit(benchmark::kMillisecond);

void BM_SampleParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_trials_parallel(f.optics, f.plan, threads));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kTrials));
}
BENCHMARK(BM_SampleParallel)
    ->RangeMultiplier(2)
    ->Range(1, omp_get_max_threads() > 1 ? omp_get_max_threads() : 1)
    ->Unit(benchmark::kMillisecond);

void BM_SimulateRun(benchmark::State& state) {
  ExperimentConfig c;
  c.windows = 100;
  c.optics.p_excitation = 0.05;
  c.optics.eta1 = 0.5;
  c.optics.eta2_base = 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_run(c, 1));
  state.SetItemsProcessed(state.iterations() * 100 * c.timing.trials_per_window);
}
BENCHMARK(BM_SimulateRun)->Unit(benchmark::kMillisecond);

void BM_Summarize(benchmark::State& state) {
  ExperimentConfig c;
  c.windows = 100;
  c.optics.p_excitation = 0.05;
  c.optics.eta1 = 0.5;
  c.optics.eta2_base = 0.5;
  const EventLog log = simulate_run(c, 1);
  for (auto _ : state) benchmark::DoNotOptimize(summarize(log));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(log.events.size()));
}
BENCHMARK(BM_Summarize)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
