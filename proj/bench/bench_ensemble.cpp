// Serial reference vs OpenMP ensemble on the DC motor replay experiment.
#include <benchmark/benchmark.h>

#include "dyndet/config.hpp"
#include "dyndet/simulate.hpp"

namespace {

dyndet::ExperimentSpec motor_spec() {
  const auto cfg = dyndet::dc_motor_preset();
  dyndet::ExperimentSpec s;
  s.plant = cfg.discrete_plant();
  s.weights = cfg.cost();
  s.synthesis = dyndet::synthesize_lqg(s.plant, s.weights);
  s.mode = dyndet::reference_dc_motor_design();
  s.initial = cfg.initial();
  s.attack = cfg.attack();
  s.attack->tau = 300;
  s.attack->attack_start = 300;
  s.window = cfg.window;
  s.betas = {1, 10, 30};
  s.master_seed = 7;
  return s;
}

void run(benchmark::State& state, dyndet::Execution exec) {
  const auto spec = motor_spec();
  const auto runs = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto summary = dyndet::monte_carlo(spec, runs, exec);
    benchmark::DoNotOptimize(summary.alarm_rate);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EnsembleSerial(benchmark::State& state) { run(state, dyndet::Execution::serial); }
void BM_EnsembleParallel(benchmark::State& state) { run(state, dyndet::Execution::parallel); }

}  // namespace

BENCHMARK(BM_EnsembleSerial)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnsembleParallel)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
