#include <benchmark/benchmark.h>
#include <omp.h>

#include "qreadout/analysis.h"
#include "qreadout/optimize.h"
#include "qreadout/shots.h"

using namespace qreadout;

namespace {

ShotSimulator make_simulator(std::size_t n_shots) {
  ShotConfig c;
  c.n_shots = n_shots;
  c.preselect = true;
  return ShotSimulator(DeviceParams{}, PulseEnvelope::gated(500e-9), c);
}

void BM_SimulateBatch(benchmark::State& state) {
  const ShotSimulator sim = make_simulator(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sim.simulate_batch());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SimulateBatchSerial(benchmark::State& state) {
  const ShotSimulator sim = make_simulator(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sim.simulate_batch_serial());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct IntegrateFixture {
  std::vector<ShotRecord> batch;
  WeightFunction w;
  double kappa_p = 0.0;

  explicit IntegrateFixture(std::size_t n) {
    const ShotSimulator sim = make_simulator(n);
    batch = sim.simulate_batch();
    w = build_weights(sim.binned_mean(Qubit::ground), sim.binned_mean(Qubit::excited), 8e-9, 56e-9);
    kappa_p = DeviceParams{}.kappa_p();
  }
};

void BM_IntegrateBatch(benchmark::State& state) {
  const IntegrateFixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(integrate_batch(f.batch, f.w, f.kappa_p, 8e-9));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_IntegrateBatchSerial(benchmark::State& state) {
  const IntegrateFixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate_batch_serial(f.batch, f.w, f.kappa_p, 8e-9));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

// The ratio search has no separate serial path; compare one thread to all.
void BM_OptimalRatioFull(benchmark::State& state) {
  const int threads = static_cast<int>(state.range(0));
  const int previous = omp_get_max_threads();
  omp_set_num_threads(threads > 0 ? threads : previous);
  const std::vector<double> taus{24e-9, 40e-9, 56e-9, 100e-9, 200e-9};
  for (auto _ : state) {
    benchmark::DoNotOptimize(optimal_ratio_vs_tau(DeviceParams{}, taus, SignalModel::full));
  }
  omp_set_num_threads(previous);
}

}  // namespace

BENCHMARK(BM_SimulateBatch)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateBatchSerial)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IntegrateBatch)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IntegrateBatchSerial)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OptimalRatioFull)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
