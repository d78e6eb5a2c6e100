// End-to-end benchmarks: simulate a month of consensuses and run detection.

#include <benchmark/benchmark.h>

#include "hsdir/detector.hpp"
#include "hsdir/simulator.hpp"
#include "hsdir/timeutil.hpp"

using namespace hsdir;

namespace {

const OnionAddress kTarget = OnionAddress::parse("54y4xsyebx4zmvyj");

SimConfig month_config(std::size_t honest) {
  SimConfig c;
  c.seed = 11;
  c.start_time = parse_date("2013-01-01");
  c.duration_hours = 28 * 24;
  c.honest_relays = honest;
  c.hidden_services = {{kTarget, 0}};
  AttackerSpec a;
  a.strategy = AttackStrategy::Grind;
  a.target = kTarget;
  c.attacker = a;
  return c;
}

void BM_SimulateMonth(benchmark::State& state) {
  const SimConfig c = month_config(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_simulation(c));
  }
}
BENCHMARK(BM_SimulateMonth)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_DetectMonth(benchmark::State& state) {
  const SimOutput out = run_simulation(month_config(static_cast<std::size_t>(state.range(0))));
  const TimeRange window{parse_date("2013-01-03"), parse_date("2013-01-28")};
  for (auto _ : state) {
    benchmark::DoNotOptimize(detect(out.archive, kTarget, window, DetectorConfig{}));
  }
}
BENCHMARK(BM_DetectMonth)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
