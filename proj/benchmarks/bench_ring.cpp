// Microbenchmarks for the descriptor-id and ring primitives.

#include <benchmark/benchmark.h>

#include <set>
#include <vector>

#include "hsdir/hs_protocol.hpp"
#include "hsdir/simulator.hpp"

using namespace hsdir;

namespace {

Digest random_digest(Rng& rng) {
  Digest d{};
  for (auto& b : d) b = static_cast<std::uint8_t>(rng());
  return d;
}

HsDirRing random_ring(std::size_t n, Rng& rng) {
  std::set<Fingerprint> unique;
  while (unique.size() < n) unique.insert(Fingerprint(random_digest(rng)));
  return HsDirRing(std::vector<Fingerprint>(unique.begin(), unique.end()));
}

void BM_DescriptorId(benchmark::State& state) {
  const OnionAddress onion = OnionAddress::parse("54y4xsyebx4zmvyj");
  std::int64_t period = 15740;
  for (auto _ : state) {
    benchmark::DoNotOptimize(descriptor_id(onion.id(), period++, 0));
  }
}
BENCHMARK(BM_DescriptorId);

void BM_ResponsibleHsdirs(benchmark::State& state) {
  Rng rng(1);
  const HsDirRing ring = random_ring(static_cast<std::size_t>(state.range(0)), rng);
  std::vector<DescriptorId> ids;
  for (int i = 0; i < 1024; ++i) ids.emplace_back(random_digest(rng));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(responsible_hsdirs(ids[i++ & 1023], ring));
  }
}
BENCHMARK(BM_ResponsibleHsdirs)->Arg(50)->Arg(757)->Arg(3000);

void BM_RingDistance(benchmark::State& state) {
  Rng rng(2);
  const DescriptorId desc(random_digest(rng));
  const Fingerprint fp(random_digest(rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ring_distance(desc, fp));
  }
}
BENCHMARK(BM_RingDistance);

void BM_GrindDirect(benchmark::State& state) {
  Rng rng(3);
  const DescriptorId target(random_digest(rng));
  const Distance width = keyspace_size() / 100000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(grind_fingerprint_direct(target, width, rng));
  }
}
BENCHMARK(BM_GrindDirect);

}  // namespace
