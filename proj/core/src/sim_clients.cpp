#include <algorithm>
#include <array>
#include <cmath>

#include <boost/random/uniform_int_distribution.hpp>

#include "hsdir/error.hpp"
#include "hsdir/simulator.hpp"

namespace hsdir {

namespace {

constexpr std::uint32_t kClientNet = 0x64400000;  // 100.64.0.0/10

constexpr std::array<std::string_view, 8> kRegions{
    "region-a", "region-b", "region-c", "region-d",
    "region-e", "region-f", "region-g", "region-h",
};

}  // namespace

double guard_compromise_probability(std::int64_t total_guards,
                                    std::int64_t attacker_guards, int set_size) {
  if (total_guards < 1 || attacker_guards < 0 || attacker_guards > total_guards ||
      set_size < 1 || set_size > total_guards) {
    throw Error(ErrorKind::InvalidArgument,
                "need 0 <= a <= G and 1 <= k <= G (G=" + std::to_string(total_guards) +
                    ", a=" + std::to_string(attacker_guards) +
                    ", k=" + std::to_string(set_size) + ")");
  }
  // C(G - a, k) / C(G, k) as a product of k ratios.
  double clean = 1.0;
  for (int i = 0; i < set_size; ++i) {
    clean *= static_cast<double>(total_guards - attacker_guards - i) /
             static_cast<double>(total_guards - i);
    if (clean <= 0) return 1.0;
  }
  return 1.0 - clean;
}

std::vector<double> zipf_weights(std::size_t n, double exponent) {
  std::vector<double> w(n);
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::pow(static_cast<double>(i + 1), -exponent);
    sum += w[i];
  }
  for (auto& x : w) x /= sum;
  return w;
}

std::span<const std::string_view> client_regions() { return kRegions; }

ClientPool::ClientPool(std::size_t clients, Rng& rng)
    : rng_(&rng), guards_(clients), ips_(clients), regions_(clients) {
  boost::random::uniform_int_distribution<std::size_t> region(0, kRegions.size() - 1);
  for (std::size_t c = 0; c < clients; ++c) {
    ips_[c] = kClientNet + static_cast<std::uint32_t>(c) + 1;
    regions_[c] = std::string(kRegions[region(rng)]);
  }
}

void ClientPool::refresh(std::size_t client, std::int64_t now,
                         std::span<const Fingerprint> available) {
  auto& set = guards_[client];
  auto reachable = [&](const ClientGuard& g) {
    return std::binary_search(available.begin(), available.end(), g.fingerprint);
  };
  std::erase_if(set, [&](const ClientGuard& g) { return g.expires <= now; });
  if (std::count_if(set.begin(), set.end(), reachable) < kMinReachable) {
    std::erase_if(set, [&](const ClientGuard& g) { return !reachable(g); });
  }
  if (set.size() >= static_cast<std::size_t>(kGuardSetSize)) return;

  std::vector<Fingerprint> candidates;
  for (const auto& fp : available) {
    if (std::none_of(set.begin(), set.end(),
                     [&](const ClientGuard& g) { return g.fingerprint == fp; })) {
      candidates.push_back(fp);
    }
  }
  boost::random::uniform_int_distribution<std::int64_t> lifetime(kMinLifetime,
                                                                  kMaxLifetime);
  while (set.size() < static_cast<std::size_t>(kGuardSetSize) && !candidates.empty()) {
    boost::random::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    std::size_t i = pick(*rng_);
    set.push_back({candidates[i], now + lifetime(*rng_)});
    candidates.erase(candidates.begin() + static_cast<long>(i));
  }
}

std::optional<Fingerprint> ClientPool::pick_guard(
    std::size_t client, std::span<const Fingerprint> available) {
  std::vector<const ClientGuard*> usable;
  for (const auto& g : guards_[client]) {
    if (std::binary_search(available.begin(), available.end(), g.fingerprint)) {
      usable.push_back(&g);
    }
  }
  if (usable.empty()) return std::nullopt;
  boost::random::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);
  return usable[pick(*rng_)]->fingerprint;
}

DeanonExperimentResult simulate_client_deanonymisation(
    const DeanonExperimentConfig& config) {
  const std::int64_t G = config.total_guards;
  const std::int64_t a = config.attacker_guards;
  if (G < ClientPool::kGuardSetSize || a < 0 || a > G || config.attacker_slots < 0 ||
      config.attacker_slots > 2 * static_cast<int>(kResponsiblePerReplica) ||
      config.clients == 0 || config.hours < 1) {
    throw Error(ErrorKind::InvalidArgument, "invalid deanonymisation experiment");
  }
  Rng rng(config.seed);

  // Guard population; the first `a` generated belong to the attacker.
  std::vector<Fingerprint> guards;
  std::set<Fingerprint> attacker;
  for (std::int64_t i = 0; i < G; ++i) {
    Digest d{};
    for (std::size_t b = 0; b < d.size(); b += 8) {
      std::uint64_t v = rng();
      for (std::size_t k = 0; k < 8 && b + k < d.size(); ++k) {
        d[b + k] = static_cast<std::uint8_t>(v >> (56 - 8 * k));
      }
    }
    guards.emplace_back(d);
    if (i < a) attacker.insert(guards.back());
  }
  std::sort(guards.begin(), guards.end());

  ClientPool pool(config.clients, rng);
  DeanonExperimentResult result;
  for (auto region : kRegions) result.events_by_region[std::string(region)] = 0;

  const int total_slots = 2 * static_cast<int>(kResponsiblePerReplica);
  boost::random::uniform_int_distribution<std::size_t> pick_client(0, config.clients - 1);
  boost::random::uniform_int_distribution<int> pick_slot(0, total_slots - 1);
  std::vector<std::uint64_t> per_client(config.clients, 0);

  const auto hours = static_cast<std::uint64_t>(config.hours);
  for (std::uint64_t h = 0; h < hours; ++h) {
    const std::int64_t now = static_cast<std::int64_t>(h) * kSecondsPerHour;
    std::uint64_t quota = config.requests / hours + (h < config.requests % hours ? 1 : 0);
    for (std::uint64_t i = 0; i < quota; ++i) {
      std::size_t c = pick_client(rng);
      pool.refresh(c, now, guards);
      auto guard = pool.pick_guard(c, guards);
      // Replica uniform, then one of its three HSDirs uniform.
      int slot = pick_slot(rng);
      ++result.requests;
      ++per_client[c];
      if (slot < config.attacker_slots && guard && attacker.count(*guard)) {
        ++result.events;
        ++result.events_by_region[pool.region(c)];
      }
    }
  }

  const double R = static_cast<double>(result.requests);
  const double s = static_cast<double>(config.attacker_slots) / total_slots;
  const double f = static_cast<double>(a) / static_cast<double>(G);
  result.rate = R > 0 ? static_cast<double>(result.events) / R : 0;
  result.expected = s * f;

  // pi_c = s * k_c / 3 with k_c hypergeometric(G, a, 3).
  const double k = ClientPool::kGuardSetSize;
  const double var_k = k * f * (1 - f) * (static_cast<double>(G) - k) /
                       std::max(1.0, static_cast<double>(G) - 1);
  const double var_pi = s * s * var_k / (k * k);
  const double e_pi2 = s * s * (var_k + k * k * f * f) / (k * k);
  double sum_sq = 0;
  for (auto n : per_client) sum_sq += static_cast<double>(n) * static_cast<double>(n);
  const double var_events = R * (result.expected - e_pi2) + sum_sq * var_pi;
  result.sigma = R > 0 ? std::sqrt(std::max(0.0, var_events)) / R : 0;
  return result;
}

}  // namespace hsdir
