#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <boost/random/mersenne_twister.hpp>

#include "hsdir/consensus.hpp"
#include "hsdir/detector.hpp"
#include "hsdir/hs_protocol.hpp"

namespace hsdir {

using Rng = boost::random::mt19937_64;

// Configuration -------------------------------------------------------------------

enum class AttackStrategy { Grind, Shadow, GuardAndHsdir };

std::string_view to_string(AttackStrategy strategy) noexcept;
AttackStrategy parse_attack_strategy(std::string_view text);

struct AttackerSpec {
  AttackStrategy strategy = AttackStrategy::Grind;
  /// n: distinct addresses the attacker controls.
  int ip_count = 2;
  /// m: relay instances per address.
  int relays_per_ip = 2;
  OnionAddress target;
  /// Grinding window as a fraction of the average ring gap.
  double grind_width = 1e-5;
  /// Extra high-bandwidth relays run to collect the Guard flag.
  int guard_count = 0;
  /// Hour offset at which the attacker starts launching relays.
  std::int64_t start_hour = 0;
};

struct HiddenServiceSpec {
  OnionAddress onion;
  /// Hours after the simulation start before the first descriptor upload.
  std::int64_t publish_offset_hours = 0;
};

struct RequestModel {
  double zipf_exponent = 1.0;
  double nonexistent_fraction = 0.8;
  /// Mean of the Poisson number of lookups per client per hour.
  double requests_per_client_hour = 1.0;
};

struct SimConfig {
  std::uint64_t seed = 0;
  /// Unix time of hour 0 (hour-aligned).
  std::int64_t start_time = 1356998400;  // 2013-01-01T00:00:00Z
  std::int64_t duration_hours = 72;
  std::size_t honest_relays = 100;
  /// Per-hour probability that a running honest relay goes offline.
  double hourly_churn = 0.002;
  /// Per-hour probability that an offline honest relay comes back.
  double rejoin_probability = 0.1;
  /// Probability that a returning relay has generated a new key.
  double fingerprint_renewal_probability = 0.1;
  std::int64_t hsdir_uptime_requirement = 90000;
  std::int64_t guard_uptime_requirement = 8 * kSecondsPerDay;
  int max_relays_per_ip = kDefaultMaxRelaysPerIp;
  std::vector<HiddenServiceSpec> hidden_services;
  std::optional<AttackerSpec> attacker;
  std::size_t client_population = 0;
  RequestModel request_model;

  /// Throws ValidationError naming every offending field.
  void validate() const;
};

// Flag assignment -------------------------------------------------------------------

/// A relay process as the authorities see it.
struct SimRelay {
  Fingerprint fingerprint;
  std::string nickname;
  std::uint32_t ip = 0;
  std::uint16_t port = 0;
  std::uint64_t bandwidth = 0;
  /// Start of the current continuous run.
  std::int64_t online_since = 0;

  Identity identity() const { return {ip, port}; }
};

struct FlagRules {
  std::int64_t hsdir_uptime = 90000;
  std::int64_t guard_uptime = 8 * kSecondsPerDay;
  int max_relays_per_ip = kDefaultMaxRelaysPerIp;
};

/// Builds the consensus entries for the running relays at time `now`: the
/// max_relays_per_ip highest-bandwidth relays of each address (ties to the
/// lower fingerprint), HSDir for continuous uptime >= hsdir_uptime, Guard
/// for uptime >= guard_uptime and bandwidth >= the lower median of the
/// listed relays. Output is sorted by fingerprint.
std::vector<RelayEntry> assign_flags(std::span<const SimRelay> running,
                                     std::int64_t now, const FlagRules& rules);

// Attack primitives -----------------------------------------------------------------

struct GrindResult {
  Fingerprint fingerprint;
  std::uint64_t attempts = 0;
};

/// Rejection-samples uniform fingerprints until one lands in
/// (target, target + width]. Throws GaveUp after `max_attempts`.
GrindResult grind_fingerprint(const DescriptorId& target, const Distance& width,
                              Rng& rng, std::uint64_t max_attempts = 10'000'000);

/// Same output distribution as grind_fingerprint, drawn directly: a uniform
/// offset in [1, width] and a geometric attempt count with success
/// probability width / 2^160. Used where the expected attempt count is too
/// large to enumerate.
GrindResult grind_fingerprint_direct(const DescriptorId& target,
                                     const Distance& width, Rng& rng);

struct ShadowStep {
  std::int64_t hour = 0;
  /// Relay indices (ip * m + slot) taken offline and promoted at `hour`.
  std::vector<int> deactivate;
  std::vector<int> promote;
};

struct ShadowPlan {
  int ip_count = 0;
  int relays_per_ip = 0;
  /// Hours between rotations.
  std::int64_t interval = 0;
  /// Offsets relative to the attacker's start hour. The first step is the
  /// initial active set becoming HSDirs.
  std::vector<ShadowStep> steps;
  /// Probability that a uniformly random descriptor id has an attacker
  /// relay among its responsible HSDirs at some point of the rotation.
  double coverage = 0;
};

/// Rotation that makes every one of the n*m relays an active HSDir within
/// `period_hours`, given `honest_hsdirs` honest ring members.
ShadowPlan shadow_takeover_plan(int n_ips, int m_per_ip, std::int64_t period_hours,
                                std::size_t honest_hsdirs,
                                int max_relays_per_ip = kDefaultMaxRelaysPerIp,
                                std::int64_t hsdir_uptime_hours = 25);

/// 1 - C(N, 3) / C(N + K, 3): chance that one of K uniformly placed attacker
/// fingerprints precedes the third honest successor of a random point.
double shadow_coverage(std::size_t honest_hsdirs, std::size_t attacker_relays);

// Clients ---------------------------------------------------------------------------

/// 1 - C(G - a, k) / C(G, k).
double guard_compromise_probability(std::int64_t total_guards,
                                    std::int64_t attacker_guards, int set_size = 3);

/// Zipf weights 1/rank^s, normalised to sum 1.
std::vector<double> zipf_weights(std::size_t n, double exponent);

struct ClientGuard {
  Fingerprint fingerprint;
  std::int64_t expires = 0;
};

/// Guard state of the client population.
class ClientPool {
 public:
  static constexpr int kGuardSetSize = 3;
  static constexpr int kMinReachable = 2;
  static constexpr std::int64_t kMinLifetime = 30 * kSecondsPerDay;
  static constexpr std::int64_t kMaxLifetime = 60 * kSecondsPerDay;

  ClientPool(std::size_t clients, Rng& rng);

  std::size_t size() const noexcept { return guards_.size(); }
  const std::vector<ClientGuard>& guards(std::size_t client) const {
    return guards_[client];
  }
  std::uint32_t ip_surrogate(std::size_t client) const { return ips_[client]; }
  const std::string& region(std::size_t client) const { return regions_[client]; }

  /// Drops expired guards; when fewer than two remain reachable the set is
  /// refilled to three from `available` (sorted).
  void refresh(std::size_t client, std::int64_t now,
               std::span<const Fingerprint> available);

  /// Uniform first hop among the client's guards present in `available`.
  std::optional<Fingerprint> pick_guard(std::size_t client,
                                        std::span<const Fingerprint> available);

 private:
  Rng* rng_;
  std::vector<std::vector<ClientGuard>> guards_;
  std::vector<std::uint32_t> ips_;
  std::vector<std::string> regions_;
};

/// The synthetic regions client surrogates are assigned to.
std::span<const std::string_view> client_regions();

// Output ----------------------------------------------------------------------------

struct RequestRecord {
  /// Unix hour number (unix seconds / 3600).
  std::int64_t hour = 0;
  DescriptorId desc_id;
  std::uint32_t count = 0;
  std::uint32_t client = 0;
  std::optional<Fingerprint> guard;
  /// Ground truth, not written to the log: the id belongs to a published
  /// service.
  bool existing = false;
};

struct DeanonEvent {
  std::int64_t hour = 0;
  std::uint32_t client = 0;
  std::uint32_t client_ip = 0;
  std::string region;
};

enum class AttackerRole { HsDir, Shadow, Guard };
std::string_view to_string(AttackerRole role) noexcept;

struct AttackerRelay {
  Fingerprint fingerprint;
  Identity identity;
  std::string nickname;
  std::uint64_t bandwidth = 0;
  AttackerRole role = AttackerRole::HsDir;
  /// Target period for ground relays.
  std::optional<std::int64_t> target_period;
  std::optional<int> replica;
  /// Half-open online intervals, unix seconds.
  std::vector<TimeRange> online;
};

struct ResponsibleRecord {
  OnionAddress onion;
  std::int64_t period = 0;
  std::int64_t upload_time = 0;
  int replica = 0;
  DescriptorId desc_id;
  std::array<Fingerprint, kResponsiblePerReplica> hsdirs;
  /// Number of the three held by attacker relays.
  int attacker_slots = 0;
};

struct GroundTruth {
  std::optional<AttackStrategy> strategy;
  std::vector<AttackerRelay> relays;
  /// First period the attacker positioned relays for.
  std::optional<std::int64_t> setup_period;
  std::uint64_t grind_attempts = 0;
  std::optional<ShadowPlan> shadow_plan;
  std::vector<ResponsibleRecord> responsible;
  std::uint64_t existing_requests = 0;
  std::uint64_t nonexistent_requests = 0;

  std::set<Fingerprint> attacker_fingerprints() const;
  std::set<Identity> attacker_identities() const;
};

struct SimOutput {
  SimConfig config;
  ConsensusArchive archive;
  GroundTruth ground_truth;
  std::vector<RequestRecord> requests;
  std::vector<DeanonEvent> deanon_events;
};

/// Runs the hourly loop: honest churn, attacker step, flag assignment,
/// snapshot, descriptor uploads, client lookups. Deterministic in the seed.
SimOutput run_simulation(const SimConfig& config);

// Stand-alone deanonymisation experiment -------------------------------------------

struct DeanonExperimentConfig {
  std::uint64_t seed = 0;
  std::int64_t total_guards = 100;
  std::int64_t attacker_guards = 10;
  /// Responsible slots held by the attacker, out of 6 (3 per replica).
  int attacker_slots = 3;
  std::size_t clients = 20000;
  std::uint64_t requests = 100000;
  /// Simulated span the requests are spread over.
  std::int64_t hours = 24 * 90;
};

struct DeanonExperimentResult {
  std::uint64_t requests = 0;
  std::uint64_t events = 0;
  double rate = 0;
  /// attacker_slots / 6 * a / G.
  double expected = 0;
  /// Standard error of `rate` under the model, including the correlation
  /// from each client reusing its guard set.
  double sigma = 0;
  std::map<std::string, std::uint64_t> events_by_region;
};

/// Clients with three uniform guards (rotated after 30-60 days) look up a
/// service whose first `attacker_slots` responsible slots are attacker
/// relays. An event needs an attacker HSDir and an attacker first hop.
DeanonExperimentResult simulate_client_deanonymisation(
    const DeanonExperimentConfig& config);

// File formats ----------------------------------------------------------------------

/// Reads a JSON or TOML config (chosen by extension, ".toml" for TOML).
SimConfig load_sim_config(const std::string& path);
SimConfig parse_sim_config(std::string_view text, bool toml);

/// Writes archive.jsonl, requests.csv and ground_truth.json into `dir`.
void write_sim_output(const SimOutput& output, const std::string& dir);
void write_request_log(std::span<const RequestRecord> requests, std::ostream& out);
std::string ground_truth_to_json(const SimOutput& output);

}  // namespace hsdir
