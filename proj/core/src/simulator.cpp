#include "hsdir/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/discrete_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "hsdir/error.hpp"

namespace hsdir {

namespace {

constexpr std::uint16_t kHonestPort = 9001;
constexpr std::uint32_t kHonestNet = 0x0A000000;     // 10.0.0.0/8
constexpr std::uint32_t kAttackerNet = 0xCB007100;   // 203.0.113.0/24
constexpr std::uint32_t kGuardNet = 0xC6336400;      // 198.51.100.0/22
constexpr std::int64_t kGroundLeadHours = 26;
constexpr std::string_view kAttackerStem = "hsdirwatch";

Fingerprint random_fingerprint(Rng& rng) {
  Digest d{};
  for (std::size_t i = 0; i < d.size(); i += 8) {
    std::uint64_t v = rng();
    for (std::size_t b = 0; b < 8 && i + b < d.size(); ++b) {
      d[i + b] = static_cast<std::uint8_t>(v >> (56 - 8 * b));
    }
  }
  return Fingerprint(d);
}

std::string random_nickname(Rng& rng) {
  static constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyz";
  boost::random::uniform_int_distribution<int> len(8, 12);
  boost::random::uniform_int_distribution<int> letter(0, 25);
  std::string out;
  int n = len(rng);
  for (int i = 0; i < n; ++i) out += kLetters[static_cast<std::size_t>(letter(rng))];
  return out;
}

bool bernoulli(Rng& rng, double p) {
  if (p <= 0) return false;
  if (p >= 1) return true;
  return boost::random::bernoulli_distribution<double>(p)(rng);
}

}  // namespace

// Configuration -----------------------------------------------------------------------

std::string_view to_string(AttackStrategy strategy) noexcept {
  switch (strategy) {
    case AttackStrategy::Grind: return "GRIND";
    case AttackStrategy::Shadow: return "SHADOW";
    case AttackStrategy::GuardAndHsdir: return "GUARD_AND_HSDIR";
  }
  return "UNKNOWN";
}

AttackStrategy parse_attack_strategy(std::string_view text) {
  std::string up;
  for (char c : text) {
    up += (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
  }
  for (auto s : {AttackStrategy::Grind, AttackStrategy::Shadow,
                 AttackStrategy::GuardAndHsdir}) {
    if (up == to_string(s)) return s;
  }
  throw Error(ErrorKind::ValidationError,
              "unknown attack strategy '" + std::string(text) + "'");
}

std::string_view to_string(AttackerRole role) noexcept {
  switch (role) {
    case AttackerRole::HsDir: return "hsdir";
    case AttackerRole::Shadow: return "shadow";
    case AttackerRole::Guard: return "guard";
  }
  return "unknown";
}

void SimConfig::validate() const {
  std::vector<std::string> bad;
  auto prob = [&](double p, const char* name) {
    if (!(p >= 0 && p <= 1)) bad.emplace_back(name);
  };
  if (start_time < 0 || start_time % kSecondsPerHour != 0) bad.emplace_back("start_time");
  if (duration_hours < 48) bad.emplace_back("duration_hours");
  prob(hourly_churn, "hourly_churn");
  prob(rejoin_probability, "rejoin_probability");
  prob(fingerprint_renewal_probability, "fingerprint_renewal_probability");
  if (hsdir_uptime_requirement < 0) bad.emplace_back("hsdir_uptime_requirement");
  if (guard_uptime_requirement < 0) bad.emplace_back("guard_uptime_requirement");
  if (max_relays_per_ip < 1) bad.emplace_back("max_relays_per_ip");
  if (honest_relays > 0xFFFFFE) bad.emplace_back("honest_relays");
  for (const auto& hs : hidden_services) {
    if (hs.publish_offset_hours < 0) {
      bad.emplace_back("hidden_services.publish_offset_hours");
      break;
    }
  }
  prob(request_model.nonexistent_fraction, "request_model.nonexistent_fraction");
  if (!(request_model.zipf_exponent >= 0)) bad.emplace_back("request_model.zipf_exponent");
  if (!(request_model.requests_per_client_hour >= 0)) {
    bad.emplace_back("request_model.requests_per_client_hour");
  }
  if (attacker) {
    const AttackerSpec& a = *attacker;
    if (a.ip_count < 1 || a.ip_count > 254) bad.emplace_back("attacker.ip_count");
    if (a.relays_per_ip < 1 || a.relays_per_ip > 64) {
      bad.emplace_back("attacker.relays_per_ip");
    }
    if (!(a.grind_width > 0 && a.grind_width <= 1)) bad.emplace_back("attacker.grind_width");
    if (a.guard_count < 0 || a.guard_count > 1000) bad.emplace_back("attacker.guard_count");
    if (a.start_hour < 0 || a.start_hour >= duration_hours) {
      bad.emplace_back("attacker.start_hour");
    }
    if (a.strategy != AttackStrategy::Shadow) {
      // One address per replica, and two identities per address so the
      // previous period's relay can stay up while the next one is seeded.
      if (a.ip_count < kReplicas) bad.emplace_back("attacker.ip_count");
      if (a.relays_per_ip < 2) bad.emplace_back("attacker.relays_per_ip");
    }
  }
  if (!bad.empty()) {
    std::sort(bad.begin(), bad.end());
    bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
    std::string msg = "invalid simulation config:";
    for (const auto& b : bad) msg += " " + b;
    throw Error(ErrorKind::ValidationError, msg);
  }
}

// Flag assignment ----------------------------------------------------------------------

std::vector<RelayEntry> assign_flags(std::span<const SimRelay> running,
                                     std::int64_t now, const FlagRules& rules) {
  std::map<std::uint32_t, std::vector<const SimRelay*>> by_ip;
  for (const auto& r : running) by_ip[r.ip].push_back(&r);

  std::vector<const SimRelay*> listed;
  for (auto& [ip, relays] : by_ip) {
    std::sort(relays.begin(), relays.end(), [](const SimRelay* a, const SimRelay* b) {
      if (a->bandwidth != b->bandwidth) return a->bandwidth > b->bandwidth;
      return a->fingerprint < b->fingerprint;
    });
    std::size_t keep =
        std::min(relays.size(), static_cast<std::size_t>(rules.max_relays_per_ip));
    listed.insert(listed.end(), relays.begin(), relays.begin() + static_cast<long>(keep));
  }

  std::uint64_t median_bw = 0;
  if (!listed.empty()) {
    std::vector<std::uint64_t> bws;
    for (const SimRelay* r : listed) bws.push_back(r->bandwidth);
    std::sort(bws.begin(), bws.end());
    median_bw = bws[(bws.size() - 1) / 2];
  }

  std::vector<RelayEntry> out;
  out.reserve(listed.size());
  for (const SimRelay* r : listed) {
    RelayEntry e;
    e.fingerprint = r->fingerprint;
    e.nickname = r->nickname;
    e.ip = r->ip;
    e.or_port = r->port;
    e.bandwidth = r->bandwidth;
    e.flags.set(RelayFlag::Running);
    e.flags.set(RelayFlag::Valid);
    std::int64_t uptime = now - r->online_since;
    if (uptime >= rules.hsdir_uptime) e.flags.set(RelayFlag::HSDir);
    if (uptime >= rules.guard_uptime && r->bandwidth >= median_bw) {
      e.flags.set(RelayFlag::Guard);
    }
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(), [](const RelayEntry& a, const RelayEntry& b) {
    return a.fingerprint < b.fingerprint;
  });
  return out;
}

// Attack primitives --------------------------------------------------------------------

GrindResult grind_fingerprint(const DescriptorId& target, const Distance& width,
                              Rng& rng, std::uint64_t max_attempts) {
  if (width < 1) throw Error(ErrorKind::InvalidArgument, "grind width must be >= 1");
  for (std::uint64_t attempt = 1; attempt <= max_attempts; ++attempt) {
    Fingerprint fp = random_fingerprint(rng);
    Distance d = ring_distance(target, fp);
    if (d > 0 && d <= width) return {fp, attempt};
  }
  throw Error(ErrorKind::GaveUp, "no fingerprint within width after " +
                                     std::to_string(max_attempts) + " attempts");
}

GrindResult grind_fingerprint_direct(const DescriptorId& target,
                                     const Distance& width, Rng& rng) {
  if (width < 1) throw Error(ErrorKind::InvalidArgument, "grind width must be >= 1");
  Distance w = std::min<Distance>(width, keyspace_size());
  boost::random::uniform_int_distribution<Distance> offset(1, w);
  Distance pos = target.to_integer() + offset(rng);
  Fingerprint fp = Fingerprint::from_integer(pos);

  double p = std::ldexp(w.convert_to<double>(), -160);
  std::uint64_t attempts = 1;
  if (p < 1) {
    double u = 1.0 - boost::random::uniform_01<double>()(rng);  // (0, 1]
    double extra = std::floor(std::log(u) / std::log1p(-p));
    attempts += extra >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max() - 1
                                : static_cast<std::uint64_t>(extra);
  }
  return {fp, attempts};
}

double shadow_coverage(std::size_t honest_hsdirs, std::size_t attacker_relays) {
  const double n = static_cast<double>(honest_hsdirs);
  const double t = static_cast<double>(honest_hsdirs + attacker_relays);
  if (attacker_relays == 0) return 0;
  if (honest_hsdirs < kResponsiblePerReplica) return 1;
  return 1 - (n * (n - 1) * (n - 2)) / (t * (t - 1) * (t - 2));
}

ShadowPlan shadow_takeover_plan(int n_ips, int m_per_ip, std::int64_t period_hours,
                                std::size_t honest_hsdirs, int max_relays_per_ip,
                                std::int64_t hsdir_uptime_hours) {
  if (n_ips < 1 || m_per_ip < 1 || period_hours < 1 || max_relays_per_ip < 1) {
    throw Error(ErrorKind::InvalidArgument, "shadow plan needs positive n, m, period");
  }
  ShadowPlan plan;
  plan.ip_count = n_ips;
  plan.relays_per_ip = m_per_ip;
  const int stages = (m_per_ip + max_relays_per_ip - 1) / max_relays_per_ip;
  plan.interval = std::max<std::int64_t>(1, period_hours / stages);
  if ((stages - 1) * plan.interval >= period_hours) {
    throw Error(ErrorKind::InvalidArgument,
                "cannot rotate " + std::to_string(stages) + " stages within " +
                    std::to_string(period_hours) + " hours");
  }

  auto group = [&](int stage) {
    std::vector<int> out;
    for (int ip = 0; ip < n_ips; ++ip) {
      for (int k = 0; k < max_relays_per_ip; ++k) {
        int slot = stage * max_relays_per_ip + k;
        if (slot < m_per_ip) out.push_back(ip * m_per_ip + slot);
      }
    }
    return out;
  };
  for (int stage = 0; stage < stages; ++stage) {
    ShadowStep step;
    step.hour = hsdir_uptime_hours + stage * plan.interval;
    if (stage > 0) step.deactivate = group(stage - 1);
    step.promote = group(stage);
    plan.steps.push_back(std::move(step));
  }
  plan.coverage = shadow_coverage(
      honest_hsdirs, static_cast<std::size_t>(n_ips) * static_cast<std::size_t>(m_per_ip));
  return plan;
}

// Ground truth -------------------------------------------------------------------------

std::set<Fingerprint> GroundTruth::attacker_fingerprints() const {
  std::set<Fingerprint> out;
  for (const auto& r : relays) out.insert(r.fingerprint);
  return out;
}

std::set<Identity> GroundTruth::attacker_identities() const {
  std::set<Identity> out;
  for (const auto& r : relays) out.insert(r.identity);
  return out;
}

// Simulation ---------------------------------------------------------------------------

namespace {

struct Process {
  SimRelay relay;
  bool online = true;
  /// Index into GroundTruth::relays for attacker processes.
  std::optional<std::size_t> truth;
};

class Simulation {
 public:
  explicit Simulation(const SimConfig& config)
      : cfg_(config),
        rng_(config.seed),
        rules_{config.hsdir_uptime_requirement, config.guard_uptime_requirement,
               config.max_relays_per_ip} {
    out_.config = config;
  }

  SimOutput run() {
    init_honest();
    init_services();
    if (cfg_.attacker) init_attacker();
    if (cfg_.client_population > 0) clients_.emplace(cfg_.client_population, rng_);

    for (std::int64_t h = 0; h < cfg_.duration_hours; ++h) {
      const std::int64_t now = cfg_.start_time + h * kSecondsPerHour;
      if (h > 0) churn(now);
      if (cfg_.attacker) attacker_step(h, now);
      ConsensusSnapshot snapshot = build_snapshot(now);
      ring_ = snapshot.hsdir_ring();
      last_hsdir_count_ = ring_.size();
      record_uploads(h, now);
      if (clients_) client_step(now, snapshot);
      out_.archive.append(std::move(snapshot));
    }
    const std::int64_t end = cfg_.start_time + cfg_.duration_hours * kSecondsPerHour;
    for (auto& p : procs_) {
      if (p.online && p.truth) out_.ground_truth.relays[*p.truth].online.back().to = end;
    }
    out_.ground_truth.existing_requests = existing_;
    out_.ground_truth.nonexistent_requests = nonexistent_;
    return std::move(out_);
  }

 private:
  Fingerprint fresh_fingerprint() {
    for (;;) {
      Fingerprint fp = random_fingerprint(rng_);
      if (used_.insert(fp).second) return fp;
    }
  }

  void init_honest() {
    boost::random::uniform_int_distribution<std::uint64_t> bw(100, 10000);
    for (std::size_t i = 0; i < cfg_.honest_relays; ++i) {
      Process p;
      p.relay.fingerprint = fresh_fingerprint();
      p.relay.nickname = random_nickname(rng_);
      p.relay.ip = kHonestNet + static_cast<std::uint32_t>(i) + 1;
      p.relay.port = kHonestPort;
      p.relay.bandwidth = bw(rng_);
      p.relay.online_since = cfg_.start_time;
      procs_.push_back(std::move(p));
    }
  }

  void init_services() {
    if (cfg_.hidden_services.empty()) return;
    auto weights = zipf_weights(cfg_.hidden_services.size(),
                                cfg_.request_model.zipf_exponent);
    service_pick_ = boost::random::discrete_distribution<std::size_t, double>(
        weights.begin(), weights.end());
  }

  void churn(std::int64_t now) {
    for (auto& p : procs_) {
      if (p.truth) continue;
      if (p.online) {
        if (bernoulli(rng_, cfg_.hourly_churn)) p.online = false;
      } else if (bernoulli(rng_, cfg_.rejoin_probability)) {
        p.online = true;
        p.relay.online_since = now;
        if (bernoulli(rng_, cfg_.fingerprint_renewal_probability)) {
          p.relay.fingerprint = fresh_fingerprint();
        }
      }
    }
  }

  // Attacker --------------------------------------------------------------------

  std::int64_t snapshot_hour(std::int64_t t) const {
    return (t - cfg_.start_time) / kSecondsPerHour;
  }

  std::int64_t launch_hour(std::int64_t period) const {
    return snapshot_hour(period_start(period, cfg_.attacker->target.id())) -
           kGroundLeadHours;
  }

  void init_attacker() {
    const AttackerSpec& a = *cfg_.attacker;
    out_.ground_truth.strategy = a.strategy;
    if (a.strategy != AttackStrategy::Shadow) {
      const ServiceId& id = a.target.id();
      next_period_ = time_period(cfg_.start_time, id);
      while (launch_hour(next_period_) < a.start_hour) ++next_period_;
    }
  }

  std::size_t launch(std::uint32_t ip, std::uint16_t port, std::string nickname,
                     std::uint64_t bandwidth, Fingerprint fp, std::int64_t now,
                     AttackerRole role) {
    AttackerRelay truth;
    truth.fingerprint = fp;
    truth.identity = {ip, port};
    truth.nickname = std::move(nickname);
    truth.bandwidth = bandwidth;
    truth.role = role;
    truth.online.push_back({now, now});
    out_.ground_truth.relays.push_back(truth);

    Process p;
    p.relay = {fp, truth.nickname, ip, port, bandwidth, now};
    p.truth = out_.ground_truth.relays.size() - 1;
    procs_.push_back(std::move(p));
    attacker_fps_.insert(fp);
    return procs_.size() - 1;
  }

  void stop(Process& p, std::int64_t now) {
    if (!p.online) return;
    p.online = false;
    if (p.truth) out_.ground_truth.relays[*p.truth].online.back().to = now;
  }

  Distance estimated_avg_gap() const {
    std::size_t n = last_hsdir_count_;
    if (n == 0) {
      n = static_cast<std::size_t>(std::count_if(
          procs_.begin(), procs_.end(), [](const Process& p) { return p.online; }));
    }
    return keyspace_size() / std::max<std::size_t>(n, 1);
  }

  void attacker_step(std::int64_t h, std::int64_t now) {
    const AttackerSpec& a = *cfg_.attacker;
    if (h < a.start_hour) return;
    if (a.strategy == AttackStrategy::Shadow) {
      shadow_step(h, now);
      return;
    }
    if (h == a.start_hour) launch_guards(now);
    while (launch_hour(next_period_) == h) {
      const std::int64_t q = next_period_++;
      if (launch_hour(q) + kGroundLeadHours >= cfg_.duration_hours) continue;
      seed_ground_relays(q, now);
    }
  }

  void launch_guards(std::int64_t now) {
    const AttackerSpec& a = *cfg_.attacker;
    for (int k = 0; k < a.guard_count; ++k) {
      launch(kGuardNet + static_cast<std::uint32_t>(k) + 1, 443,
             std::string(kAttackerStem) + "g" + std::to_string(k), 50000,
             fresh_fingerprint(), now, AttackerRole::Guard);
    }
  }

  void seed_ground_relays(std::int64_t q, std::int64_t now) {
    const AttackerSpec& a = *cfg_.attacker;
    if (!out_.ground_truth.setup_period) out_.ground_truth.setup_period = q;
    Distance width = estimated_avg_gap() * Distance(std::llround(a.grind_width * 1e12)) /
                     Distance(1000000000000LL);
    if (width < 1) width = 1;
    for (int r = 0; r < kReplicas; ++r) {
      const std::uint32_t ip = kAttackerNet + static_cast<std::uint32_t>(r) + 1;
      // Keep only the previous period's relay on this address.
      for (auto& p : procs_) {
        if (!p.truth || p.relay.ip != ip) continue;
        const auto& truth = out_.ground_truth.relays[*p.truth];
        if (truth.target_period != q - 1) stop(p, now);
      }
      const DescriptorId desc = descriptor_id(a.target.id(), q, r);
      GrindResult g = grind_fingerprint_direct(desc, width, rng_);
      while (!used_.insert(g.fingerprint).second) {
        g = grind_fingerprint_direct(desc, width, rng_);
      }
      out_.ground_truth.grind_attempts += g.attempts;
      const int slot = static_cast<int>(q % a.relays_per_ip);
      std::size_t idx =
          launch(ip, static_cast<std::uint16_t>(kHonestPort + slot),
                 std::string(kAttackerStem) + std::to_string(r * a.relays_per_ip + slot),
                 8000, g.fingerprint, now, AttackerRole::HsDir);
      auto& truth = out_.ground_truth.relays[*procs_[idx].truth];
      truth.target_period = q;
      truth.replica = r;
    }
  }

  void shadow_step(std::int64_t h, std::int64_t now) {
    const AttackerSpec& a = *cfg_.attacker;
    const std::int64_t offset = h - a.start_hour;
    if (offset == 0) {
      std::size_t honest = last_hsdir_count_;
      if (honest == 0) honest = cfg_.honest_relays;
      ShadowPlan plan = shadow_takeover_plan(
          a.ip_count, a.relays_per_ip, 24, honest, cfg_.max_relays_per_ip,
          (cfg_.hsdir_uptime_requirement + kSecondsPerHour - 1) / kSecondsPerHour);
      out_.ground_truth.setup_period =
          time_period(now + plan.steps.front().hour * kSecondsPerHour, a.target.id());
      for (int ip = 0; ip < a.ip_count; ++ip) {
        for (int slot = 0; slot < a.relays_per_ip; ++slot) {
          const std::uint64_t bw =
              1000 + 1000 * static_cast<std::uint64_t>(a.relays_per_ip - slot);
          std::size_t idx = launch(
              kAttackerNet + static_cast<std::uint32_t>(ip) + 1,
              static_cast<std::uint16_t>(kHonestPort + slot),
              std::string(kAttackerStem) + std::to_string(ip * a.relays_per_ip + slot),
              bw, fresh_fingerprint(), now, AttackerRole::Shadow);
          shadow_procs_.push_back(idx);
        }
      }
      out_.ground_truth.shadow_plan = std::move(plan);
      return;
    }
    for (const auto& step : out_.ground_truth.shadow_plan->steps) {
      if (step.hour != offset) continue;
      for (int i : step.deactivate) {
        stop(procs_[shadow_procs_[static_cast<std::size_t>(i)]], now);
      }
    }
  }

  // Consensus and uploads -------------------------------------------------------

  ConsensusSnapshot build_snapshot(std::int64_t now) {
    std::vector<SimRelay> running;
    for (const auto& p : procs_) {
      if (p.online) running.push_back(p.relay);
    }
    ConsensusSnapshot s;
    s.valid_after = now;
    s.relays = assign_flags(running, now, rules_);
    return s;
  }

  void record_uploads(std::int64_t h, std::int64_t now) {
    if (ring_.size() < kResponsiblePerReplica) return;
    for (const auto& hs : cfg_.hidden_services) {
      if (h < hs.publish_offset_hours) continue;
      const ServiceId& id = hs.onion.id();
      std::int64_t p = time_period(now, id);
      if (period_start(p, id) != now) ++p;
      const std::int64_t upload = period_start(p, id);
      if (upload < now || upload >= now + kSecondsPerHour) continue;
      for (int r = 0; r < kReplicas; ++r) {
        ResponsibleRecord rec;
        rec.onion = hs.onion;
        rec.period = p;
        rec.upload_time = upload;
        rec.replica = r;
        rec.desc_id = descriptor_id(id, p, r);
        rec.hsdirs = responsible_hsdirs(rec.desc_id, ring_);
        for (const auto& fp : rec.hsdirs) rec.attacker_slots += attacker_fps_.count(fp);
        out_.ground_truth.responsible.push_back(std::move(rec));
      }
    }
  }

  // Clients ---------------------------------------------------------------------

  void client_step(std::int64_t now, const ConsensusSnapshot& snapshot) {
    std::vector<Fingerprint> guards;
    std::set<Fingerprint> attacker_guards;
    for (const auto& r : snapshot.relays) {
      if (!r.flags.has(RelayFlag::Guard)) continue;
      guards.push_back(r.fingerprint);
      if (attacker_fps_.count(r.fingerprint)) attacker_guards.insert(r.fingerprint);
    }
    std::sort(guards.begin(), guards.end());

    const RequestModel& model = cfg_.request_model;
    const std::int64_t hour = now / kSecondsPerHour;
    const bool have_ring = ring_.size() >= kResponsiblePerReplica;
    std::map<std::pair<std::size_t, int>, std::array<Fingerprint, 3>> lookups;
    boost::random::uniform_int_distribution<int> pick3(0, 2);
    boost::random::uniform_int_distribution<int> pick_replica(0, kReplicas - 1);

    for (std::size_t c = 0; c < clients_->size(); ++c) {
      clients_->refresh(c, now, guards);
      std::uint64_t n = 0;
      if (model.requests_per_client_hour > 0) {
        n = boost::random::poisson_distribution<std::uint64_t, double>(
            model.requests_per_client_hour)(rng_);
      }
      std::map<std::pair<DescriptorId, std::optional<Fingerprint>>,
               std::pair<std::uint32_t, bool>>
          rows;
      for (std::uint64_t i = 0; i < n; ++i) {
        std::optional<Fingerprint> guard = clients_->pick_guard(c, guards);
        const bool nonexistent =
            cfg_.hidden_services.empty() || bernoulli(rng_, model.nonexistent_fraction);
        DescriptorId desc;
        if (nonexistent) {
          desc = DescriptorId(random_fingerprint(rng_).bytes());
          ++nonexistent_;
        } else {
          std::size_t s = service_pick_(rng_);
          int r = pick_replica(rng_);
          const ServiceId& id = cfg_.hidden_services[s].onion.id();
          desc = descriptor_id(id, time_period(now, id), r);
          ++existing_;
          if (have_ring) {
            auto key = std::make_pair(s, r);
            auto it = lookups.find(key);
            if (it == lookups.end()) {
              it = lookups.emplace(key, responsible_hsdirs(desc, ring_)).first;
            }
            const Fingerprint& hsdir = it->second[static_cast<std::size_t>(pick3(rng_))];
            if (guard && attacker_fps_.count(hsdir) && attacker_guards.count(*guard)) {
              out_.deanon_events.push_back({hour, static_cast<std::uint32_t>(c),
                                            clients_->ip_surrogate(c),
                                            clients_->region(c)});
            }
          }
        }
        auto& row = rows[{desc, guard}];
        ++row.first;
        row.second = !nonexistent;
      }
      for (const auto& [key, value] : rows) {
        out_.requests.push_back({hour, key.first, value.first,
                                 static_cast<std::uint32_t>(c), key.second,
                                 value.second});
      }
    }
  }

  const SimConfig& cfg_;
  Rng rng_;
  FlagRules rules_;
  SimOutput out_;
  std::vector<Process> procs_;
  std::set<Fingerprint> used_;
  std::set<Fingerprint> attacker_fps_;
  std::vector<std::size_t> shadow_procs_;
  HsDirRing ring_;
  std::size_t last_hsdir_count_ = 0;
  std::int64_t next_period_ = 0;
  std::optional<ClientPool> clients_;
  boost::random::discrete_distribution<std::size_t, double> service_pick_;
  std::uint64_t existing_ = 0;
  std::uint64_t nonexistent_ = 0;
};

}  // namespace

SimOutput run_simulation(const SimConfig& config) {
  config.validate();
  return Simulation(config).run();
}

}  // namespace hsdir
