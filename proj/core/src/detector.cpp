#include "hsdir/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "hsdir/error.hpp"
#include "hsdir/timeutil.hpp"

namespace hsdir {

namespace {

Severity max_of(Severity a, Severity b) { return a < b ? b : a; }

struct Run {
  std::size_t length = 0;
  std::int64_t first = 0;
  std::int64_t last = 0;
};

Run longest_run(const std::set<std::int64_t>& periods) {
  Run best;
  Run cur;
  for (std::int64_t p : periods) {
    if (cur.length > 0 && p == cur.last + 1) {
      ++cur.length;
      cur.last = p;
    } else {
      cur = {1, p, p};
    }
    if (cur.length > best.length) best = cur;
  }
  return best;
}

}  // namespace

std::string_view to_string(RuleId rule) noexcept {
  switch (rule) {
    case RuleId::Frequency: return "FREQUENCY";
    case RuleId::Preposition: return "PREPOSITION";
    case RuleId::DistanceRatio: return "DISTANCE_RATIO";
    case RuleId::SwitchCount: return "SWITCH_COUNT";
    case RuleId::Consecutive: return "CONSECUTIVE";
  }
  return "UNKNOWN";
}

std::string_view to_string(Severity severity) noexcept {
  switch (severity) {
    case Severity::Note: return "NOTE";
    case Severity::Suspicious: return "SUSPICIOUS";
    case Severity::Alarm: return "ALARM";
  }
  return "UNKNOWN";
}

void DetectorConfig::validate() const {
  std::vector<std::string> bad;
  if (!(z_threshold > 0)) bad.push_back("z_threshold");
  if (ratio_warn <= 0) bad.push_back("ratio_warn");
  if (ratio_alarm <= 0) bad.push_back("ratio_alarm");
  if (preposition_min_occurrences <= 0) bad.push_back("preposition_min_occurrences");
  if (change_lookback <= 0) bad.push_back("change_lookback");
  if (fresh_window_lo <= 0 || fresh_window_hi <= fresh_window_lo) {
    bad.push_back("fresh_window");
  }
  if (switch_count_threshold <= 0) bad.push_back("switch_count_threshold");
  if (switch_window <= 0) bad.push_back("switch_window");
  if (consecutive_min_run <= 0) bad.push_back("consecutive_min_run");
  if (!bad.empty()) {
    std::string msg = "invalid detector config:";
    for (const auto& b : bad) msg += " " + b;
    throw Error(ErrorKind::ValidationError, msg);
  }
}

// Timeline ----------------------------------------------------------------------

ResponsibilityTimeline responsibility_timeline(const ConsensusArchive& archive,
                                               const OnionAddress& onion,
                                               TimeRange range) {
  ResponsibilityTimeline timeline;
  timeline.onion = onion;
  timeline.range = range;
  if (archive.empty()) throw Error(ErrorKind::NoData, "archive is empty");
  if (range.empty()) return timeline;

  const ServiceId& id = onion.id();
  const std::int64_t covered_from = std::max(range.from, archive.first_time());
  const std::int64_t covered_to =
      std::min(range.to, archive.last_time() + kSecondsPerHour);

  std::int64_t period = time_period(covered_from, id);
  if (period_start(period, id) < covered_from) ++period;
  for (; period_start(period, id) < covered_to; ++period) {
    const std::int64_t upload = period_start(period, id);
    const ConsensusSnapshot& snapshot = archive.snapshot_at(upload);
    HsDirRing ring = snapshot.hsdir_ring();

    TimelineEntry entry;
    entry.period = period;
    entry.upload_time = upload;
    entry.snapshot_time = snapshot.valid_after;
    entry.ring_size = ring.size();
    entry.degenerate = ring.size() < kResponsiblePerReplica;
    if (!ring.empty()) entry.avg_distance = avg_consecutive_distance(ring);

    for (int r = 0; r < kReplicas; ++r) {
      ReplicaEntry& rep = entry.replicas[static_cast<std::size_t>(r)];
      rep.replica = r;
      rep.desc_id = descriptor_id(id, period, r);
    }
    for (auto& rep : entry.replicas) {
      if (entry.degenerate) break;
      try {
        for (const Fingerprint& fp : responsible_hsdirs(rep.desc_id, ring)) {
          const RelayEntry* relay = snapshot.find(fp);
          rep.slots.push_back({fp, ring_distance(rep.desc_id, fp),
                               relay->identity(), relay->nickname});
        }
      } catch (const Error& e) {
        // A three-member ring with one member on the descriptor id.
        if (e.kind() != ErrorKind::InsufficientRing) throw;
        entry.degenerate = true;
      }
    }
    if (entry.degenerate) {
      for (auto& rep : entry.replicas) rep.slots.clear();
    }
    timeline.entries.push_back(std::move(entry));
  }
  return timeline;
}

// Rule 1: frequency ---------------------------------------------------------------

FrequencyStats frequency_threshold(std::span<const std::size_t> ring_sizes,
                                   double z) {
  FrequencyStats s;
  double variance = 0;
  double ring_total = 0;
  for (std::size_t n : ring_sizes) {
    if (n == 0) continue;
    double p = std::min(1.0, 6.0 / static_cast<double>(n));
    s.mu += p;
    variance += p * (1 - p);
    ring_total += static_cast<double>(n);
    ++s.periods;
  }
  s.sigma = std::sqrt(variance);
  s.mean_ring_size = s.periods ? ring_total / static_cast<double>(s.periods) : 0;
  s.threshold = std::isinf(z) ? std::numeric_limits<double>::infinity()
                              : s.mu + z * s.sigma;
  return s;
}

std::vector<RuleFinding> rule_frequency(const ResponsibilityTimeline& timeline,
                                        const DetectorConfig& config) {
  std::vector<std::size_t> ring_sizes;
  struct Tally {
    std::size_t count = 0;
    Identity identity;
  };
  std::map<Fingerprint, Tally> tallies;
  for (const auto& e : timeline.entries) {
    if (e.degenerate) continue;
    ring_sizes.push_back(e.ring_size);
    std::set<Fingerprint> seen;
    for (const auto& rep : e.replicas) {
      for (const auto& slot : rep.slots) {
        if (seen.insert(slot.fingerprint).second) {
          auto& t = tallies[slot.fingerprint];
          ++t.count;
          t.identity = slot.identity;
        }
      }
    }
  }
  std::vector<RuleFinding> out;
  if (ring_sizes.empty()) return out;
  FrequencyStats stats = frequency_threshold(ring_sizes, config.z_threshold);
  for (const auto& [fp, t] : tallies) {
    if (static_cast<double>(t.count) > stats.threshold) {
      out.push_back({RuleId::Frequency,
                     Subject{fp, t.identity, std::nullopt},
                     Severity::Suspicious,
                     FrequencyEvidence{t.count, stats.periods, stats.mean_ring_size,
                                       stats.mu, stats.sigma, stats.threshold},
                     0});
    }
  }
  return out;
}

// Rule 2: prepositioning ----------------------------------------------------------

std::vector<RuleFinding> rule_preposition(
    const ResponsibilityTimeline& timeline,
    std::span<const FingerprintChangeEvent> changes,
    const ConsensusArchive& archive, const DetectorConfig& config) {
  struct FirstDuty {
    std::int64_t period = 0;
    std::int64_t at = 0;
    Identity identity;
  };
  std::map<Fingerprint, FirstDuty> first_duty;
  for (const auto& e : timeline.entries) {
    for (const auto& rep : e.replicas) {
      for (const auto& slot : rep.slots) {
        first_duty.try_emplace(slot.fingerprint,
                               FirstDuty{e.period, e.upload_time, slot.identity});
      }
    }
  }
  if (first_duty.empty()) return {};

  std::map<Fingerprint, std::vector<const FingerprintChangeEvent*>> created_by;
  for (const auto& ev : changes) created_by[ev.new_fp].push_back(&ev);
  auto first_seen = first_seen_index(archive);

  std::map<Identity, std::map<Fingerprint, std::vector<PrepositionOccurrence>>>
      per_identity;
  for (const auto& [fp, duty] : first_duty) {
    if (auto it = created_by.find(fp); it != created_by.end()) {
      for (const FingerprintChangeEvent* ev : it->second) {
        if (ev->at <= duty.at && duty.at - ev->at <= config.change_lookback) {
          per_identity[ev->identity][fp].push_back(
              {PrepositionKind::KeyChange, fp, duty.period, duty.at, ev->at});
          break;
        }
      }
    }
    if (auto it = first_seen.find(fp); it != first_seen.end()) {
      std::int64_t age = duty.at - it->second;
      if (age >= config.fresh_window_lo && age <= config.fresh_window_hi) {
        per_identity[duty.identity][fp].push_back(
            {PrepositionKind::FreshRelay, fp, duty.period, duty.at, it->second});
      }
    }
  }

  std::vector<RuleFinding> out;
  for (auto& [identity, by_fp] : per_identity) {
    PrepositionEvidence ev;
    ev.occurrences = by_fp.size();
    for (auto& [fp, occ] : by_fp) {
      ev.details.insert(ev.details.end(), occ.begin(), occ.end());
    }
    std::sort(ev.details.begin(), ev.details.end(),
              [](const auto& a, const auto& b) {
                return std::tie(a.responsible_at, a.kind, a.fingerprint) <
                       std::tie(b.responsible_at, b.kind, b.fingerprint);
              });
    Severity sev = ev.occurrences >= static_cast<std::size_t>(
                                         config.preposition_min_occurrences)
                       ? Severity::Suspicious
                       : Severity::Note;
    std::optional<Fingerprint> fp;
    if (by_fp.size() == 1) fp = by_fp.begin()->first;
    out.push_back({RuleId::Preposition, Subject{fp, identity, std::nullopt}, sev,
                   std::move(ev), 0});
  }
  return out;
}

// Rule 3: distance ratio ----------------------------------------------------------

std::optional<Distance> distance_ratio(const Distance& avg,
                                       const Distance& distance) {
  if (distance == 0) return std::nullopt;
  return Distance(avg / distance);
}

std::vector<RuleFinding> rule_distance_ratio(
    const ResponsibilityTimeline& timeline, const DetectorConfig& config) {
  std::vector<RuleFinding> out;
  const Distance warn(config.ratio_warn);
  const Distance alarm(config.ratio_alarm);
  for (const auto& e : timeline.entries) {
    if (e.degenerate) continue;
    for (const auto& rep : e.replicas) {
      for (std::size_t i = 0; i < rep.slots.size(); ++i) {
        const auto& slot = rep.slots[i];
        auto ratio = distance_ratio(e.avg_distance, slot.distance);
        Severity sev;
        if (!ratio || *ratio > alarm) {
          sev = Severity::Alarm;
        } else if (*ratio > warn) {
          sev = Severity::Note;
        } else {
          continue;
        }
        out.push_back({RuleId::DistanceRatio,
                       Subject{slot.fingerprint, slot.identity, std::nullopt}, sev,
                       DistanceRatioEvidence{e.period, rep.replica, i, rep.desc_id,
                                             slot.distance, e.avg_distance,
                                             std::move(ratio)},
                       0});
      }
    }
  }
  return out;
}

// Rule 4: switch count ------------------------------------------------------------

std::vector<RuleFinding> rule_switch_count(
    std::span<const FingerprintChangeEvent> changes,
    const DetectorConfig& config) {
  std::map<Identity, std::vector<std::int64_t>> times;
  for (const auto& ev : changes) times[ev.identity].push_back(ev.at);

  std::vector<RuleFinding> out;
  for (auto& [identity, ts] : times) {
    std::sort(ts.begin(), ts.end());
    std::size_t best = 0;
    std::size_t best_start = 0;
    std::size_t hi = 0;
    for (std::size_t lo = 0; lo < ts.size(); ++lo) {
      if (hi < lo) hi = lo;
      while (hi + 1 < ts.size() && ts[hi + 1] - ts[lo] < config.switch_window) ++hi;
      if (hi - lo + 1 > best) {
        best = hi - lo + 1;
        best_start = lo;
      }
    }
    if (best >= static_cast<std::size_t>(config.switch_count_threshold)) {
      out.push_back({RuleId::SwitchCount, Subject{std::nullopt, identity, std::nullopt},
                     Severity::Suspicious,
                     SwitchCountEvidence{best, ts.size(), ts[best_start],
                                         ts[best_start + best - 1]},
                     0});
    }
  }
  return out;
}

// Rule 5: consecutive periods -----------------------------------------------------

std::vector<RuleFinding> rule_consecutive(const ResponsibilityTimeline& timeline,
                                          const DetectorConfig& config) {
  std::map<Fingerprint, std::set<std::int64_t>> by_fp;
  std::map<Fingerprint, Identity> fp_identity;
  std::map<Identity, std::set<std::int64_t>> by_identity;
  std::map<Identity, std::set<Fingerprint>> identity_fps;
  std::map<std::uint32_t, std::set<std::int64_t>> by_host;
  std::map<std::uint32_t, std::map<std::int64_t, std::set<Identity>>> host_members;

  for (const auto& e : timeline.entries) {
    for (const auto& rep : e.replicas) {
      for (const auto& slot : rep.slots) {
        by_fp[slot.fingerprint].insert(e.period);
        fp_identity[slot.fingerprint] = slot.identity;
        by_identity[slot.identity].insert(e.period);
        identity_fps[slot.identity].insert(slot.fingerprint);
        by_host[slot.identity.ip].insert(e.period);
        host_members[slot.identity.ip][e.period].insert(slot.identity);
      }
    }
  }

  auto severity_for = [&](std::size_t run) {
    return run >= static_cast<std::size_t>(config.consecutive_min_run)
               ? Severity::Suspicious
               : Severity::Note;
  };

  std::vector<RuleFinding> out;
  std::map<Fingerprint, std::size_t> fp_best;
  for (const auto& [fp, periods] : by_fp) {
    Run run = longest_run(periods);
    fp_best[fp] = run.length;
    if (run.length < 2) continue;
    const Identity& id = fp_identity[fp];
    out.push_back({RuleId::Consecutive, Subject{fp, id, std::nullopt},
                   severity_for(run.length),
                   ConsecutiveEvidence{RunLevel::Fingerprint, run.length, run.first,
                                       run.last, {id}},
                   0});
  }

  std::map<Identity, std::size_t> identity_best;
  for (const auto& [id, periods] : by_identity) {
    Run run = longest_run(periods);
    identity_best[id] = run.length;
    std::size_t best_fp = 0;
    for (const auto& fp : identity_fps[id]) best_fp = std::max(best_fp, fp_best[fp]);
    if (run.length < 2 || run.length <= best_fp) continue;
    out.push_back({RuleId::Consecutive, Subject{std::nullopt, id, std::nullopt},
                   severity_for(run.length),
                   ConsecutiveEvidence{RunLevel::Identity, run.length, run.first,
                                       run.last, {id}},
                   0});
  }

  for (const auto& [host, periods] : by_host) {
    Run run = longest_run(periods);
    std::size_t best_id = 0;
    for (const auto& [p, ids] : host_members[host]) {
      for (const auto& id : ids) best_id = std::max(best_id, identity_best[id]);
    }
    if (run.length < 2 || run.length <= best_id) continue;
    std::set<Identity> members;
    for (std::int64_t p = run.first; p <= run.last; ++p) {
      const auto& ids = host_members[host][p];
      members.insert(ids.begin(), ids.end());
    }
    out.push_back({RuleId::Consecutive, Subject{std::nullopt, std::nullopt, host},
                   severity_for(run.length),
                   ConsecutiveEvidence{RunLevel::Host, run.length, run.first, run.last,
                                       {members.begin(), members.end()}},
                   0});
  }
  return out;
}

// Attribution -----------------------------------------------------------------------

std::vector<Identity> attributed_identities(const RuleFinding& finding) {
  if (finding.subject.identity) return {*finding.subject.identity};
  if (const auto* c = std::get_if<ConsecutiveEvidence>(&finding.evidence)) {
    return c->members;
  }
  return {};
}

bool SuspicionReport::has_alarm() const {
  return std::any_of(findings.begin(), findings.end(),
                     [](const auto& f) { return f.severity == Severity::Alarm; });
}

bool SuspicionReport::has_suspicious() const {
  return std::any_of(findings.begin(), findings.end(), [](const auto& f) {
    return f.severity == Severity::Suspicious;
  });
}

std::vector<Segment> split_calendar_years(TimeRange range) {
  std::vector<Segment> out;
  if (range.empty()) return out;
  std::int64_t from = range.from;
  while (from < range.to) {
    int y = year_of(from);
    std::int64_t next = std::min(range.to, year_start(y + 1));
    out.push_back({std::to_string(y), {from, next}, 0});
    from = next;
  }
  return out;
}

std::string longest_common_substring(std::string_view a, std::string_view b) {
  auto lower = [](char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  };
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  std::size_t best = 0;
  std::size_t best_end = 0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = lower(a[i - 1]) == lower(b[j - 1]) ? prev[j - 1] + 1 : 0;
      if (cur[j] > best) {
        best = cur[j];
        best_end = i;
      }
    }
    std::swap(prev, cur);
  }
  return std::string(a.substr(best_end - best, best));
}

// detect --------------------------------------------------------------------------

namespace {

std::vector<NicknameCluster> cluster_nicknames(const std::vector<RelayScore>& scores) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto linked = [&](const RelayScore& a, const RelayScore& b) {
    for (const auto& na : a.nicknames) {
      for (const auto& nb : b.nicknames) {
        if (longest_common_substring(na, nb).size() >= kNicknameClusterMinShared) {
          return true;
        }
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (linked(scores[i], scores[j])) parent[find(i)] = find(j);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);

  std::vector<NicknameCluster> out;
  for (auto& [root, members] : groups) {
    if (members.size() < 2) continue;
    NicknameCluster c;
    for (std::size_t m : members) c.members.push_back(scores[m].identity);
    std::sort(c.members.begin(), c.members.end());
    // Longest substring of the first nickname present in every member.
    const std::string& base = scores[members.front()].nicknames.front();
    for (std::size_t len = base.size(); len >= kNicknameClusterMinShared && c.shared.empty();
         --len) {
      for (std::size_t start = 0; start + len <= base.size(); ++start) {
        std::string_view cand(base.data() + start, len);
        bool everywhere = std::all_of(members.begin(), members.end(), [&](std::size_t m) {
          return std::any_of(scores[m].nicknames.begin(), scores[m].nicknames.end(),
                             [&](const std::string& nick) {
                               return longest_common_substring(cand, nick).size() == len;
                             });
        });
        if (everywhere) {
          c.shared = std::string(cand);
          break;
        }
      }
    }
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.members < b.members; });
  return out;
}

}  // namespace

SuspicionReport detect(const ConsensusArchive& archive, const OnionAddress& onion,
                       TimeRange range, const DetectorConfig& config) {
  config.validate();
  SuspicionReport report;
  report.onion = onion;
  report.range = range;
  if (range.empty()) return report;

  ResponsibilityTimeline timeline = responsibility_timeline(archive, onion, range);
  std::vector<FingerprintChangeEvent> changes = fingerprint_changes(archive);
  report.segments = split_calendar_years(range);
  report.periods = timeline.entries.size();

  // Nicknames and fingerprints seen per identity, for the score table.
  std::map<Identity, std::set<std::string>> nicknames;
  std::map<Identity, std::set<Fingerprint>> fingerprints;
  for (const auto& e : timeline.entries) {
    if (e.degenerate) ++report.degenerate_periods;
    for (const auto& rep : e.replicas) {
      for (const auto& slot : rep.slots) {
        nicknames[slot.identity].insert(slot.nickname);
        fingerprints[slot.identity].insert(slot.fingerprint);
      }
    }
  }

  for (std::size_t si = 0; si < report.segments.size(); ++si) {
    Segment& seg = report.segments[si];
    ResponsibilityTimeline part;
    part.onion = onion;
    part.range = seg.range;
    for (const auto& e : timeline.entries) {
      if (seg.range.contains(e.upload_time)) part.entries.push_back(e);
    }
    seg.periods = part.entries.size();

    std::vector<FingerprintChangeEvent> seg_changes;
    for (const auto& ev : changes) {
      if (seg.range.contains(ev.at)) seg_changes.push_back(ev);
    }

    std::vector<std::vector<RuleFinding>> batches;
    batches.push_back(rule_frequency(part, config));
    batches.push_back(rule_preposition(part, changes, archive, config));
    batches.push_back(rule_distance_ratio(part, config));
    batches.push_back(rule_switch_count(seg_changes, config));
    batches.push_back(rule_consecutive(part, config));
    for (auto& batch : batches) {
      for (auto& f : batch) {
        f.segment = si;
        report.findings.push_back(std::move(f));
      }
    }
  }

  for (const auto& ev : changes) {
    nicknames[ev.identity].insert(ev.nickname);
    fingerprints[ev.identity].insert(ev.old_fp);
    fingerprints[ev.identity].insert(ev.new_fp);
  }

  std::map<Identity, RelayScore> scores;
  for (const auto& f : report.findings) {
    for (const Identity& id : attributed_identities(f)) {
      RelayScore& s = scores[id];
      s.identity = id;
      if (std::find(s.rules.begin(), s.rules.end(), f.rule) == s.rules.end()) {
        s.rules.push_back(f.rule);
      }
      s.max_severity = s.findings == 0 ? f.severity : max_of(s.max_severity, f.severity);
      ++s.findings;
    }
  }
  for (auto& [id, s] : scores) {
    std::sort(s.rules.begin(), s.rules.end());
    s.score = s.rules.size();
    s.nicknames.assign(nicknames[id].begin(), nicknames[id].end());
    if (s.nicknames.empty()) s.nicknames.push_back("");
    s.fingerprints.assign(fingerprints[id].begin(), fingerprints[id].end());
    report.scores.push_back(s);
  }
  std::stable_sort(report.scores.begin(), report.scores.end(),
                   [](const RelayScore& a, const RelayScore& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.max_severity != b.max_severity) {
                       return a.max_severity > b.max_severity;
                     }
                     if (a.findings != b.findings) return a.findings > b.findings;
                     return a.identity < b.identity;
                   });

  std::map<Identity, std::size_t> score_of;
  for (const auto& s : report.scores) score_of[s.identity] = s.score;
  auto finding_score = [&](const RuleFinding& f) {
    std::size_t best = 0;
    for (const auto& id : attributed_identities(f)) best = std::max(best, score_of[id]);
    return best;
  };
  std::stable_sort(report.findings.begin(), report.findings.end(),
                   [&](const RuleFinding& a, const RuleFinding& b) {
                     if (a.severity != b.severity) return a.severity > b.severity;
                     return finding_score(a) > finding_score(b);
                   });

  report.clusters = cluster_nicknames(report.scores);
  return report;
}

}  // namespace hsdir
