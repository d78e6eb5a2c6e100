#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <boost/random/mersenne_twister.hpp>
#include <json.hpp>

#include "archive_builder.hpp"
#include "hsdir/detector.hpp"
#include "hsdir/error.hpp"
#include "hsdir/timeutil.hpp"

using namespace hsdir;
using namespace testing_util;

namespace {

constexpr std::int64_t kDay = kSecondsPerDay;
constexpr std::int64_t kH = kSecondsPerHour;
constexpr std::int64_t kT0 = 1356998400;          // 2013-01-01
constexpr std::int64_t kPeriod0 = kT0 / kDay;     // 15706

// All-zero identity: period p starts at p * 86400 exactly.
const OnionAddress kOnion{ServiceId{}};

Identity ident(const char* ip, std::uint16_t port = 9001) {
  return {parse_ipv4(ip), port};
}

ResponsibleSlot slot(const Fingerprint& fp, const Identity& id, Distance distance = 1) {
  return {fp, std::move(distance), id, "n"};
}

/// Timeline entry whose replica 0 lists `slots` (at most three used).
TimelineEntry entry(std::int64_t period, std::vector<ResponsibleSlot> slots,
                    std::size_t ring_size = 100) {
  TimelineEntry e;
  e.period = period;
  e.upload_time = period * kDay;
  e.snapshot_time = e.upload_time;
  e.ring_size = ring_size;
  e.avg_distance = keyspace_size() / ring_size;
  e.replicas[0].replica = 0;
  e.replicas[0].slots = std::move(slots);
  e.replicas[1].replica = 1;
  return e;
}

ResponsibilityTimeline timeline_of(std::vector<TimelineEntry> entries) {
  ResponsibilityTimeline t;
  t.onion = kOnion;
  t.entries = std::move(entries);
  return t;
}

std::vector<RuleFinding> of_level(const std::vector<RuleFinding>& fs, RunLevel level) {
  std::vector<RuleFinding> out;
  for (const auto& f : fs) {
    if (std::get<ConsecutiveEvidence>(f.evidence).level == level) out.push_back(f);
  }
  return out;
}

Digest random_digest(boost::random::mt19937_64& rng) {
  Digest d{};
  for (auto& b : d) b = static_cast<std::uint8_t>(rng());
  return d;
}

std::string random_nick(boost::random::mt19937_64& rng) {
  std::string s;
  for (int i = 0; i < 10; ++i) s.push_back(static_cast<char>('a' + rng() % 26));
  return s;
}

}  // namespace

// Config --------------------------------------------------------------------------

TEST(DetectorConfig, DefaultsAreValid) {
  DetectorConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.ratio_warn, 100);
  EXPECT_EQ(c.ratio_alarm, 10000);
}

TEST(DetectorConfig, ValidateNamesEveryBadField) {
  DetectorConfig c;
  c.z_threshold = 0;
  c.fresh_window_hi = c.fresh_window_lo;
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ValidationError);
    std::string msg = e.what();
    EXPECT_NE(msg.find("z_threshold"), std::string::npos);
    EXPECT_NE(msg.find("fresh_window"), std::string::npos);
  }
}

TEST(DetectorConfig, LoadsTomlAndJson) {
  auto dir = std::filesystem::temp_directory_path() / "hsdir_detector_config";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "d.toml") << "[detector]\nz_threshold = 4.5\nratio_alarm = 5000\n"
                                     "fresh_window = [3600, 7200]\n";
  }
  DetectorConfig t = load_detector_config((dir / "d.toml").string());
  EXPECT_DOUBLE_EQ(t.z_threshold, 4.5);
  EXPECT_EQ(t.ratio_alarm, 5000);
  EXPECT_EQ(t.fresh_window_lo, 3600);
  EXPECT_EQ(t.fresh_window_hi, 7200);
  EXPECT_EQ(t.ratio_warn, 100);

  { std::ofstream(dir / "d.json") << R"({"switch_count_threshold": 5})"; }
  EXPECT_EQ(load_detector_config((dir / "d.json").string()).switch_count_threshold, 5);

  { std::ofstream(dir / "bad.json") << R"({"ratio_alarms": 5})"; }
  try {
    load_detector_config((dir / "bad.json").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ValidationError);
    EXPECT_NE(std::string(e.what()).find("ratio_alarms"), std::string::npos);
  }
  try {
    load_detector_config((dir / "missing.json").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IoError);
  }
}

// Timeline ------------------------------------------------------------------------

TEST(Timeline, OneEntryPerPeriodWithBruteForceSlots) {
  boost::random::mt19937_64 rng(31);
  std::vector<RelayEntry> relays;
  for (int i = 0; i < 12; ++i) {
    relays.push_back(relay(Fingerprint(random_digest(rng)), random_nick(rng),
                           "10.0.0." + std::to_string(i + 1)));
  }
  auto archive = steady_archive(kT0, 24 * 5, relays);
  TimeRange range{kT0 + kDay, kT0 + 4 * kDay};
  auto t = responsibility_timeline(archive, kOnion, range);
  ASSERT_EQ(t.entries.size(), 3u);
  HsDirRing ring = archive.snapshots().front().hsdir_ring();
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& e = t.entries[i];
    EXPECT_EQ(e.period, kPeriod0 + 1 + static_cast<std::int64_t>(i));
    EXPECT_EQ(e.upload_time, e.period * kDay);
    EXPECT_EQ(e.ring_size, 12u);
    EXPECT_FALSE(e.degenerate);
    for (int r = 0; r < kReplicas; ++r) {
      const auto& rep = e.replicas[static_cast<std::size_t>(r)];
      EXPECT_EQ(rep.desc_id, descriptor_id(ServiceId{}, e.period, r));
      auto want = responsible_hsdirs(rep.desc_id, ring);
      ASSERT_EQ(rep.slots.size(), 3u);
      for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(rep.slots[k].fingerprint, want[k]);
        EXPECT_EQ(rep.slots[k].distance, ring_distance(rep.desc_id, want[k]));
      }
    }
  }
}

TEST(Timeline, ClippedToArchiveCoverage) {
  auto archive = steady_archive(kT0 + kDay + 5 * kH, 24,
                                {relay(fp_bytes(1), "a", "10.0.0.1"),
                                 relay(fp_bytes(2), "b", "10.0.0.2"),
                                 relay(fp_bytes(3), "c", "10.0.0.3")});
  // Archive covers [day1 05:00, day2 05:00); only the day-2 upload falls inside.
  auto t = responsibility_timeline(archive, kOnion, {kT0, kT0 + 10 * kDay});
  ASSERT_EQ(t.entries.size(), 1u);
  EXPECT_EQ(t.entries[0].period, kPeriod0 + 2);
}

TEST(Timeline, SmallRingIsDegenerate) {
  auto archive = steady_archive(kT0, 30, {relay(fp_bytes(1), "a", "10.0.0.1"),
                                          relay(fp_bytes(2), "b", "10.0.0.2")});
  auto t = responsibility_timeline(archive, kOnion, {kT0, kT0 + kDay + 1});
  ASSERT_EQ(t.entries.size(), 2u);
  EXPECT_TRUE(t.entries[0].degenerate);
  EXPECT_TRUE(t.entries[0].replicas[0].slots.empty());
}

TEST(Timeline, ThreeMemberRingWithMemberOnDescriptorIdIsDegenerate) {
  const std::int64_t period = kPeriod0 + 1;
  Fingerprint on_id(descriptor_id(ServiceId{}, period, 0).bytes());
  auto archive = steady_archive(kT0, 48, {relay(on_id, "a", "10.0.0.1"),
                                          relay(fp_bytes(2), "b", "10.0.0.2"),
                                          relay(fp_bytes(3), "c", "10.0.0.3")});
  auto t = responsibility_timeline(archive, kOnion, {period * kDay, (period + 1) * kDay});
  ASSERT_EQ(t.entries.size(), 1u);
  EXPECT_TRUE(t.entries[0].degenerate);
  EXPECT_TRUE(t.entries[0].replicas[0].slots.empty());
  EXPECT_TRUE(t.entries[0].replicas[1].slots.empty());
}

TEST(Timeline, EmptyArchiveHasNoData) {
  try {
    responsibility_timeline(ConsensusArchive{}, kOnion, {kT0, kT0 + kDay});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoData);
  }
}

// Frequency -----------------------------------------------------------------------

TEST(FrequencyThreshold, ConstantRingReducesToBinomial) {
  std::vector<std::size_t> sizes(334, 757);
  FrequencyStats s = frequency_threshold(sizes, 3.0);
  const double p = 6.0 / 757.0;
  EXPECT_NEAR(s.mu, 334 * p, 1e-9);
  EXPECT_NEAR(s.sigma, std::sqrt(334 * p * (1 - p)), 1e-9);
  EXPECT_NEAR(s.threshold, 7.509, 0.001);
  EXPECT_EQ(s.periods, 334u);
  EXPECT_DOUBLE_EQ(s.mean_ring_size, 757.0);
}

TEST(FrequencyThreshold, VaryingRingSizes) {
  std::vector<std::size_t> sizes{6, 12, 0};
  FrequencyStats s = frequency_threshold(sizes, 2.0);
  EXPECT_EQ(s.periods, 2u);
  EXPECT_DOUBLE_EQ(s.mu, 1.5);
  EXPECT_DOUBLE_EQ(s.sigma, 0.5);
  EXPECT_DOUBLE_EQ(s.threshold, 2.5);
}

TEST(RuleFrequency, FlagsRelayAboveThresholdAndCountsPeriodsOnce) {
  Fingerprint hot = fp_bytes(0xAA);
  Identity hot_id = ident("10.0.0.1");
  std::vector<TimelineEntry> es;
  for (int p = 0; p < 20; ++p) {
    std::vector<ResponsibleSlot> slots{slot(fp_bytes(static_cast<std::uint8_t>(p + 1)),
                                            ident("10.0.1.1", static_cast<std::uint16_t>(p + 1)))};
    if (p % 2 == 0) slots.push_back(slot(hot, hot_id));
    auto e = entry(kPeriod0 + p, slots, 600);
    if (p % 2 == 0) e.replicas[1].slots.push_back(slot(hot, hot_id));  // same period again
    es.push_back(e);
  }
  auto fs = rule_frequency(timeline_of(es), DetectorConfig{});
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0].subject.fingerprint, hot);
  EXPECT_EQ(fs[0].severity, Severity::Suspicious);
  const auto& ev = std::get<FrequencyEvidence>(fs[0].evidence);
  EXPECT_EQ(ev.count, 10u);
  EXPECT_EQ(ev.periods, 20u);
  EXPECT_NEAR(ev.mu, 0.2, 1e-12);
}

// Distance ratio ------------------------------------------------------------------

TEST(DistanceRatio, FloorAndInfinity) {
  EXPECT_EQ(distance_ratio(1000, 3), Distance(333));
  EXPECT_EQ(distance_ratio(5, 10), Distance(0));
  EXPECT_FALSE(distance_ratio(5, 0).has_value());
}

TEST(RuleDistanceRatio, ThresholdsAreStrict) {
  // avg = 2^160 / 100; pick distances giving ratios exactly 100, 101, 10000, 10001.
  Distance avg = keyspace_size() / 100;
  auto dist_for = [&](std::int64_t ratio) { return Distance(avg / ratio); };
  std::vector<ResponsibleSlot> slots{slot(fp_bytes(1), ident("10.0.0.1"), dist_for(100)),
                                     slot(fp_bytes(2), ident("10.0.0.2"), dist_for(101)),
                                     slot(fp_bytes(3), ident("10.0.0.3"), dist_for(10000))};
  auto e1 = entry(kPeriod0, slots);
  auto e2 = entry(kPeriod0 + 1, {slot(fp_bytes(4), ident("10.0.0.4"), dist_for(10001)),
                                 slot(fp_bytes(5), ident("10.0.0.5"), 0)});
  auto fs = rule_distance_ratio(timeline_of({e1, e2}), DetectorConfig{});
  ASSERT_EQ(fs.size(), 4u);
  EXPECT_EQ(fs[0].subject.fingerprint, fp_bytes(2));
  EXPECT_EQ(fs[0].severity, Severity::Note);
  EXPECT_EQ(fs[1].subject.fingerprint, fp_bytes(3));
  EXPECT_EQ(fs[1].severity, Severity::Note);
  EXPECT_EQ(*std::get<DistanceRatioEvidence>(fs[1].evidence).ratio, Distance(10000));
  EXPECT_EQ(fs[2].subject.fingerprint, fp_bytes(4));
  EXPECT_EQ(fs[2].severity, Severity::Alarm);
  EXPECT_EQ(fs[3].severity, Severity::Alarm);
  EXPECT_FALSE(std::get<DistanceRatioEvidence>(fs[3].evidence).ratio.has_value());
  EXPECT_EQ(std::get<DistanceRatioEvidence>(fs[2].evidence).slot, 0u);
}

TEST(RuleDistanceRatio, DegenerateEntriesAreSkipped) {
  auto e = entry(kPeriod0, {slot(fp_bytes(1), ident("10.0.0.1"), 0)});
  e.degenerate = true;
  EXPECT_TRUE(rule_distance_ratio(timeline_of({e}), DetectorConfig{}).empty());
}

// Switch count --------------------------------------------------------------------

TEST(RuleSwitchCount, ThreeWithinThirtyDays) {
  Identity id = ident("10.0.0.7");
  auto ev = [&](std::int64_t at) {
    return FingerprintChangeEvent{id, "n", fp_bytes(1), fp_bytes(2), at};
  };
  std::vector<FingerprintChangeEvent> hit{ev(kT0), ev(kT0 + 10 * kDay), ev(kT0 + 29 * kDay)};
  auto fs = rule_switch_count(hit, DetectorConfig{});
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0].severity, Severity::Suspicious);
  EXPECT_EQ(fs[0].subject.identity, id);
  const auto& e = std::get<SwitchCountEvidence>(fs[0].evidence);
  EXPECT_EQ(e.switches_in_window, 3u);
  EXPECT_EQ(e.window_start, kT0);
  EXPECT_EQ(e.window_end, kT0 + 29 * kDay);

  // The window is half-open: a switch exactly 30 days later starts a new one.
  std::vector<FingerprintChangeEvent> miss{ev(kT0), ev(kT0 + 15 * kDay), ev(kT0 + 30 * kDay)};
  EXPECT_TRUE(rule_switch_count(miss, DetectorConfig{}).empty());
}

// Consecutive ---------------------------------------------------------------------

TEST(RuleConsecutive, FingerprintRuns) {
  Fingerprint a = fp_bytes(1);
  Fingerprint b = fp_bytes(2);
  Identity ia = ident("10.0.0.1");
  Identity ib = ident("10.0.0.2");
  std::vector<TimelineEntry> es{
      entry(kPeriod0, {slot(a, ia), slot(b, ib)}),
      entry(kPeriod0 + 1, {slot(a, ia), slot(b, ib)}),
      entry(kPeriod0 + 2, {slot(a, ia)}),
  };
  auto fs = rule_consecutive(timeline_of(es), DetectorConfig{});
  auto fp_level = of_level(fs, RunLevel::Fingerprint);
  ASSERT_EQ(fp_level.size(), 2u);
  EXPECT_EQ(fp_level[0].subject.fingerprint, a);
  EXPECT_EQ(fp_level[0].severity, Severity::Suspicious);
  EXPECT_EQ(std::get<ConsecutiveEvidence>(fp_level[0].evidence).run_length, 3u);
  EXPECT_EQ(fp_level[1].subject.fingerprint, b);
  EXPECT_EQ(fp_level[1].severity, Severity::Note);
  EXPECT_TRUE(of_level(fs, RunLevel::Identity).empty());
  EXPECT_TRUE(of_level(fs, RunLevel::Host).empty());
}

TEST(RuleConsecutive, IdentityRunAcrossKeyChange) {
  Identity id = ident("10.0.0.1");
  std::vector<TimelineEntry> es{
      entry(kPeriod0, {slot(fp_bytes(1), id)}),
      entry(kPeriod0 + 1, {slot(fp_bytes(1), id)}),
      entry(kPeriod0 + 2, {slot(fp_bytes(2), id)}),
      entry(kPeriod0 + 3, {slot(fp_bytes(2), id)}),
  };
  auto fs = rule_consecutive(timeline_of(es), DetectorConfig{});
  auto idl = of_level(fs, RunLevel::Identity);
  ASSERT_EQ(idl.size(), 1u);
  EXPECT_EQ(idl[0].subject.identity, id);
  EXPECT_FALSE(idl[0].subject.fingerprint.has_value());
  EXPECT_EQ(idl[0].severity, Severity::Suspicious);
  const auto& ev = std::get<ConsecutiveEvidence>(idl[0].evidence);
  EXPECT_EQ(ev.run_length, 4u);
  EXPECT_EQ(ev.first_period, kPeriod0);
  EXPECT_EQ(ev.last_period, kPeriod0 + 3);
  EXPECT_EQ(of_level(fs, RunLevel::Fingerprint).size(), 2u);
  EXPECT_TRUE(of_level(fs, RunLevel::Host).empty());
}

TEST(RuleConsecutive, HostRunAcrossPorts) {
  Identity p1 = ident("203.0.113.1", 9001);
  Identity p2 = ident("203.0.113.1", 9002);
  std::vector<TimelineEntry> es{
      entry(kPeriod0, {slot(fp_bytes(1), p1)}),
      entry(kPeriod0 + 1, {slot(fp_bytes(2), p2)}),
      entry(kPeriod0 + 2, {slot(fp_bytes(3), p1)}),
  };
  auto fs = rule_consecutive(timeline_of(es), DetectorConfig{});
  EXPECT_TRUE(of_level(fs, RunLevel::Fingerprint).empty());
  EXPECT_TRUE(of_level(fs, RunLevel::Identity).empty());
  auto host = of_level(fs, RunLevel::Host);
  ASSERT_EQ(host.size(), 1u);
  EXPECT_EQ(host[0].subject.host, parse_ipv4("203.0.113.1"));
  EXPECT_EQ(host[0].severity, Severity::Suspicious);
  const auto& ev = std::get<ConsecutiveEvidence>(host[0].evidence);
  EXPECT_EQ(ev.run_length, 3u);
  ASSERT_EQ(ev.members.size(), 2u);
  auto attributed = attributed_identities(host[0]);
  EXPECT_EQ(attributed, (std::vector<Identity>{p1, p2}));
}

// Preposition ---------------------------------------------------------------------

TEST(RulePreposition, KeyChangeAndFreshRelay) {
  // Day 0..6 hourly. Duty period is day 5 (upload 5 * 86400 after kT0).
  const std::int64_t duty_period = kPeriod0 + 5;
  const DescriptorId d0 = descriptor_id(ServiceId{}, duty_period, 0);
  const DescriptorId d1 = descriptor_id(ServiceId{}, duty_period, 1);
  const Fingerprint near0 = Fingerprint::from_integer(d0.to_integer() + 1);
  const Fingerprint near1 = Fingerprint::from_integer(d1.to_integer() + 1);
  const Fingerprint old_key = fp_bytes(0x11, 1);

  boost::random::mt19937_64 rng(5);
  std::vector<RelayEntry> honest;
  for (int i = 0; i < 10; ++i) {
    honest.push_back(relay(Fingerprint(random_digest(rng)), random_nick(rng),
                           "10.0.0." + std::to_string(i + 1)));
  }
  const std::int64_t upload = duty_period * kDay;
  std::vector<ConsensusSnapshot> snaps;
  for (std::int64_t t = kT0; t < kT0 + 7 * kDay; t += kH) {
    auto relays = honest;
    // A: same address, key switched two days before the upload.
    relays.push_back(relay(t < upload - 2 * kDay ? old_key : near0, "switcher",
                           "198.51.100.1"));
    // B: brand-new relay appearing 25 hours before the upload.
    if (t >= upload - 25 * kH) relays.push_back(relay(near1, "newcomer", "198.51.100.2"));
    snaps.push_back(snapshot(t, relays));
  }
  ConsensusArchive archive(std::move(snaps));
  auto changes = fingerprint_changes(archive);
  ASSERT_EQ(changes.size(), 1u);

  TimeRange range{upload, upload + kDay};
  auto t = responsibility_timeline(archive, kOnion, range);
  ASSERT_EQ(t.entries.size(), 1u);
  auto fs = rule_preposition(t, changes, archive, DetectorConfig{});

  const RuleFinding* switcher = nullptr;
  const RuleFinding* newcomer = nullptr;
  for (const auto& f : fs) {
    if (f.subject.identity == ident("198.51.100.1")) switcher = &f;
    if (f.subject.identity == ident("198.51.100.2")) newcomer = &f;
  }
  ASSERT_NE(switcher, nullptr);
  ASSERT_NE(newcomer, nullptr);
  EXPECT_EQ(switcher->severity, Severity::Note);
  const auto& se = std::get<PrepositionEvidence>(switcher->evidence);
  EXPECT_EQ(se.occurrences, 1u);
  ASSERT_EQ(se.details.size(), 1u);
  EXPECT_EQ(se.details[0].kind, PrepositionKind::KeyChange);
  EXPECT_EQ(se.details[0].observed_at, upload - 2 * kDay);
  const auto& ne = std::get<PrepositionEvidence>(newcomer->evidence);
  ASSERT_EQ(ne.details.size(), 1u);
  EXPECT_EQ(ne.details[0].kind, PrepositionKind::FreshRelay);
  EXPECT_EQ(ne.details[0].observed_at, upload - 25 * kH);
  EXPECT_EQ(newcomer->subject.fingerprint, near1);
}

TEST(RulePreposition, TwoFingerprintsOnOneIdentityAreSuspicious) {
  Identity id = ident("198.51.100.9");
  const Fingerprint k1 = fp_bytes(0x21);
  const Fingerprint k2 = fp_bytes(0x22);
  const Fingerprint k0 = fp_bytes(0x20);
  std::vector<FingerprintChangeEvent> changes{
      {id, "n", k0, k1, kT0 + 2 * kDay}, {id, "n", k1, k2, kT0 + 5 * kDay}};
  auto t = timeline_of({entry(kPeriod0 + 3, {slot(k1, id)}),
                        entry(kPeriod0 + 6, {slot(k2, id)})});
  // The archive only feeds first-seen times; none of these keys are in it.
  auto archive = steady_archive(kT0, 2, {relay(fp_bytes(0x90), "x", "10.9.9.9")});
  auto fs = rule_preposition(t, changes, archive, DetectorConfig{});
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0].severity, Severity::Suspicious);
  EXPECT_FALSE(fs[0].subject.fingerprint.has_value());
  EXPECT_EQ(std::get<PrepositionEvidence>(fs[0].evidence).occurrences, 2u);
}

TEST(RulePreposition, OldChangesAndOldRelaysAreIgnored) {
  Identity id = ident("198.51.100.9");
  std::vector<FingerprintChangeEvent> changes{{id, "n", fp_bytes(1), fp_bytes(2), kT0}};
  auto t = timeline_of({entry(kPeriod0 + 8, {slot(fp_bytes(2), id)})});
  auto archive = steady_archive(kT0, 2, {relay(fp_bytes(2), "x", "198.51.100.9")});
  EXPECT_TRUE(rule_preposition(t, changes, archive, DetectorConfig{}).empty());
}

// Helpers -------------------------------------------------------------------------

TEST(Segments, SplitAtNewYear) {
  std::int64_t from = parse_date("2012-12-30");
  std::int64_t to = parse_date("2014-01-02");
  auto segs = split_calendar_years({from, to});
  ASSERT_EQ(segs.size(), 3u);
  EXPECT_EQ(segs[0].label, "2012");
  EXPECT_EQ(segs[0].range.to, parse_date("2013-01-01"));
  EXPECT_EQ(segs[1].label, "2013");
  EXPECT_EQ(segs[2].label, "2014");
  EXPECT_EQ(segs[2].range.to, to);
  EXPECT_TRUE(split_calendar_years({to, from}).empty());
}

TEST(Nicknames, LongestCommonSubstringIgnoresCase) {
  EXPECT_EQ(longest_common_substring("SnowWatcher1", "xxsnowwatcherYY"), "SnowWatcher");
  EXPECT_EQ(longest_common_substring("abc", "xyz"), "");
  EXPECT_EQ(longest_common_substring("", "abc"), "");
}

// detect --------------------------------------------------------------------------

namespace {

struct PlantedArchive {
  ConsensusArchive archive;
  std::int64_t duty_period = 0;
  std::vector<Identity> attackers;
};

/// 30 honest relays for 8 days; two attacker relays on one address appear 26 h
/// before the upload of `duty_period` right after both descriptor ids.
PlantedArchive planted_archive() {
  PlantedArchive out;
  out.duty_period = kPeriod0 + 5;
  const std::int64_t upload = out.duty_period * kDay;
  boost::random::mt19937_64 rng(404);
  std::vector<RelayEntry> honest;
  for (int i = 0; i < 30; ++i) {
    honest.push_back(relay(Fingerprint(random_digest(rng)), random_nick(rng),
                           "10.0.0." + std::to_string(i + 1)));
  }
  std::vector<RelayEntry> attack;
  for (int r = 0; r < kReplicas; ++r) {
    DescriptorId d = descriptor_id(ServiceId{}, out.duty_period, r);
    attack.push_back(relay(Fingerprint::from_integer(d.to_integer() + 1 + r),
                           "nightwatch" + std::to_string(r), "203.0.113.5",
                           static_cast<std::uint16_t>(9001 + r)));
    out.attackers.push_back(attack.back().identity());
  }
  std::vector<ConsensusSnapshot> snaps;
  for (std::int64_t t = kT0; t < kT0 + 8 * kDay; t += kH) {
    auto relays = honest;
    if (t >= upload - 26 * kH && t < upload + kDay) {
      relays.insert(relays.end(), attack.begin(), attack.end());
    }
    snaps.push_back(snapshot(t, relays));
  }
  out.archive = ConsensusArchive(std::move(snaps));
  return out;
}

}  // namespace

TEST(Detect, PlantedRelaysScoreHighestAndCluster) {
  auto planted = planted_archive();
  TimeRange range{kT0 + kDay, kT0 + 8 * kDay};
  auto report = detect(planted.archive, kOnion, range, DetectorConfig{});
  EXPECT_EQ(report.periods, 7u);
  EXPECT_EQ(report.degenerate_periods, 0u);
  EXPECT_TRUE(report.has_alarm());
  ASSERT_GE(report.scores.size(), 2u);
  std::set<Identity> top{report.scores[0].identity, report.scores[1].identity};
  EXPECT_EQ(top, std::set<Identity>(planted.attackers.begin(), planted.attackers.end()));
  EXPECT_EQ(report.scores[0].max_severity, Severity::Alarm);
  // DISTANCE_RATIO and PREPOSITION (fresh relay) at least.
  EXPECT_GE(report.scores[0].score, 2u);
  EXPECT_EQ(report.findings.front().severity, Severity::Alarm);

  bool clustered = false;
  for (const auto& c : report.clusters) {
    if (c.members == planted.attackers) {
      clustered = true;
      EXPECT_EQ(c.shared, "nightwatch");
    }
  }
  EXPECT_TRUE(clustered);
  for (std::size_t i = 1; i < report.findings.size(); ++i) {
    EXPECT_GE(report.findings[i - 1].severity, report.findings[i].severity);
  }
}

TEST(Detect, YearBoundarySegmentsFindings) {
  auto planted = planted_archive();
  auto report = detect(planted.archive, kOnion, {kT0 - kDay, kT0 + 8 * kDay},
                       DetectorConfig{});
  ASSERT_EQ(report.segments.size(), 2u);
  EXPECT_EQ(report.segments[0].label, "2012");
  EXPECT_EQ(report.segments[0].periods, 0u);
  EXPECT_EQ(report.segments[1].periods, report.periods);
  for (const auto& f : report.findings) EXPECT_EQ(f.segment, 1u);
}

TEST(Detect, InvalidConfigIsRejected) {
  auto planted = planted_archive();
  DetectorConfig bad;
  bad.ratio_alarm = 0;
  EXPECT_THROW(detect(planted.archive, kOnion, {kT0, kT0 + kDay}, bad), Error);
}

TEST(Report, JsonShape) {
  auto planted = planted_archive();
  auto report = detect(planted.archive, kOnion, {kT0 + kDay, kT0 + 8 * kDay},
                       DetectorConfig{});
  auto j = nlohmann::json::parse(report_to_json(report));
  EXPECT_EQ(j["onion"], kOnion.text());
  EXPECT_EQ(j["periods"], 7);
  EXPECT_EQ(j["has_alarm"], true);
  ASSERT_TRUE(j["findings"].is_array());
  const auto& first = j["findings"][0];
  EXPECT_EQ(first["rule"], "DISTANCE_RATIO");
  EXPECT_EQ(first["severity"], "ALARM");
  EXPECT_TRUE(first["evidence"]["ratio"].is_string());
  EXPECT_TRUE(j["scores"][0].contains("nicknames"));
  EXPECT_TRUE(j["nickname_clusters"].is_array());

  std::string text = report_to_text(report);
  EXPECT_NE(text.find("ALARM"), std::string::npos);
  EXPECT_NE(text.find("nightwatch"), std::string::npos);
}
