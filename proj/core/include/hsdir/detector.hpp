#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hsdir/consensus.hpp"
#include "hsdir/hs_protocol.hpp"

namespace hsdir {

/// Half-open interval of unix seconds, [from, to).
struct TimeRange {
  std::int64_t from = 0;
  std::int64_t to = 0;

  bool empty() const noexcept { return to <= from; }
  bool contains(std::int64_t t) const noexcept { return t >= from && t < to; }
  friend auto operator<=>(const TimeRange&, const TimeRange&) = default;
};

/// Thresholds for the tracking rules. Every field can be overridden from a
/// config file.
struct DetectorConfig {
  double z_threshold = 3.0;
  std::int64_t ratio_warn = 100;
  std::int64_t ratio_alarm = 10000;
  int preposition_min_occurrences = 2;
  std::int64_t change_lookback = 7 * kSecondsPerDay;
  std::int64_t fresh_window_lo = 23 * kSecondsPerHour;
  std::int64_t fresh_window_hi = 27 * kSecondsPerHour;
  int switch_count_threshold = 3;
  std::int64_t switch_window = 30 * kSecondsPerDay;
  int consecutive_min_run = 3;

  /// Throws ValidationError naming every bad field.
  void validate() const;
};

/// Reads thresholds from a JSON or TOML file (".toml" selects TOML).
/// Unspecified keys keep their defaults; keys may sit at top level or under
/// a "detector" table. Durations are in seconds, fresh_window is [lo, hi].
DetectorConfig load_detector_config(const std::string& path);

// Timeline ----------------------------------------------------------------------

struct ResponsibleSlot {
  Fingerprint fingerprint;
  Distance distance;
  Identity identity;
  std::string nickname;
};

struct ReplicaEntry {
  int replica = 0;
  DescriptorId desc_id;
  /// Empty when the period is degenerate.
  std::vector<ResponsibleSlot> slots;
};

struct TimelineEntry {
  std::int64_t period = 0;
  std::int64_t upload_time = 0;
  std::int64_t snapshot_time = 0;
  std::size_t ring_size = 0;
  Distance avg_distance;
  /// Fewer than three HSDirs follow a descriptor id at upload time.
  bool degenerate = false;
  std::array<ReplicaEntry, kReplicas> replicas;
};

struct ResponsibilityTimeline {
  OnionAddress onion;
  TimeRange range;
  std::vector<TimelineEntry> entries;
};

/// One entry per period whose upload time lies in `range` and inside the
/// archive's coverage. Throws NoData for an empty archive.
ResponsibilityTimeline responsibility_timeline(const ConsensusArchive& archive,
                                               const OnionAddress& onion,
                                               TimeRange range);

// Findings ----------------------------------------------------------------------

enum class RuleId { Frequency, Preposition, DistanceRatio, SwitchCount, Consecutive };
enum class Severity { Note, Suspicious, Alarm };

std::string_view to_string(RuleId rule) noexcept;
std::string_view to_string(Severity severity) noexcept;

struct Subject {
  std::optional<Fingerprint> fingerprint;
  std::optional<Identity> identity;
  /// Set only for host-level findings (all ports on one address).
  std::optional<std::uint32_t> host;
};

struct FrequencyEvidence {
  std::size_t count = 0;
  std::size_t periods = 0;
  double mean_ring_size = 0;
  double mu = 0;
  double sigma = 0;
  double threshold = 0;
};

enum class PrepositionKind { KeyChange, FreshRelay };

struct PrepositionOccurrence {
  PrepositionKind kind = PrepositionKind::KeyChange;
  Fingerprint fingerprint;
  std::int64_t period = 0;
  std::int64_t responsible_at = 0;
  /// Change-event time for KeyChange, first-seen time for FreshRelay.
  std::int64_t observed_at = 0;
};

struct PrepositionEvidence {
  /// Distinct fingerprints showing either behaviour.
  std::size_t occurrences = 0;
  std::vector<PrepositionOccurrence> details;
};

struct DistanceRatioEvidence {
  std::int64_t period = 0;
  int replica = 0;
  std::size_t slot = 0;
  DescriptorId desc_id;
  Distance distance;
  Distance avg_distance;
  /// Empty means infinite (fingerprint equal to the descriptor id).
  std::optional<Distance> ratio;
};

struct SwitchCountEvidence {
  std::size_t switches_in_window = 0;
  std::size_t total_switches = 0;
  std::int64_t window_start = 0;
  std::int64_t window_end = 0;
};

enum class RunLevel { Fingerprint, Identity, Host };

struct ConsecutiveEvidence {
  RunLevel level = RunLevel::Fingerprint;
  std::size_t run_length = 0;
  std::int64_t first_period = 0;
  std::int64_t last_period = 0;
  /// Identities responsible during the run.
  std::vector<Identity> members;
};

using Evidence = std::variant<FrequencyEvidence, PrepositionEvidence,
                              DistanceRatioEvidence, SwitchCountEvidence,
                              ConsecutiveEvidence>;

struct RuleFinding {
  RuleId rule = RuleId::Frequency;
  Subject subject;
  Severity severity = Severity::Note;
  Evidence evidence;
  std::size_t segment = 0;
};

/// Identities a finding counts against when scoring.
std::vector<Identity> attributed_identities(const RuleFinding& finding);

// Rules -------------------------------------------------------------------------

struct FrequencyStats {
  std::size_t periods = 0;
  double mean_ring_size = 0;
  double mu = 0;
  double sigma = 0;
  double threshold = 0;
};

/// Mean and deviation of the number of periods a given relay is responsible
/// when each period t picks it with p_t = 6 / ring_sizes[t]. Reduces to
/// mu = n p, sigma = sqrt(n p (1 - p)) when the ring size is constant.
FrequencyStats frequency_threshold(std::span<const std::size_t> ring_sizes,
                                   double z);

std::vector<RuleFinding> rule_frequency(const ResponsibilityTimeline& timeline,
                                        const DetectorConfig& config);

std::vector<RuleFinding> rule_preposition(
    const ResponsibilityTimeline& timeline,
    std::span<const FingerprintChangeEvent> changes,
    const ConsensusArchive& archive, const DetectorConfig& config);

std::vector<RuleFinding> rule_distance_ratio(
    const ResponsibilityTimeline& timeline, const DetectorConfig& config);

std::vector<RuleFinding> rule_switch_count(
    std::span<const FingerprintChangeEvent> changes,
    const DetectorConfig& config);

std::vector<RuleFinding> rule_consecutive(const ResponsibilityTimeline& timeline,
                                          const DetectorConfig& config);

/// floor(avg / distance), or nullopt for distance 0.
std::optional<Distance> distance_ratio(const Distance& avg,
                                       const Distance& distance);

// Report ------------------------------------------------------------------------

struct Segment {
  std::string label;
  TimeRange range;
  std::size_t periods = 0;
};

struct RelayScore {
  Identity identity;
  std::vector<std::string> nicknames;
  std::vector<Fingerprint> fingerprints;
  /// Number of distinct rules with at least one finding.
  std::size_t score = 0;
  std::vector<RuleId> rules;
  Severity max_severity = Severity::Note;
  std::size_t findings = 0;
};

struct NicknameCluster {
  std::string shared;
  std::vector<Identity> members;
};

struct SuspicionReport {
  OnionAddress onion;
  TimeRange range;
  std::size_t periods = 0;
  std::size_t degenerate_periods = 0;
  std::vector<Segment> segments;
  /// Sorted by severity, then by the subject's score.
  std::vector<RuleFinding> findings;
  /// Highest score first.
  std::vector<RelayScore> scores;
  std::vector<NicknameCluster> clusters;

  bool has_alarm() const;
  bool has_suspicious() const;
};

/// Splits at 1 January boundaries (UTC).
std::vector<Segment> split_calendar_years(TimeRange range);

/// Shortest common substring length that links two nicknames in a cluster.
inline constexpr std::size_t kNicknameClusterMinShared = 6;
std::string longest_common_substring(std::string_view a, std::string_view b);

SuspicionReport detect(const ConsensusArchive& archive,
                       const OnionAddress& onion, TimeRange range,
                       const DetectorConfig& config);

std::string report_to_json(const SuspicionReport& report);
std::string report_to_text(const SuspicionReport& report);

}  // namespace hsdir
