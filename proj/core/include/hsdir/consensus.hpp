#pragma once

#include <compare>
#include <initializer_list>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hsdir/hs_protocol.hpp"

namespace hsdir {

enum class RelayFlag : std::uint8_t {
  Guard = 1 << 0,
  HSDir = 1 << 1,
  Running = 1 << 2,
  Valid = 1 << 3,
};

class FlagSet {
 public:
  constexpr FlagSet() = default;
  constexpr FlagSet(std::initializer_list<RelayFlag> flags) {
    for (auto f : flags) set(f);
  }

  constexpr bool has(RelayFlag f) const noexcept {
    return (bits_ & static_cast<std::uint8_t>(f)) != 0;
  }
  constexpr void set(RelayFlag f) noexcept {
    bits_ |= static_cast<std::uint8_t>(f);
  }
  constexpr void clear(RelayFlag f) noexcept {
    bits_ &= static_cast<std::uint8_t>(~static_cast<std::uint8_t>(f));
  }

  /// Names in a fixed order: Guard, HSDir, Running, Valid.
  std::vector<std::string_view> names() const;
  /// Unknown names are ignored, matching how real consensus consumers treat
  /// flags they do not understand.
  static FlagSet from_names(std::span<const std::string> names);

  friend constexpr bool operator==(FlagSet, FlagSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

std::uint32_t parse_ipv4(std::string_view text);
std::string ipv4_to_string(std::uint32_t ip);

/// Stable observable for "the same server": its IPv4 address and OR port.
struct Identity {
  std::uint32_t ip = 0;
  std::uint16_t port = 0;

  std::string to_string() const;
  friend constexpr auto operator<=>(const Identity&, const Identity&) = default;
};

struct RelayEntry {
  Fingerprint fingerprint;
  std::string nickname;
  std::uint32_t ip = 0;
  std::uint16_t or_port = 0;
  std::uint64_t bandwidth = 0;
  FlagSet flags;

  Identity identity() const { return {ip, or_port}; }
  friend bool operator==(const RelayEntry&, const RelayEntry&) = default;
};

inline constexpr std::int64_t kSecondsPerHour = 3600;
inline constexpr int kDefaultMaxRelaysPerIp = 2;

struct ConsensusSnapshot {
  std::int64_t valid_after = 0;
  std::vector<RelayEntry> relays;

  const RelayEntry* find(const Fingerprint& fp) const;
  HsDirRing hsdir_ring() const;
  std::size_t hsdir_count() const;

  /// Throws ConstraintError on a violated snapshot invariant.
  void validate(int max_relays_per_ip = kDefaultMaxRelaysPerIp) const;

  friend bool operator==(const ConsensusSnapshot&, const ConsensusSnapshot&) = default;
};

/// Time-ordered hourly snapshots. Immutable once built.
class ConsensusArchive {
 public:
  ConsensusArchive() = default;
  /// Validates every snapshot and the ordering.
  explicit ConsensusArchive(std::vector<ConsensusSnapshot> snapshots);

  /// Appends after validating against the last snapshot.
  void append(ConsensusSnapshot snapshot);

  std::span<const ConsensusSnapshot> snapshots() const noexcept {
    return snapshots_;
  }
  std::size_t size() const noexcept { return snapshots_.size(); }
  bool empty() const noexcept { return snapshots_.empty(); }
  std::int64_t first_time() const;
  std::int64_t last_time() const;

  /// Latest snapshot with valid_after <= t. NoData when none exists.
  const ConsensusSnapshot& snapshot_at(std::int64_t t) const;

  /// (previous valid_after, next valid_after) for every hole larger than an
  /// hour.
  std::vector<std::pair<std::int64_t, std::int64_t>> gaps() const;

  friend bool operator==(const ConsensusArchive&, const ConsensusArchive&) = default;

 private:
  std::vector<ConsensusSnapshot> snapshots_;
};

struct FingerprintChangeEvent {
  Identity identity;
  std::string nickname;
  Fingerprint old_fp;
  Fingerprint new_fp;
  std::int64_t at = 0;

  friend bool operator==(const FingerprintChangeEvent&,
                         const FingerprintChangeEvent&) = default;
};

/// Reads one JSON snapshot per line. Blank lines are skipped. Errors are
/// LineError with kind ParseError, OrderingError or ConstraintError.
ConsensusArchive load_archive(std::istream& source);
ConsensusArchive load_archive_file(const std::string& path);

std::string serialize_snapshot(const ConsensusSnapshot& snapshot);
void save_archive(const ConsensusArchive& archive, std::ostream& out);

HsDirRing hsdir_ring_at(const ConsensusArchive& archive, std::int64_t t);

std::optional<std::int64_t> relay_first_seen(const ConsensusArchive& archive,
                                             const Fingerprint& fp);
std::unordered_map<Fingerprint, std::int64_t> first_seen_index(
    const ConsensusArchive& archive);

/// One event each time the fingerprint seen at an (ip, port) differs from the
/// previous one seen there. Ordered by time, then identity.
std::vector<FingerprintChangeEvent> fingerprint_changes(
    const ConsensusArchive& archive);

}  // namespace hsdir
