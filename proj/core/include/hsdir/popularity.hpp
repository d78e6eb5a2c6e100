#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hsdir/hs_protocol.hpp"

namespace hsdir {

struct IndexEntry {
  OnionAddress onion;
  std::int64_t period = 0;
  int replica = 0;

  friend auto operator<=>(const IndexEntry&, const IndexEntry&) = default;
};

/// Descriptor id -> (onion, period, replica) for every onion, every period
/// in [first_period, last_period] and both replicas. Ids produced by two
/// different onions are kept apart as ambiguous.
class DescriptorIndex {
 public:
  DescriptorIndex() = default;

  /// Periods are day numbers (unix days), one per day of the window.
  static DescriptorIndex build(std::span<const OnionAddress> onions,
                               std::int64_t first_period, std::int64_t last_period);

  /// nullptr when absent or ambiguous.
  const IndexEntry* find(const DescriptorId& id) const;
  bool is_ambiguous(const DescriptorId& id) const;

  /// Unambiguous entries.
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::unordered_map<DescriptorId, std::vector<IndexEntry>>& collisions() const {
    return collisions_;
  }

 private:
  std::unordered_map<DescriptorId, IndexEntry> entries_;
  std::unordered_map<DescriptorId, std::vector<IndexEntry>> collisions_;
};

/// One row of the request log as read back from CSV.
struct LogRow {
  std::int64_t hour = 0;
  DescriptorId desc_id;
  std::uint64_t count = 0;
  std::uint32_t client = 0;
  std::optional<Fingerprint> guard;
};

/// CSV with header hour,desc_id_base32,count,client_id,guard_fp_hex.
/// Malformed rows raise a LineError with ParseError.
std::vector<LogRow> read_request_log(std::istream& in);

/// One 16-character address per line (".onion" suffix allowed); blank lines
/// and lines starting with '#' are skipped. Duplicates are dropped.
std::vector<OnionAddress> read_onion_list(std::istream& in);

struct PopularityRow {
  std::size_t rank = 0;
  std::uint64_t count = 0;
  OnionAddress onion;
};

struct PopularityTable {
  /// Count descending, ties by onion text ascending; ranks from 1.
  std::vector<PopularityRow> rows;
  std::uint64_t total = 0;
  std::uint64_t unresolved = 0;
  /// Requests for ids shared by several onions; excluded from `rows`.
  std::uint64_t ambiguous = 0;
  /// Distinct descriptor ids that resolved.
  std::size_t resolved_ids = 0;

  std::uint64_t resolved() const noexcept { return total - unresolved - ambiguous; }
};

PopularityTable resolve(std::span<const LogRow> log, const DescriptorIndex& index);

/// rank,count,onion with a header row.
void write_popularity_csv(const PopularityTable& table, std::ostream& out);
std::string popularity_to_json(const PopularityTable& table);

}  // namespace hsdir
