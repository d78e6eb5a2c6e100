#include "hsdir/popularity.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "hsdir/csv.hpp"
#include "hsdir/error.hpp"

namespace hsdir {

DescriptorIndex DescriptorIndex::build(std::span<const OnionAddress> onions,
                                       std::int64_t first_period,
                                       std::int64_t last_period) {
  if (last_period < first_period) {
    throw Error(ErrorKind::InvalidArgument, "index window must cover at least one day");
  }
  DescriptorIndex index;
  for (const auto& onion : onions) {
    for (std::int64_t p = first_period; p <= last_period; ++p) {
      for (int r = 0; r < kReplicas; ++r) {
        DescriptorId id = descriptor_id(onion.id(), p, r);
        IndexEntry entry{onion, p, r};
        if (auto c = index.collisions_.find(id); c != index.collisions_.end()) {
          c->second.push_back(entry);
          continue;
        }
        auto [it, inserted] = index.entries_.try_emplace(id, entry);
        if (!inserted && it->second != entry) {
          index.collisions_[id] = {it->second, entry};
          index.entries_.erase(it);
        }
      }
    }
  }
  return index;
}

const IndexEntry* DescriptorIndex::find(const DescriptorId& id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

bool DescriptorIndex::is_ambiguous(const DescriptorId& id) const {
  return collisions_.count(id) != 0;
}

namespace {

template <class T>
T parse_number(const std::string& s, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error(ErrorKind::ParseError, std::string("invalid ") + what + " '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<LogRow> read_request_log(std::istream& in) {
  static const std::vector<std::string> kHeader{"hour", "desc_id_base32", "count",
                                                "client_id", "guard_fp_hex"};
  std::vector<LogRow> rows;
  std::vector<std::string> fields;
  std::size_t line = 0;
  bool header = false;
  while (true) {
    ++line;
    try {
      if (!read_csv_row(in, fields)) break;
      if (fields.size() == 1 && fields[0].empty()) continue;
      if (!header) {
        if (fields != kHeader) {
          throw Error(ErrorKind::ParseError,
                      "expected header hour,desc_id_base32,count,client_id,guard_fp_hex");
        }
        header = true;
        continue;
      }
      if (fields.size() != kHeader.size()) {
        throw Error(ErrorKind::ParseError, "expected 5 fields, got " +
                                               std::to_string(fields.size()));
      }
      LogRow row;
      row.hour = parse_number<std::int64_t>(fields[0], "hour");
      try {
        row.desc_id = DescriptorId::from_base32(fields[1]);
      } catch (const Error& e) {
        throw Error(ErrorKind::ParseError, e.what());
      }
      row.count = parse_number<std::uint64_t>(fields[2], "count");
      row.client = parse_number<std::uint32_t>(fields[3], "client_id");
      if (!fields[4].empty()) {
        try {
          row.guard = Fingerprint::from_hex(fields[4]);
        } catch (const Error& e) {
          throw Error(ErrorKind::ParseError, e.what());
        }
      }
      rows.push_back(row);
    } catch (const LineError&) {
      throw;
    } catch (const Error& e) {
      throw LineError(e.kind(), line, e.what());
    }
  }
  return rows;
}

std::vector<OnionAddress> read_onion_list(std::istream& in) {
  std::vector<OnionAddress> out;
  std::set<OnionAddress> seen;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    try {
      OnionAddress a = OnionAddress::parse(line.substr(b, e - b + 1));
      if (seen.insert(a).second) out.push_back(a);
    } catch (const Error& err) {
      throw LineError(ErrorKind::ParseError, n, err.what());
    }
  }
  return out;
}

PopularityTable resolve(std::span<const LogRow> log, const DescriptorIndex& index) {
  PopularityTable table;
  std::map<OnionAddress, std::uint64_t> counts;
  std::unordered_set<DescriptorId> ids;
  for (const auto& row : log) {
    table.total += row.count;
    if (const IndexEntry* e = index.find(row.desc_id)) {
      counts[e->onion] += row.count;
      ids.insert(row.desc_id);
    } else if (index.is_ambiguous(row.desc_id)) {
      table.ambiguous += row.count;
    } else {
      table.unresolved += row.count;
    }
  }
  table.resolved_ids = ids.size();
  for (const auto& [onion, count] : counts) table.rows.push_back({0, count, onion});
  std::sort(table.rows.begin(), table.rows.end(),
            [](const PopularityRow& a, const PopularityRow& b) {
              if (a.count != b.count) return a.count > b.count;
              return a.onion.text() < b.onion.text();
            });
  for (std::size_t i = 0; i < table.rows.size(); ++i) table.rows[i].rank = i + 1;
  return table;
}

void write_popularity_csv(const PopularityTable& table, std::ostream& out) {
  write_csv_row(out, {"rank", "count", "onion"});
  for (const auto& r : table.rows) {
    write_csv_row(out, {std::to_string(r.rank), std::to_string(r.count), r.onion.text()});
  }
}

std::string popularity_to_json(const PopularityTable& table) {
  using json = nlohmann::ordered_json;
  json rows = json::array();
  for (const auto& r : table.rows) {
    rows.push_back(json{{"rank", r.rank}, {"count", r.count}, {"onion", r.onion.text()}});
  }
  json j{{"total", table.total},
         {"resolved", table.resolved()},
         {"unresolved", table.unresolved},
         {"ambiguous", table.ambiguous},
         {"resolved_descriptor_ids", table.resolved_ids},
         {"rows", std::move(rows)}};
  return j.dump(2) + "\n";
}

}  // namespace hsdir
