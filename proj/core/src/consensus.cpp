#include "hsdir/consensus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

#include "hsdir/error.hpp"

namespace hsdir {

using json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<RelayFlag, std::string_view>, 4> kFlagNames{{
    {RelayFlag::Guard, "Guard"},
    {RelayFlag::HSDir, "HSDir"},
    {RelayFlag::Running, "Running"},
    {RelayFlag::Valid, "Valid"},
}};

RelayEntry parse_relay(const json& j) {
  if (!j.is_object()) {
    throw Error(ErrorKind::ParseError, "relay entry must be an object");
  }
  auto field = [&](const char* name) -> const json& {
    auto it = j.find(name);
    if (it == j.end()) {
      throw Error(ErrorKind::ParseError,
                  std::string("relay entry missing \"") + name + "\"");
    }
    return *it;
  };

  RelayEntry r;
  const json& fp = field("fp");
  if (!fp.is_string()) throw Error(ErrorKind::ParseError, "\"fp\" must be a string");
  try {
    r.fingerprint = Fingerprint::from_hex(fp.get<std::string>());
  } catch (const Error& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }

  const json& nick = field("nick");
  if (!nick.is_string()) throw Error(ErrorKind::ParseError, "\"nick\" must be a string");
  r.nickname = nick.get<std::string>();
  if (r.nickname.empty() || r.nickname.size() > 19) {
    throw Error(ErrorKind::ParseError,
                "nickname must be 1-19 characters: '" + r.nickname + "'");
  }

  const json& ip = field("ip");
  if (!ip.is_string()) throw Error(ErrorKind::ParseError, "\"ip\" must be a string");
  try {
    r.ip = parse_ipv4(ip.get<std::string>());
  } catch (const Error& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }

  const json& port = field("port");
  if (!port.is_number_integer() || port.get<std::int64_t>() < 1 ||
      port.get<std::int64_t>() > 65535) {
    throw Error(ErrorKind::ParseError, "\"port\" must be an integer in 1-65535");
  }
  r.or_port = static_cast<std::uint16_t>(port.get<std::int64_t>());

  const json& bw = field("bw");
  if (!bw.is_number_integer() || bw.get<std::int64_t>() < 0) {
    throw Error(ErrorKind::ParseError, "\"bw\" must be a nonnegative integer");
  }
  r.bandwidth = bw.get<std::uint64_t>();

  const json& flags = field("flags");
  if (!flags.is_array()) throw Error(ErrorKind::ParseError, "\"flags\" must be an array");
  std::vector<std::string> names;
  for (const auto& f : flags) {
    if (!f.is_string()) throw Error(ErrorKind::ParseError, "flag names must be strings");
    names.push_back(f.get<std::string>());
  }
  r.flags = FlagSet::from_names(names);
  return r;
}

ConsensusSnapshot parse_snapshot(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  if (!j.is_object()) {
    throw Error(ErrorKind::ParseError, "snapshot must be a JSON object");
  }
  auto va = j.find("valid_after");
  if (va == j.end() || !va->is_number_integer()) {
    throw Error(ErrorKind::ParseError, "\"valid_after\" must be an integer");
  }
  auto relays = j.find("relays");
  if (relays == j.end() || !relays->is_array()) {
    throw Error(ErrorKind::ParseError, "\"relays\" must be an array");
  }
  ConsensusSnapshot s;
  s.valid_after = va->get<std::int64_t>();
  s.relays.reserve(relays->size());
  for (const auto& r : *relays) s.relays.push_back(parse_relay(r));
  return s;
}

void check_order(const ConsensusSnapshot& prev, const ConsensusSnapshot& next) {
  if (next.valid_after <= prev.valid_after) {
    throw Error(ErrorKind::OrderingError,
                "valid_after " + std::to_string(next.valid_after) +
                    " does not follow " + std::to_string(prev.valid_after));
  }
}

}  // namespace

// FlagSet / addresses ----------------------------------------------------------

std::vector<std::string_view> FlagSet::names() const {
  std::vector<std::string_view> out;
  for (const auto& [flag, name] : kFlagNames) {
    if (has(flag)) out.push_back(name);
  }
  return out;
}

FlagSet FlagSet::from_names(std::span<const std::string> names) {
  FlagSet out;
  for (const auto& n : names) {
    for (const auto& [flag, name] : kFlagNames) {
      if (n == name) out.set(flag);
    }
  }
  return out;
}

std::uint32_t parse_ipv4(std::string_view text) {
  std::uint32_t ip = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int octet = 0; octet < 4; ++octet) {
    unsigned value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc{} || next == p || value > 255 || next - p > 3) {
      throw Error(ErrorKind::InvalidArgument,
                  "invalid IPv4 address '" + std::string(text) + "'");
    }
    ip = (ip << 8) | value;
    p = next;
    if (octet < 3) {
      if (p == end || *p != '.') {
        throw Error(ErrorKind::InvalidArgument,
                    "invalid IPv4 address '" + std::string(text) + "'");
      }
      ++p;
    }
  }
  if (p != end) {
    throw Error(ErrorKind::InvalidArgument,
                "invalid IPv4 address '" + std::string(text) + "'");
  }
  return ip;
}

std::string ipv4_to_string(std::uint32_t ip) {
  return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xff) +
         "." + std::to_string((ip >> 8) & 0xff) + "." +
         std::to_string(ip & 0xff);
}

std::string Identity::to_string() const {
  return ipv4_to_string(ip) + ":" + std::to_string(port);
}

// ConsensusSnapshot -------------------------------------------------------------

const RelayEntry* ConsensusSnapshot::find(const Fingerprint& fp) const {
  auto it = std::find_if(relays.begin(), relays.end(),
                         [&](const RelayEntry& r) { return r.fingerprint == fp; });
  return it == relays.end() ? nullptr : &*it;
}

HsDirRing ConsensusSnapshot::hsdir_ring() const {
  std::vector<Fingerprint> fps;
  for (const auto& r : relays) {
    if (r.flags.has(RelayFlag::HSDir)) fps.push_back(r.fingerprint);
  }
  return HsDirRing(std::move(fps));
}

std::size_t ConsensusSnapshot::hsdir_count() const {
  return static_cast<std::size_t>(
      std::count_if(relays.begin(), relays.end(), [](const RelayEntry& r) {
        return r.flags.has(RelayFlag::HSDir);
      }));
}

void ConsensusSnapshot::validate(int max_relays_per_ip) const {
  if (valid_after % kSecondsPerHour != 0) {
    throw Error(ErrorKind::ConstraintError,
                "valid_after " + std::to_string(valid_after) +
                    " is not hour-aligned");
  }
  std::set<Fingerprint> fps;
  std::set<Identity> identities;
  std::map<std::uint32_t, int> per_ip;
  for (const auto& r : relays) {
    if (!fps.insert(r.fingerprint).second) {
      throw Error(ErrorKind::ConstraintError,
                  "duplicate fingerprint " + r.fingerprint.hex());
    }
    if (!identities.insert(r.identity()).second) {
      throw Error(ErrorKind::ConstraintError,
                  "duplicate address " + r.identity().to_string());
    }
    if (++per_ip[r.ip] > max_relays_per_ip) {
      throw Error(ErrorKind::ConstraintError,
                  "more than " + std::to_string(max_relays_per_ip) +
                      " relays on " + ipv4_to_string(r.ip));
    }
  }
}

// ConsensusArchive --------------------------------------------------------------

ConsensusArchive::ConsensusArchive(std::vector<ConsensusSnapshot> snapshots) {
  snapshots_.reserve(snapshots.size());
  for (auto& s : snapshots) append(std::move(s));
}

void ConsensusArchive::append(ConsensusSnapshot snapshot) {
  snapshot.validate();
  if (!snapshots_.empty()) check_order(snapshots_.back(), snapshot);
  snapshots_.push_back(std::move(snapshot));
}

std::int64_t ConsensusArchive::first_time() const {
  if (empty()) throw Error(ErrorKind::NoData, "archive is empty");
  return snapshots_.front().valid_after;
}

std::int64_t ConsensusArchive::last_time() const {
  if (empty()) throw Error(ErrorKind::NoData, "archive is empty");
  return snapshots_.back().valid_after;
}

const ConsensusSnapshot& ConsensusArchive::snapshot_at(std::int64_t t) const {
  auto it = std::upper_bound(
      snapshots_.begin(), snapshots_.end(), t,
      [](std::int64_t time, const ConsensusSnapshot& s) {
        return time < s.valid_after;
      });
  if (it == snapshots_.begin()) {
    throw Error(ErrorKind::NoData,
                "no snapshot at or before " + std::to_string(t));
  }
  return *std::prev(it);
}

std::vector<std::pair<std::int64_t, std::int64_t>> ConsensusArchive::gaps() const {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (std::size_t i = 1; i < snapshots_.size(); ++i) {
    if (snapshots_[i].valid_after - snapshots_[i - 1].valid_after > kSecondsPerHour) {
      out.emplace_back(snapshots_[i - 1].valid_after, snapshots_[i].valid_after);
    }
  }
  return out;
}

// I/O ---------------------------------------------------------------------------

ConsensusArchive load_archive(std::istream& source) {
  std::vector<ConsensusSnapshot> snapshots;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      ConsensusSnapshot s = parse_snapshot(line);
      s.validate();
      if (!snapshots.empty()) check_order(snapshots.back(), s);
      snapshots.push_back(std::move(s));
    } catch (const Error& e) {
      throw LineError(e.kind(), line_no, e.what());
    }
  }
  ConsensusArchive archive;
  for (auto& s : snapshots) archive.append(std::move(s));
  return archive;
}

ConsensusArchive load_archive_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  return load_archive(in);
}

std::string serialize_snapshot(const ConsensusSnapshot& snapshot) {
  json relays = json::array();
  for (const auto& r : snapshot.relays) {
    json flags = json::array();
    for (auto name : r.flags.names()) flags.push_back(std::string(name));
    relays.push_back(json{{"fp", r.fingerprint.hex()},
                          {"nick", r.nickname},
                          {"ip", ipv4_to_string(r.ip)},
                          {"port", r.or_port},
                          {"bw", r.bandwidth},
                          {"flags", std::move(flags)}});
  }
  json j{{"valid_after", snapshot.valid_after}, {"relays", std::move(relays)}};
  return j.dump();
}

void save_archive(const ConsensusArchive& archive, std::ostream& out) {
  for (const auto& s : archive.snapshots()) out << serialize_snapshot(s) << '\n';
}

// Queries -----------------------------------------------------------------------

HsDirRing hsdir_ring_at(const ConsensusArchive& archive, std::int64_t t) {
  return archive.snapshot_at(t).hsdir_ring();
}

std::optional<std::int64_t> relay_first_seen(const ConsensusArchive& archive,
                                             const Fingerprint& fp) {
  for (const auto& s : archive.snapshots()) {
    if (s.find(fp) != nullptr) return s.valid_after;
  }
  return std::nullopt;
}

std::unordered_map<Fingerprint, std::int64_t> first_seen_index(
    const ConsensusArchive& archive) {
  std::unordered_map<Fingerprint, std::int64_t> out;
  for (const auto& s : archive.snapshots()) {
    for (const auto& r : s.relays) out.try_emplace(r.fingerprint, s.valid_after);
  }
  return out;
}

std::vector<FingerprintChangeEvent> fingerprint_changes(
    const ConsensusArchive& archive) {
  std::map<Identity, Fingerprint> last_seen;
  std::vector<FingerprintChangeEvent> events;
  for (const auto& s : archive.snapshots()) {
    std::vector<FingerprintChangeEvent> batch;
    for (const auto& r : s.relays) {
      auto [it, inserted] = last_seen.try_emplace(r.identity(), r.fingerprint);
      if (!inserted && it->second != r.fingerprint) {
        batch.push_back({r.identity(), r.nickname, it->second, r.fingerprint,
                         s.valid_after});
        it->second = r.fingerprint;
      }
    }
    std::sort(batch.begin(), batch.end(), [](const auto& a, const auto& b) {
      return a.identity < b.identity;
    });
    events.insert(events.end(), batch.begin(), batch.end());
  }
  return events;
}

}  // namespace hsdir
