#pragma once

// Helpers for building small hand-made consensus archives in tests.

#include <cstdint>
#include <string>
#include <vector>

#include "hsdir/consensus.hpp"
#include "hsdir/hs_protocol.hpp"

namespace testing_util {

inline hsdir::Fingerprint fp_from_integer(const hsdir::Distance& v) {
  return hsdir::Fingerprint::from_integer(v);
}

/// Fingerprint whose leading byte is `first` and whose trailing byte is `last`.
inline hsdir::Fingerprint fp_bytes(std::uint8_t first, std::uint8_t last = 0) {
  hsdir::Digest d{};
  d[0] = first;
  d[19] = last;
  return hsdir::Fingerprint(d);
}

inline hsdir::RelayEntry relay(const hsdir::Fingerprint& fp, std::string nick,
                               std::string ip, std::uint16_t port = 9001,
                               bool hsdir = true, std::uint64_t bw = 1000) {
  hsdir::RelayEntry r;
  r.fingerprint = fp;
  r.nickname = std::move(nick);
  r.ip = hsdir::parse_ipv4(ip);
  r.or_port = port;
  r.bandwidth = bw;
  r.flags = hsdir::FlagSet{hsdir::RelayFlag::Running, hsdir::RelayFlag::Valid};
  if (hsdir::FlagSet f = r.flags; hsdir) {
    f.set(hsdir::RelayFlag::HSDir);
    r.flags = f;
  }
  return r;
}

inline hsdir::ConsensusSnapshot snapshot(std::int64_t valid_after,
                                         std::vector<hsdir::RelayEntry> relays) {
  hsdir::ConsensusSnapshot s;
  s.valid_after = valid_after;
  s.relays = std::move(relays);
  return s;
}

/// `hours` identical hourly snapshots starting at `start`.
inline hsdir::ConsensusArchive steady_archive(std::int64_t start, std::int64_t hours,
                                              const std::vector<hsdir::RelayEntry>& relays) {
  std::vector<hsdir::ConsensusSnapshot> snaps;
  for (std::int64_t h = 0; h < hours; ++h) {
    snaps.push_back(snapshot(start + h * hsdir::kSecondsPerHour, relays));
  }
  return hsdir::ConsensusArchive(std::move(snaps));
}

}  // namespace testing_util
