#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace hsdir {

/// Nonnegative ring distances. 2^160 itself must be representable (the
/// average gap of a one-relay ring), so this is unbounded rather than a
/// 160-bit word.
using Distance = boost::multiprecision::cpp_int;

inline constexpr std::size_t kServiceIdSize = 10;
inline constexpr std::size_t kDigestSize = 20;
inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr int kReplicas = 2;
inline constexpr std::size_t kResponsiblePerReplica = 3;

using ServiceId = std::array<std::uint8_t, kServiceIdSize>;
using Digest = std::array<std::uint8_t, kDigestSize>;

Digest sha1(std::span<const std::uint8_t> data);

/// 2^160, the circumference of the identifier ring.
const Distance& keyspace_size();

/// A 160-bit identifier on the ring. Byte order is big-endian, so the
/// defaulted lexicographic comparison is the unsigned integer order.
template <class Tag>
class RingId {
 public:
  constexpr RingId() = default;
  constexpr explicit RingId(const Digest& bytes) : bytes_(bytes) {}

  static RingId from_hex(std::string_view hex);
  static RingId from_base32(std::string_view text);
  /// Reduces modulo 2^160.
  static RingId from_integer(const Distance& value);

  const Digest& bytes() const noexcept { return bytes_; }
  std::string hex() const;
  std::string base32() const;
  Distance to_integer() const;

  friend constexpr auto operator<=>(const RingId&, const RingId&) = default;

 private:
  Digest bytes_{};
};

struct FingerprintTag {};
struct DescriptorIdTag {};

using Fingerprint = RingId<FingerprintTag>;
using DescriptorId = RingId<DescriptorIdTag>;

/// Identifier of a v2 hidden service: the first ten digest bytes and their
/// 16-character base32 text.
class OnionAddress {
 public:
  OnionAddress() = default;
  explicit OnionAddress(const ServiceId& id) : id_(id) {}

  /// Accepts the 16-character form with or without a ".onion" suffix.
  static OnionAddress parse(std::string_view text);

  const ServiceId& id() const noexcept { return id_; }
  std::string text() const;

  friend auto operator<=>(const OnionAddress&, const OnionAddress&) = default;

 private:
  ServiceId id_{};
};

struct TimePeriod {
  std::int64_t index = 0;
  int replica = 0;

  friend auto operator<=>(const TimePeriod&, const TimePeriod&) = default;
};

/// Relays carrying the HSDir flag, sorted strictly ascending.
class HsDirRing {
 public:
  HsDirRing() = default;
  /// Sorts the input. Duplicate fingerprints are an InvalidArgument error.
  explicit HsDirRing(std::vector<Fingerprint> fingerprints);

  std::size_t size() const noexcept { return fingerprints_.size(); }
  bool empty() const noexcept { return fingerprints_.empty(); }
  std::span<const Fingerprint> fingerprints() const noexcept {
    return fingerprints_;
  }

 private:
  std::vector<Fingerprint> fingerprints_;
};

OnionAddress onion_address_from_pubkey(std::span<const std::uint8_t> pubkey_der);

/// Day-granularity period number. The first identity byte shifts the
/// rollover so services do not all rotate at midnight UTC.
std::int64_t time_period(std::int64_t now, const ServiceId& service_id);

/// First second of `period` for this service, i.e. when a new descriptor is
/// uploaded. time_period(period_start(p, id), id) == p.
std::int64_t period_start(std::int64_t period, const ServiceId& service_id);

/// SHA1(service_id || SHA1(period_be32 || replica)).
DescriptorId descriptor_id(const ServiceId& service_id, std::int64_t period,
                           int replica);

/// The three ring members strictly following `desc_id` clockwise. A member
/// equal to `desc_id` is never chosen; InsufficientRing when fewer than three
/// other members exist.
std::array<Fingerprint, kResponsiblePerReplica> responsible_hsdirs(
    const DescriptorId& desc_id, const HsDirRing& ring);

/// (fp - desc_id) mod 2^160.
Distance ring_distance(const DescriptorId& desc_id, const Fingerprint& fp);

/// floor(2^160 / ring.size()).
Distance avg_consecutive_distance(const HsDirRing& ring);

}  // namespace hsdir

template <class Tag>
struct std::hash<hsdir::RingId<Tag>> {
  std::size_t operator()(const hsdir::RingId<Tag>& id) const noexcept {
    std::size_t h = 0;
    for (std::size_t i = 0; i < sizeof(std::size_t); ++i) {
      h = (h << 8) | id.bytes()[i];
    }
    return h;
  }
};
