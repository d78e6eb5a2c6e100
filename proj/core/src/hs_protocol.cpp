#include "hsdir/hs_protocol.hpp"

#include <algorithm>
#include <iterator>

#include <openssl/evp.h>

#include "hsdir/base32.hpp"
#include "hsdir/error.hpp"

namespace hsdir {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Digest sha1(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha1(),
                 nullptr) != 1 ||
      len != kDigestSize) {
    throw Error(ErrorKind::InvalidArgument, "SHA-1 computation failed");
  }
  return out;
}

const Distance& keyspace_size() {
  static const Distance size = Distance(1) << 160;
  return size;
}

// RingId ---------------------------------------------------------------------

template <class Tag>
RingId<Tag> RingId<Tag>::from_hex(std::string_view hex) {
  if (hex.size() != 2 * kDigestSize) {
    throw Error(ErrorKind::InvalidArgument,
                "expected 40 hex characters, got " + std::to_string(hex.size()));
  }
  Digest bytes{};
  for (std::size_t i = 0; i < kDigestSize; ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      throw Error(ErrorKind::InvalidArgument,
                  "invalid hex digit in '" + std::string(hex) + "'");
    }
    bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return RingId(bytes);
}

template <class Tag>
RingId<Tag> RingId<Tag>::from_base32(std::string_view text) {
  if (text.size() != 32) {
    throw Error(ErrorKind::InvalidArgument,
                "expected 32 base32 characters, got " +
                    std::to_string(text.size()));
  }
  auto decoded = base32_decode(text);
  Digest bytes{};
  std::copy(decoded.begin(), decoded.end(), bytes.begin());
  return RingId(bytes);
}

template <class Tag>
RingId<Tag> RingId<Tag>::from_integer(const Distance& value) {
  Distance reduced = value % keyspace_size();
  if (reduced < 0) reduced += keyspace_size();
  std::vector<std::uint8_t> raw;
  if (reduced != 0) {
    boost::multiprecision::export_bits(reduced, std::back_inserter(raw), 8,
                                       true);
  }
  Digest bytes{};
  std::copy(raw.begin(), raw.end(),
            bytes.begin() + static_cast<std::ptrdiff_t>(kDigestSize - raw.size()));
  return RingId(bytes);
}

template <class Tag>
std::string RingId<Tag>::hex() const {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(2 * kDigestSize);
  for (std::uint8_t b : bytes_) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

template <class Tag>
std::string RingId<Tag>::base32() const {
  return base32_encode(bytes_);
}

template <class Tag>
Distance RingId<Tag>::to_integer() const {
  Distance value;
  boost::multiprecision::import_bits(value, bytes_.begin(), bytes_.end(), 8,
                                     true);
  return value;
}

template class RingId<FingerprintTag>;
template class RingId<DescriptorIdTag>;

// OnionAddress ----------------------------------------------------------------

OnionAddress OnionAddress::parse(std::string_view text) {
  constexpr std::string_view kSuffix = ".onion";
  if (text.size() > kSuffix.size() &&
      text.substr(text.size() - kSuffix.size()) == kSuffix) {
    text.remove_suffix(kSuffix.size());
  }
  if (text.size() != 16) {
    throw Error(ErrorKind::InvalidArgument,
                "onion address must be 16 base32 characters: '" +
                    std::string(text) + "'");
  }
  auto decoded = base32_decode(text);
  ServiceId id{};
  std::copy(decoded.begin(), decoded.end(), id.begin());
  return OnionAddress(id);
}

std::string OnionAddress::text() const { return base32_encode(id_); }

// HsDirRing -------------------------------------------------------------------

HsDirRing::HsDirRing(std::vector<Fingerprint> fingerprints)
    : fingerprints_(std::move(fingerprints)) {
  std::sort(fingerprints_.begin(), fingerprints_.end());
  auto dup = std::adjacent_find(fingerprints_.begin(), fingerprints_.end());
  if (dup != fingerprints_.end()) {
    throw Error(ErrorKind::InvalidArgument,
                "duplicate fingerprint in ring: " + dup->hex());
  }
}

// Operations ------------------------------------------------------------------

OnionAddress onion_address_from_pubkey(std::span<const std::uint8_t> pubkey_der) {
  if (pubkey_der.empty()) {
    throw Error(ErrorKind::InvalidArgument, "public key must not be empty");
  }
  Digest digest = sha1(pubkey_der);
  ServiceId id{};
  std::copy_n(digest.begin(), kServiceIdSize, id.begin());
  return OnionAddress(id);
}

std::int64_t time_period(std::int64_t now, const ServiceId& service_id) {
  std::int64_t offset = std::int64_t{service_id[0]} * kSecondsPerDay / 256;
  return (now + offset) / kSecondsPerDay;
}

std::int64_t period_start(std::int64_t period, const ServiceId& service_id) {
  std::int64_t offset = std::int64_t{service_id[0]} * kSecondsPerDay / 256;
  return period * kSecondsPerDay - offset;
}

DescriptorId descriptor_id(const ServiceId& service_id, std::int64_t period,
                           int replica) {
  if (replica < 0 || replica >= kReplicas) {
    throw Error(ErrorKind::InvalidArgument,
                "replica must be 0 or 1, got " + std::to_string(replica));
  }
  auto p = static_cast<std::uint32_t>(period);
  std::array<std::uint8_t, 5> secret_input{
      static_cast<std::uint8_t>(p >> 24), static_cast<std::uint8_t>(p >> 16),
      static_cast<std::uint8_t>(p >> 8), static_cast<std::uint8_t>(p),
      static_cast<std::uint8_t>(replica)};
  Digest secret_id = sha1(secret_input);

  std::array<std::uint8_t, kServiceIdSize + kDigestSize> outer{};
  std::copy(service_id.begin(), service_id.end(), outer.begin());
  std::copy(secret_id.begin(), secret_id.end(),
            outer.begin() + kServiceIdSize);
  return DescriptorId(sha1(outer));
}

std::array<Fingerprint, kResponsiblePerReplica> responsible_hsdirs(
    const DescriptorId& desc_id, const HsDirRing& ring) {
  if (ring.size() < kResponsiblePerReplica) {
    throw Error(ErrorKind::InsufficientRing,
                "ring has " + std::to_string(ring.size()) +
                    " HSDirs, need at least 3");
  }
  auto fps = ring.fingerprints();
  const Fingerprint key(desc_id.bytes());
  auto first = std::upper_bound(fps.begin(), fps.end(), key);
  auto index = static_cast<std::size_t>(first - fps.begin());
  // A member equal to the id does not follow it, so it can never be chosen.
  const bool on_member = index > 0 && fps[index - 1] == key;
  if (on_member && ring.size() == kResponsiblePerReplica) {
    throw Error(ErrorKind::InsufficientRing,
                "only 2 HSDirs follow a descriptor id that equals a ring member");
  }

  std::array<Fingerprint, kResponsiblePerReplica> out;
  for (std::size_t i = 0; i < kResponsiblePerReplica; ++i) {
    out[i] = fps[(index + i) % fps.size()];
  }
  return out;
}

Distance ring_distance(const DescriptorId& desc_id, const Fingerprint& fp) {
  Distance d = fp.to_integer() - desc_id.to_integer();
  if (d < 0) d += keyspace_size();
  return d;
}

Distance avg_consecutive_distance(const HsDirRing& ring) {
  if (ring.empty()) {
    throw Error(ErrorKind::InvalidArgument,
                "average gap of an empty ring is undefined");
  }
  return keyspace_size() / ring.size();
}

}  // namespace hsdir
