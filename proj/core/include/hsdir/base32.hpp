#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hsdir {

// RFC 4648 base32, lowercase alphabet, no padding. Decoding accepts either
// case and rejects trailing bits that are not zero so every text form has
// exactly one byte sequence.
std::string base32_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base32_decode(std::string_view text);

}  // namespace hsdir
