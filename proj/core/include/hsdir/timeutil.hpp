#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace hsdir {

/// "YYYY-MM-DD" to the unix time of that day's midnight UTC.
std::int64_t parse_date(std::string_view text);
std::string format_date(std::int64_t unix_seconds);
/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_timestamp(std::int64_t unix_seconds);

int year_of(std::int64_t unix_seconds);
std::int64_t year_start(int year);

inline std::int64_t day_number(std::int64_t unix_seconds) {
  return unix_seconds >= 0 ? unix_seconds / 86400
                           : -((-unix_seconds + 86399) / 86400);
}

}  // namespace hsdir
