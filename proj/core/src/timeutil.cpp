#include "hsdir/timeutil.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "hsdir/error.hpp"

namespace hsdir {

namespace {

using namespace std::chrono;

year_month_day civil(std::int64_t unix_seconds) {
  return year_month_day{sys_days{days{day_number(unix_seconds)}}};
}

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error(ErrorKind::InvalidArgument,
                "invalid date '" + std::string(whole) + "', expected YYYY-MM-DD");
  }
  return v;
}

}  // namespace

std::int64_t parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorKind::InvalidArgument,
                "invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
  }
  year_month_day ymd{year{parse_int(text.substr(0, 4), text)},
                     month{static_cast<unsigned>(parse_int(text.substr(5, 2), text))},
                     day{static_cast<unsigned>(parse_int(text.substr(8, 2), text))}};
  if (!ymd.ok()) {
    throw Error(ErrorKind::InvalidArgument,
                "invalid calendar date '" + std::string(text) + "'");
  }
  return sys_days{ymd}.time_since_epoch().count() * std::int64_t{86400};
}

std::string format_date(std::int64_t unix_seconds) {
  auto ymd = civil(unix_seconds);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(std::int64_t unix_seconds) {
  std::int64_t secs = unix_seconds - day_number(unix_seconds) * 86400;
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d:%02d:%02dZ",
                static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60),
                static_cast<int>(secs % 60));
  return format_date(unix_seconds) + buf;
}

int year_of(std::int64_t unix_seconds) {
  return static_cast<int>(civil(unix_seconds).year());
}

std::int64_t year_start(int y) {
  year_month_day ymd{year{y}, January, day{1}};
  return sys_days{ymd}.time_since_epoch().count() * std::int64_t{86400};
}

}  // namespace hsdir
