#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace drcast {

// Hours since 1970-01-01T00:00:00Z. Every series in this library is hourly,
// so a single integer is enough and gap checks are plain subtraction.
using HourStamp = std::int64_t;

inline int hour_of_day(HourStamp t) {
  return static_cast<int>(((t % 24) + 24) % 24);
}

namespace detail {

// Days between 1970-01-01 and y-m-d in the proleptic Gregorian calendar.
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
}

inline bool parse_fixed_uint(std::string_view s, std::size_t pos, std::size_t len, unsigned& out) {
  if (pos + len > s.size()) return false;
  unsigned v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    const char c = s[i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + static_cast<unsigned>(c - '0');
  }
  out = v;
  return true;
}

}  // namespace detail

// Parses an ISO-8601 instant at hour resolution: "YYYY-MM-DDTHH:MM[:SS][Z]"
// (a space instead of 'T' is accepted). Minutes and seconds, when present,
// must be zero; input is taken as UTC.
inline HourStamp parse_hour(std::string_view text) {
  const auto fail = [&]() -> HourStamp {
    throw std::invalid_argument("invalid hour-resolution timestamp: '" + std::string(text) + "'");
  };
  unsigned year = 0, month = 0, day = 0, hour = 0;
  if (text.size() < 13) return fail();
  if (!detail::parse_fixed_uint(text, 0, 4, year)) return fail();
  if (text[4] != '-') return fail();
  if (!detail::parse_fixed_uint(text, 5, 2, month)) return fail();
  if (text[7] != '-') return fail();
  if (!detail::parse_fixed_uint(text, 8, 2, day)) return fail();
  if (text[10] != 'T' && text[10] != ' ') return fail();
  if (!detail::parse_fixed_uint(text, 11, 2, hour)) return fail();

  std::size_t pos = 13;
  for (int part = 0; part < 2 && pos < text.size() && text[pos] == ':'; ++part) {
    unsigned v = 0;
    if (!detail::parse_fixed_uint(text, pos + 1, 2, v)) return fail();
    if (v != 0) return fail();  // sub-hour precision is out of scope
    pos += 3;
  }
  if (pos < text.size() && text[pos] == 'Z') ++pos;
  if (pos != text.size()) return fail();

  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23) return fail();
  return detail::days_from_civil(static_cast<std::int64_t>(year), month, day) * 24 +
         static_cast<std::int64_t>(hour);
}

inline std::string format_hour(HourStamp t) {
  std::int64_t days = t / 24;
  std::int64_t h = t % 24;
  if (h < 0) {
    h += 24;
    days -= 1;
  }
  std::int64_t y = 0;
  unsigned m = 0, d = 0;
  detail::civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02u:00:00Z",
                static_cast<long long>(y), m, d, static_cast<unsigned>(h));
  return std::string(buf);
}

}  // namespace drcast
