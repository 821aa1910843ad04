#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "error.hpp"

namespace enanom {

using Minutes = std::chrono::minutes;
using Timestamp = std::chrono::sys_time<Minutes>;

namespace detail {

inline int parse_fixed_int(std::string_view text, std::size_t pos, std::size_t width,
                           std::string_view whole) {
  if (pos + width > text.size()) {
    throw ValidationError("truncated timestamp '" + std::string(whole) + "'");
  }
  int value = 0;
  for (std::size_t i = pos; i < pos + width; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') {
      throw ValidationError("bad digit in timestamp '" + std::string(whole) + "'");
    }
    value = value * 10 + (c - '0');
  }
  return value;
}

inline void expect_char(std::string_view text, std::size_t pos, std::string_view allowed,
                        std::string_view whole) {
  if (pos >= text.size() || allowed.find(text[pos]) == std::string_view::npos) {
    throw ValidationError("malformed timestamp '" + std::string(whole) + "'");
  }
}

}  // namespace detail

// Parses "YYYY-MM-DD[T| ]HH:MM[:SS][Z|+HH:MM|-HH:MM|+HHMM]" into a UTC minute timestamp.
// Seconds must be zero. A trailing offset is subtracted so the result is UTC;
// `default_offset` applies when the text carries none.
inline Timestamp parse_timestamp(std::string_view text, Minutes default_offset = Minutes{0}) {
  using namespace std::chrono;
  const std::string_view whole = text;
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }

  const int y = detail::parse_fixed_int(text, 0, 4, whole);
  detail::expect_char(text, 4, "-", whole);
  const int mo = detail::parse_fixed_int(text, 5, 2, whole);
  detail::expect_char(text, 7, "-", whole);
  const int d = detail::parse_fixed_int(text, 8, 2, whole);

  int hh = 0;
  int mm = 0;
  std::size_t pos = 10;
  if (pos < text.size()) {
    detail::expect_char(text, pos, "T ", whole);
    hh = detail::parse_fixed_int(text, pos + 1, 2, whole);
    detail::expect_char(text, pos + 3, ":", whole);
    mm = detail::parse_fixed_int(text, pos + 4, 2, whole);
    pos += 6;
    if (pos < text.size() && text[pos] == ':') {
      const int ss = detail::parse_fixed_int(text, pos + 1, 2, whole);
      if (ss != 0) {
        throw ValidationError("timestamp '" + std::string(whole) + "' is not on a whole minute");
      }
      pos += 3;
    }
  }

  Minutes offset = default_offset;
  if (pos < text.size()) {
    const char sign = text[pos];
    if (sign == 'Z' && pos + 1 == text.size()) {
      offset = Minutes{0};
    } else if (sign == '+' || sign == '-') {
      const int oh = detail::parse_fixed_int(text, pos + 1, 2, whole);
      std::size_t mpos = pos + 3;
      if (mpos < text.size() && text[mpos] == ':') ++mpos;
      const int om = detail::parse_fixed_int(text, mpos, 2, whole);
      if (mpos + 2 != text.size()) {
        throw ValidationError("malformed timestamp offset in '" + std::string(whole) + "'");
      }
      offset = Minutes{(sign == '-' ? -1 : 1) * (oh * 60 + om)};
    } else {
      throw ValidationError("malformed timestamp '" + std::string(whole) + "'");
    }
  }

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59) {
    throw ValidationError("invalid calendar value in timestamp '" + std::string(whole) + "'");
  }
  return Timestamp{sys_days{ymd}} + hours{hh} + Minutes{mm} - offset;
}

// Formats as "YYYY-MM-DDTHH:MM" (UTC).
inline std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto day_start = floor<days>(ts);
  const year_month_day ymd{day_start};
  const auto minute_of_day = (ts - day_start).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(minute_of_day / 60), static_cast<int>(minute_of_day % 60));
  return buf;
}

inline std::chrono::sys_days calendar_day(Timestamp ts) {
  return std::chrono::floor<std::chrono::days>(ts);
}

// 0..23
inline int hour_of_day(Timestamp ts) {
  return static_cast<int>((ts - calendar_day(ts)).count() / 60);
}

// 1-based: Jan 1 is day 1.
inline int day_of_year(Timestamp ts) {
  using namespace std::chrono;
  const year_month_day ymd{calendar_day(ts)};
  const sys_days jan1{ymd.year() / January / 1};
  return static_cast<int>((calendar_day(ts) - jan1).count()) + 1;
}

inline int days_in_year(Timestamp ts) {
  const std::chrono::year_month_day ymd{calendar_day(ts)};
  return ymd.year().is_leap() ? 366 : 365;
}

// ISO weekday numbering shifted to 0 = Monday .. 6 = Sunday.
inline int weekday_index(Timestamp ts) {
  const std::chrono::weekday wd{calendar_day(ts)};
  return static_cast<int>(wd.iso_encoding()) - 1;
}

}  // namespace enanom
