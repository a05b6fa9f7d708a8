#include "mob2vec/time.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

namespace mob2vec {

// Howard Hinnant's civil-calendar algorithms.
std::int64_t days_from_civil(std::int64_t year, unsigned month, unsigned day) {
  year -= month <= 2 ? 1 : 0;
  const std::int64_t era = (year >= 0 ? year : year - 399) / 400;
  const auto yoe = static_cast<unsigned>(year - era * 400);
  const unsigned doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t days) {
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const auto doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {m <= 2 ? y + 1 : y, m, d};
}

int weekday_from_days(std::int64_t days) {
  // 1970-01-01 was a Thursday (index 3).
  const std::int64_t w = (days + 3) % 7;
  return static_cast<int>(w < 0 ? w + 7 : w);
}

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

bool read_digits(std::string_view text, std::size_t& pos, std::size_t count, int& value) {
  if (pos + count > text.size()) return false;
  value = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const char c = text[pos + i];
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    value = value * 10 + (c - '0');
  }
  pos += count;
  return true;
}

bool expect(std::string_view text, std::size_t& pos, char c) {
  if (pos < text.size() && text[pos] == c) {
    ++pos;
    return true;
  }
  return false;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text, const TimeZone& zone) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;

  const bool all_digits = text.find_first_not_of("0123456789", text.front() == '-' ? 1 : 0) ==
                          std::string_view::npos;
  if (all_digits) {
    Timestamp value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
  }

  std::size_t pos = 0;
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!read_digits(text, pos, 4, year) || !expect(text, pos, '-') ||
      !read_digits(text, pos, 2, month) || !expect(text, pos, '-') ||
      !read_digits(text, pos, 2, day)) {
    return std::nullopt;
  }
  if (month < 1 || month > 12 || day < 1 || day > 31) return std::nullopt;
  if (!(expect(text, pos, 'T') || expect(text, pos, ' '))) return std::nullopt;
  if (!read_digits(text, pos, 2, hour) || !expect(text, pos, ':') ||
      !read_digits(text, pos, 2, minute)) {
    return std::nullopt;
  }
  if (expect(text, pos, ':') && !read_digits(text, pos, 2, second)) return std::nullopt;
  if (hour > 23 || minute > 59 || second > 60) return std::nullopt;

  std::optional<std::int32_t> offset;
  if (pos < text.size()) {
    if (expect(text, pos, 'Z')) {
      offset = 0;
    } else if (text[pos] == '+' || text[pos] == '-') {
      const int sign = text[pos] == '-' ? -1 : 1;
      ++pos;
      int oh = 0, om = 0;
      if (!read_digits(text, pos, 2, oh)) return std::nullopt;
      expect(text, pos, ':');
      if (pos < text.size() && !read_digits(text, pos, 2, om)) return std::nullopt;
      offset = sign * (oh * 3600 + om * 60);
    } else {
      return std::nullopt;
    }
  }
  if (pos != text.size()) return std::nullopt;

  // Reject dates such as 2021-02-30.
  const auto days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  const auto round_trip = civil_from_days(days);
  if (round_trip.month != static_cast<unsigned>(month) || round_trip.day != static_cast<unsigned>(day)) {
    return std::nullopt;
  }
  const Timestamp local = days * kSecondsPerDay + hour * 3600 + minute * 60 + second;
  return local - offset.value_or(zone.utc_offset_seconds);
}

std::string format_timestamp(Timestamp t, const TimeZone& zone) {
  const Timestamp local = zone.to_local(t);
  const std::int64_t days = floor_div(local, kSecondsPerDay);
  const std::int64_t secs = local - days * kSecondsPerDay;
  const auto date = civil_from_days(days);
  const int off = zone.utc_offset_seconds;
  const int off_abs = off < 0 ? -off : off;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lld%c%02d:%02d",
                static_cast<long long>(date.year), date.month, date.day,
                static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                static_cast<long long>(secs % 60), off < 0 ? '-' : '+', off_abs / 3600,
                off_abs / 60 % 60);
  return buf;
}

Timestamp previous_monday(Timestamp t, const TimeZone& zone) {
  const std::int64_t days = floor_div(zone.to_local(t), kSecondsPerDay);
  const std::int64_t monday = days - weekday_from_days(days);
  return zone.from_local(monday * kSecondsPerDay);
}

Timestamp next_monday(Timestamp t, const TimeZone& zone) {
  const Timestamp prev = previous_monday(t, zone);
  return prev == t ? t : prev + kSecondsPerWeek;
}

}  // namespace mob2vec
