#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mob2vec {

/// Seconds since the Unix epoch (UTC).
using Timestamp = std::int64_t;

inline constexpr Timestamp kSecondsPerDay = 86400;
inline constexpr Timestamp kSecondsPerWeek = 7 * kSecondsPerDay;

/// A fixed offset from UTC; weeks and days are computed in this local time.
struct TimeZone {
  std::int32_t utc_offset_seconds = 0;

  Timestamp to_local(Timestamp t) const { return t + utc_offset_seconds; }
  Timestamp from_local(Timestamp local) const { return local - utc_offset_seconds; }
};

/// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t year, unsigned month, unsigned day);

struct CivilDate {
  std::int64_t year;
  unsigned month;
  unsigned day;
};
CivilDate civil_from_days(std::int64_t days);

/// 0 = Monday ... 6 = Sunday.
int weekday_from_days(std::int64_t days);

/// Parses integer epoch seconds or ISO-8601 `YYYY-MM-DD[T ]HH:MM[:SS][Z|±HH[:MM]]`.
/// Values without an explicit offset are read in `zone`.
std::optional<Timestamp> parse_timestamp(std::string_view text, const TimeZone& zone);

/// ISO-8601 rendering in `zone`, with explicit offset suffix.
std::string format_timestamp(Timestamp t, const TimeZone& zone);

/// First local Monday 00:00 at or after `t`.
Timestamp next_monday(Timestamp t, const TimeZone& zone);

/// Last local Monday 00:00 at or before `t`.
Timestamp previous_monday(Timestamp t, const TimeZone& zone);

}  // namespace mob2vec
