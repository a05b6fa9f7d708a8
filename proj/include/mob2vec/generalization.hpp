#pragma once

#include <vector>

#include "mob2vec/types.hpp"

namespace mob2vec {

/// Replaces segment locations by their frequency rank within the trajectory.
/// Rank 1 is the most frequent location; equal counts get increasing ranks in
/// order of first appearance. Throws DataError on a summary without segments.
RankTrajectory to_rank(const SummaryTrajectory& summary);

/// Whole Monday-to-Sunday weeks shared by every user of a dataset.
struct WeekCalendar {
  Timestamp first_monday = 0;  ///< local Monday 00:00
  int weeks = 0;
  TimeZone zone;

  Timestamp end() const { return first_monday + weeks * kSecondsPerWeek; }
  /// 1-based week index of `t`, or 0 when outside the calendar.
  int week_of(Timestamp t) const;
};

/// Shortens [period.start, period.end) to whole weeks. Throws DataError when
/// less than one week remains.
WeekCalendar trim_to_weeks(const Interval& period, const TimeZone& zone);

/// Observation period spanning every event of the dataset (end exclusive).
Interval dataset_period(const std::vector<CdrTrajectory>& trajectories);

/// Assigns each segment to the week containing its start; always returns
/// `calendar.weeks` entries, empty when the user was silent that week.
std::vector<WeeklyTrajectory> split_weeks(const RankTrajectory& rank, const WeekCalendar& calendar);

}  // namespace mob2vec
