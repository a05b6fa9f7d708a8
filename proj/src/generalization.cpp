#include "mob2vec/generalization.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "mob2vec/errors.hpp"

namespace mob2vec {

RankTrajectory to_rank(const SummaryTrajectory& summary) {
  if (summary.segments.empty()) throw DataError("to_rank: summary trajectory has no segments");

  struct Tally {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::map<SymbolicLocation, Tally> tallies;
  for (std::size_t i = 0; i < summary.segments.size(); ++i) {
    auto [it, inserted] = tallies.try_emplace(summary.segments[i].location, Tally{0, i});
    it->second.count += 1;
  }

  std::vector<std::pair<SymbolicLocation, Tally>> order(tallies.begin(), tallies.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first < b.second.first;
  });

  RankTrajectory out;
  out.user_id = summary.user_id;
  std::map<SymbolicLocation, Symbol> rank_of;
  for (std::size_t r = 0; r < order.size(); ++r) {
    rank_of.emplace(order[r].first, static_cast<Symbol>(r + 1));
    out.locations.push_back(order[r].first);
  }
  out.segments.reserve(summary.segments.size());
  for (const auto& seg : summary.segments) out.segments.push_back({seg.interval, rank_of.at(seg.location)});
  return out;
}

int WeekCalendar::week_of(Timestamp t) const {
  if (t < first_monday || t >= end()) return 0;
  return static_cast<int>((t - first_monday) / kSecondsPerWeek) + 1;
}

WeekCalendar trim_to_weeks(const Interval& period, const TimeZone& zone) {
  const Timestamp first = next_monday(period.start, zone);
  const Timestamp last = previous_monday(period.end, zone);
  if (last <= first) throw DataError("observation period shorter than one whole week");
  return {first, static_cast<int>((last - first) / kSecondsPerWeek), zone};
}

Interval dataset_period(const std::vector<CdrTrajectory>& trajectories) {
  Timestamp lo = std::numeric_limits<Timestamp>::max();
  Timestamp hi = std::numeric_limits<Timestamp>::min();
  for (const auto& t : trajectories) {
    for (const auto& e : t.events) {
      lo = std::min(lo, e.timestamp);
      hi = std::max(hi, e.timestamp);
    }
  }
  if (lo > hi) throw DataError("dataset_period: no events");
  return {lo, hi + 1};
}

std::vector<WeeklyTrajectory> split_weeks(const RankTrajectory& rank, const WeekCalendar& calendar) {
  if (calendar.weeks < 1) throw DataError("split_weeks: calendar shorter than one week");
  std::vector<WeeklyTrajectory> weeks(static_cast<std::size_t>(calendar.weeks));
  for (int j = 0; j < calendar.weeks; ++j) {
    weeks[static_cast<std::size_t>(j)].user_id = rank.user_id;
    weeks[static_cast<std::size_t>(j)].week_index = j + 1;
  }
  for (const auto& seg : rank.segments) {
    const int w = calendar.week_of(seg.interval.start);
    if (w > 0) weeks[static_cast<std::size_t>(w - 1)].ranks.push_back(seg.rank);
  }
  return weeks;
}

}  // namespace mob2vec
