#pragma once

#include <iosfwd>
#include <map>
#include <vector>

#include "mob2vec/generalization.hpp"
#include "mob2vec/reduction.hpp"
#include "mob2vec/types.hpp"

namespace mob2vec {

/// JSON lines: `{"user", "segments": [[start, end, label], ...], "local_noise", "transitions"}`.
void write_summaries(std::ostream& out, const std::vector<SummaryTrajectory>& summaries);

/// Segments only; member indices and noise events are not stored.
std::vector<SummaryTrajectory> read_summaries(std::istream& in);

/// JSON lines: `{"user", "segments": [[start, end, rank], ...], "locations": [label, ...]}`.
void write_rank_trajectories(std::ostream& out, const std::vector<RankTrajectory>& ranks);
std::vector<RankTrajectory> read_rank_trajectories(std::istream& in);

/// `user_id<TAB>week_index<TAB>r1 r2 ...` per weekly trajectory, empty weeks included.
void write_weekly(std::ostream& out, const std::map<UserId, std::vector<WeeklyTrajectory>>& weeks);
std::map<UserId, std::vector<WeeklyTrajectory>> read_weekly(std::istream& in);

/// `id<TAB>v1 v2 ...` with enough digits to restore each float exactly.
void write_vectors(std::ostream& out, const std::map<UserId, std::vector<float>>& vectors);
std::map<UserId, std::vector<float>> read_vectors(std::istream& in);

/// CSV `user_id,x,y` with a header line; coordinates round-trip exactly.
void write_layout(std::ostream& out, const std::vector<UserId>& users, const PointMatrix& layout);
std::pair<std::vector<UserId>, PointMatrix> read_layout(std::istream& in);

}  // namespace mob2vec
