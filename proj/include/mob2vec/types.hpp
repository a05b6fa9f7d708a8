#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mob2vec/time.hpp"

namespace mob2vec {

using UserId = std::string;

/// An integer token: a rank, a dictionary index, or a pattern id.
using Symbol = std::int64_t;
using SymbolSequence = std::vector<Symbol>;

/// An opaque location label from the symbolic dictionary.
class SymbolicLocation {
 public:
  SymbolicLocation() = default;
  explicit SymbolicLocation(std::string label);

  const std::string& label() const noexcept { return label_; }

  friend auto operator<=>(const SymbolicLocation&, const SymbolicLocation&) = default;

 private:
  std::string label_;
};

struct CdrEvent {
  UserId user_id;
  Timestamp timestamp = 0;
  SymbolicLocation location;

  friend bool operator==(const CdrEvent&, const CdrEvent&) = default;
};

/// Time-ordered events of one user.
struct CdrTrajectory {
  UserId user_id;
  std::vector<CdrEvent> events;

  friend bool operator==(const CdrTrajectory&, const CdrTrajectory&) = default;
};

struct Interval {
  Timestamp start = 0;
  Timestamp end = 0;

  Timestamp duration() const { return end - start; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct SummarySegment {
  Interval interval;
  SymbolicLocation location;
  /// Indices into the source trajectory's events.
  std::vector<std::size_t> members;

  friend bool operator==(const SummarySegment&, const SummarySegment&) = default;
};

enum class NoiseKind { kLocal, kTransition };

struct NoiseEvent {
  std::size_t event_index;
  NoiseKind kind;

  friend bool operator==(const NoiseEvent&, const NoiseEvent&) = default;
};

struct SummaryTrajectory {
  UserId user_id;
  std::vector<SummarySegment> segments;
  std::vector<NoiseEvent> noise_events;

  std::size_t local_noise_count() const;
  std::size_t transition_count() const;

  friend bool operator==(const SummaryTrajectory&, const SummaryTrajectory&) = default;
};

struct RankSegment {
  Interval interval;
  Symbol rank = 0;

  friend bool operator==(const RankSegment&, const RankSegment&) = default;
};

struct RankTrajectory {
  UserId user_id;
  std::vector<RankSegment> segments;
  /// Inverse rank map: `locations[r - 1]` carries rank r.
  std::vector<SymbolicLocation> locations;

  SymbolSequence ranks() const;
  Symbol max_rank() const { return static_cast<Symbol>(locations.size()); }
};

struct WeeklyTrajectory {
  UserId user_id;
  int week_index = 1;
  SymbolSequence ranks;

  friend bool operator==(const WeeklyTrajectory&, const WeeklyTrajectory&) = default;
};

struct CorpusStats {
  std::size_t trajectory_count = 0;
  std::size_t symbol_count = 0;
  std::size_t max_length = 0;
  double avg_length = 0.0;
};

/// Trajectory/symbol/length summary of a corpus; throws DataError when empty.
CorpusStats corpus_stats(std::span<const SymbolSequence> corpus);

}  // namespace mob2vec
