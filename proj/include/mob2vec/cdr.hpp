#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "mob2vec/types.hpp"

namespace mob2vec {

enum class CdrField { kUser, kTimestamp, kLocation };

struct ParseOptions {
  char delimiter = ',';
  /// Column order of the three fields.
  std::array<CdrField, 3> field_order = {CdrField::kUser, CdrField::kTimestamp,
                                         CdrField::kLocation};
  bool has_header = false;
  TimeZone zone;
  /// Half-open [start, end); events outside are record errors when set.
  std::optional<Interval> observation_period;
};

/// Groups delimited CDR records into per-user trajectories, sorted by user id.
/// Events are ordered by timestamp (ties keep input order) and exact duplicate
/// records are dropped. Throws RecordError on a malformed line.
std::vector<CdrTrajectory> parse_cdr(std::istream& in, const ParseOptions& options = {});

enum class TimestampFormat { kEpoch, kIso8601 };

/// Writes trajectories in the layout `parse_cdr` reads with the same options.
void write_cdr(std::ostream& out, const std::vector<CdrTrajectory>& trajectories,
               const ParseOptions& options = {},
               TimestampFormat format = TimestampFormat::kEpoch);

/// Maps location labels to dense integer ids in order of first appearance.
class LocationDictionary {
 public:
  Symbol intern(const SymbolicLocation& location);
  std::optional<Symbol> find(const SymbolicLocation& location) const;
  std::size_t size() const { return labels_.size(); }
  const SymbolicLocation& label(Symbol id) const { return labels_.at(static_cast<std::size_t>(id)); }

 private:
  std::vector<SymbolicLocation> labels_;
  std::map<SymbolicLocation, Symbol> index_;
};

}  // namespace mob2vec
