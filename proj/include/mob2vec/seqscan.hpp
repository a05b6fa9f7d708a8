#pragma once

#include <cstddef>

#include "mob2vec/types.hpp"

namespace mob2vec {

/// Relevance model of the discrete segmentation.
struct SeqScanParams {
  /// Minimum occurrences of the representative symbol in a segment.
  std::size_t min_occurrences = 4;
  /// Minimum cumulative presence of the representative symbol, seconds.
  Timestamp min_presence = 15 * 60;

  void validate() const;
};

/// Segments a symbolic trajectory into relevant locations.
///
/// Presence of a symbol in a window is the summed duration of its maximal runs
/// of consecutive events. A window anchored at an event of symbol `l` grows
/// event by event while `l` stays dominant: no other symbol has more presence
/// (or equal presence and more occurrences), and no other symbol forms a valid
/// cluster by itself inside an `l`-free stretch of the window. The window ends
/// at the last `l` event before dominance is lost and is accepted when `l` has
/// at least `min_occurrences` events and `min_presence` presence in it.
///
/// Scanning starts at the first unconsumed event and takes the earliest anchor
/// with an accepted window. Skipped events become transitions; non-`l` events
/// inside a window become local noise.
SummaryTrajectory segment(const CdrTrajectory& trajectory, const SeqScanParams& params = {});

/// One segment per raw event: the summarization-free baseline.
SummaryTrajectory unsummarized(const CdrTrajectory& trajectory);

}  // namespace mob2vec
