#include "mob2vec/seqscan.hpp"

#include <unordered_map>

#include "mob2vec/errors.hpp"

namespace mob2vec {

void SeqScanParams::validate() const {
  if (min_occurrences < 1) throw ConfigError("seqscan: N must be >= 1");
  if (min_presence < 0) throw ConfigError("seqscan: delta must be >= 0");
}

namespace {

struct SymbolStats {
  std::size_t count = 0;
  Timestamp presence = 0;
};

struct Window {
  std::size_t end = 0;  // index of the last anchor-symbol event
  SymbolStats anchor;
};

// Grows a window anchored at `start`; returns the window ending at the last
// anchor event before dominance is lost.
Window grow(const std::vector<Symbol>& symbols, const std::vector<Timestamp>& times,
            std::size_t start, const SeqScanParams& params) {
  const Symbol anchor = symbols[start];
  std::unordered_map<Symbol, SymbolStats> window_stats;
  std::unordered_map<Symbol, SymbolStats> gap_stats;

  SymbolStats anchor_stats{1, 0};
  Window best{start, anchor_stats};

  for (std::size_t i = start + 1; i < symbols.size(); ++i) {
    const Symbol s = symbols[i];
    const bool continues_run = symbols[i - 1] == s;
    const Timestamp step = times[i] - times[i - 1];
    if (s == anchor) {
      anchor_stats.count += 1;
      if (continues_run) anchor_stats.presence += step;
      gap_stats.clear();
      best = {i, anchor_stats};
      continue;
    }
    auto& w = window_stats[s];
    w.count += 1;
    if (continues_run) w.presence += step;
    if (w.presence > anchor_stats.presence ||
        (w.presence == anchor_stats.presence && w.count > anchor_stats.count)) {
      break;
    }
    auto& g = gap_stats[s];
    g.count += 1;
    if (continues_run) g.presence += step;
    if (g.count >= params.min_occurrences && g.presence >= params.min_presence) break;
  }
  return best;
}

}  // namespace

SummaryTrajectory segment(const CdrTrajectory& trajectory, const SeqScanParams& params) {
  params.validate();
  if (trajectory.events.empty()) throw DataError("segment: empty trajectory");

  const auto& events = trajectory.events;
  const std::size_t n = events.size();
  std::vector<Symbol> symbols(n);
  std::vector<Timestamp> times(n);
  {
    std::unordered_map<std::string, Symbol> ids;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, _] = ids.emplace(events[i].location.label(), static_cast<Symbol>(ids.size()));
      symbols[i] = it->second;
      times[i] = events[i].timestamp;
    }
  }

  SummaryTrajectory out;
  out.user_id = trajectory.user_id;
  std::size_t cursor = 0;
  for (std::size_t start = 0; start < n; ++start) {
    const Window w = grow(symbols, times, start, params);
    if (w.anchor.count < params.min_occurrences || w.anchor.presence < params.min_presence) continue;

    for (std::size_t i = cursor; i < start; ++i) out.noise_events.push_back({i, NoiseKind::kTransition});
    SummarySegment seg;
    seg.location = events[start].location;
    seg.interval = {times[start], times[w.end]};
    for (std::size_t i = start; i <= w.end; ++i) {
      if (symbols[i] == symbols[start]) {
        seg.members.push_back(i);
      } else {
        out.noise_events.push_back({i, NoiseKind::kLocal});
      }
    }
    out.segments.push_back(std::move(seg));
    cursor = w.end + 1;
    start = w.end;
  }
  for (std::size_t i = cursor; i < n; ++i) out.noise_events.push_back({i, NoiseKind::kTransition});
  return out;
}

SummaryTrajectory unsummarized(const CdrTrajectory& trajectory) {
  SummaryTrajectory out;
  out.user_id = trajectory.user_id;
  out.segments.reserve(trajectory.events.size());
  for (std::size_t i = 0; i < trajectory.events.size(); ++i) {
    const auto& e = trajectory.events[i];
    out.segments.push_back({{e.timestamp, e.timestamp}, e.location, {i}});
  }
  return out;
}

}  // namespace mob2vec
