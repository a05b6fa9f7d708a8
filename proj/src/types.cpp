#include "mob2vec/types.hpp"

#include <algorithm>
#include <set>

#include "mob2vec/errors.hpp"

namespace mob2vec {

SymbolicLocation::SymbolicLocation(std::string label) : label_(std::move(label)) {
  if (label_.empty()) throw DataError("empty location label");
}

std::size_t SummaryTrajectory::local_noise_count() const {
  return static_cast<std::size_t>(std::count_if(noise_events.begin(), noise_events.end(),
                                                [](const NoiseEvent& n) { return n.kind == NoiseKind::kLocal; }));
}

std::size_t SummaryTrajectory::transition_count() const {
  return noise_events.size() - local_noise_count();
}

SymbolSequence RankTrajectory::ranks() const {
  SymbolSequence out;
  out.reserve(segments.size());
  for (const auto& s : segments) out.push_back(s.rank);
  return out;
}

CorpusStats corpus_stats(std::span<const SymbolSequence> corpus) {
  if (corpus.empty()) throw DataError("corpus_stats: empty corpus");
  CorpusStats stats;
  std::set<Symbol> symbols;
  std::size_t total = 0;
  for (const auto& seq : corpus) {
    symbols.insert(seq.begin(), seq.end());
    total += seq.size();
    stats.max_length = std::max(stats.max_length, seq.size());
  }
  stats.trajectory_count = corpus.size();
  stats.symbol_count = symbols.size();
  stats.avg_length = static_cast<double>(total) / static_cast<double>(corpus.size());
  return stats;
}

}  // namespace mob2vec
