#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "mob2vec/types.hpp"

namespace mob2vec {

struct MiningParams {
  /// Fraction of sequences that must contain a pattern, in (0, 1].
  double min_support = 0.05;
  /// Maximum number of symbols between consecutive pattern symbols.
  int gap = 4;
  std::size_t max_pattern_length = 3;

  void validate() const;
};

using PatternId = std::size_t;

struct GapPattern {
  SymbolSequence symbols;
  PatternId id = 0;

  friend bool operator==(const GapPattern&, const GapPattern&) = default;
};

/// True iff positions i_1 < ... < i_m exist with sequence[i_j] == pattern[j]
/// and i_{j+1} - i_j - 1 <= gap.
bool contains_pattern(std::span<const Symbol> sequence, std::span<const Symbol> pattern, int gap);

/// Patterns indexed by id, with a prefix trie for annotating new sequences.
class PatternVocabulary {
 public:
  PatternVocabulary() = default;
  /// Patterns must be listed by id (0, 1, ...).
  PatternVocabulary(std::vector<GapPattern> patterns, int gap);

  const std::vector<GapPattern>& patterns() const { return patterns_; }
  std::size_t size() const { return patterns_.size(); }
  int gap() const { return gap_; }

  /// Ids of every vocabulary pattern contained in `sequence`, ascending.
  std::vector<PatternId> annotate(std::span<const Symbol> sequence) const;

  void write(std::ostream& out) const;
  static PatternVocabulary read(std::istream& in, int gap);

 private:
  struct Node {
    std::map<Symbol, std::size_t> children;
    std::ptrdiff_t pattern = -1;
  };
  void build_trie();

  std::vector<GapPattern> patterns_;
  std::vector<Node> trie_;
  int gap_ = 0;
};

struct MiningResult {
  PatternVocabulary vocabulary;
  /// Pattern ids contained in each input sequence, ascending.
  std::vector<std::vector<PatternId>> sequence_patterns;
};

/// Depth-first prefix projection of gap-constrained sequential patterns.
/// Pattern ids follow the lexicographic order of symbol lists.
MiningResult mine_patterns(std::span<const SymbolSequence> corpus, const MiningParams& params = {});

/// `seq_id<TAB>id id ...` per sequence.
void write_sequence_patterns(std::ostream& out, const std::vector<std::vector<PatternId>>& sets);

}  // namespace mob2vec
