#include "mob2vec/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "mob2vec/errors.hpp"

namespace mob2vec {

void MiningParams::validate() const {
  if (!(min_support > 0.0 && min_support <= 1.0)) throw ConfigError("mining: min_support must be in (0, 1]");
  if (gap < 0) throw ConfigError("mining: gap must be >= 0");
  if (max_pattern_length < 1) throw ConfigError("mining: max_pattern_length must be >= 1");
}

namespace {

using Positions = std::vector<std::uint32_t>;

// Positions where `next` can extend an occurrence ending at any of `ends`.
Positions extend(std::span<const Symbol> seq, const Positions& ends, Symbol next, int gap) {
  Positions out;
  std::size_t covered = 0;  // first index not yet examined
  for (const auto e : ends) {
    const std::size_t lo = std::max<std::size_t>(e + 1, covered);
    const std::size_t hi = std::min<std::size_t>(e + static_cast<std::size_t>(gap) + 1, seq.size() - 1);
    for (std::size_t j = lo; j <= hi && j < seq.size(); ++j) {
      if (seq[j] == next) out.push_back(static_cast<std::uint32_t>(j));
    }
    covered = std::max(covered, hi + 1);
  }
  return out;
}

Positions occurrences(std::span<const Symbol> seq, Symbol s) {
  Positions out;
  for (std::size_t j = 0; j < seq.size(); ++j) {
    if (seq[j] == s) out.push_back(static_cast<std::uint32_t>(j));
  }
  return out;
}

struct Projection {
  std::uint32_t sequence;
  Positions ends;
};

class Miner {
 public:
  Miner(std::span<const SymbolSequence> corpus, const MiningParams& params)
      : corpus_(corpus), params_(params), sets_(corpus.size()) {
    const double need = params.min_support * static_cast<double>(corpus.size());
    min_count_ = static_cast<std::size_t>(std::ceil(need - 1e-9));
    if (min_count_ < 1) min_count_ = 1;
  }

  MiningResult run() {
    std::map<Symbol, std::vector<Projection>> roots;
    for (std::uint32_t i = 0; i < corpus_.size(); ++i) {
      std::vector<Symbol> seen(corpus_[i].begin(), corpus_[i].end());
      std::sort(seen.begin(), seen.end());
      seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
      for (const auto s : seen) roots[s].push_back({i, occurrences(corpus_[i], s)});
    }
    SymbolSequence prefix;
    for (auto& [symbol, projection] : roots) visit(prefix, symbol, projection);

    MiningResult result;
    result.vocabulary = PatternVocabulary(std::move(patterns_), params_.gap);
    result.sequence_patterns = std::move(sets_);
    return result;
  }

 private:
  void visit(SymbolSequence& prefix, Symbol symbol, const std::vector<Projection>& projection) {
    if (projection.size() < min_count_) return;
    prefix.push_back(symbol);
    const PatternId id = patterns_.size();
    patterns_.push_back({prefix, id});
    for (const auto& p : projection) sets_[p.sequence].push_back(id);

    if (prefix.size() < params_.max_pattern_length) {
      std::map<Symbol, std::vector<Projection>> children;
      for (const auto& p : projection) {
        const auto& seq = corpus_[p.sequence];
        std::map<Symbol, Positions> next;
        std::size_t covered = 0;
        for (const auto e : p.ends) {
          const std::size_t lo = std::max<std::size_t>(e + 1, covered);
          const std::size_t hi = std::min<std::size_t>(e + static_cast<std::size_t>(params_.gap) + 1, seq.size());
          for (std::size_t j = lo; j < hi + 1 && j < seq.size(); ++j) next[seq[j]].push_back(static_cast<std::uint32_t>(j));
          covered = std::max(covered, hi + 1);
        }
        for (auto& [s, ends] : next) children[s].push_back({p.sequence, std::move(ends)});
      }
      for (auto& [s, child] : children) visit(prefix, s, child);
    }
    prefix.pop_back();
  }

  std::span<const SymbolSequence> corpus_;
  MiningParams params_;
  std::size_t min_count_ = 1;
  std::vector<GapPattern> patterns_;
  std::vector<std::vector<PatternId>> sets_;
};

}  // namespace

bool contains_pattern(std::span<const Symbol> sequence, std::span<const Symbol> pattern, int gap) {
  if (pattern.empty()) throw DataError("contains_pattern: empty pattern");
  Positions ends = occurrences(sequence, pattern.front());
  for (std::size_t k = 1; k < pattern.size() && !ends.empty(); ++k) {
    ends = extend(sequence, ends, pattern[k], gap);
  }
  return !ends.empty();
}

PatternVocabulary::PatternVocabulary(std::vector<GapPattern> patterns, int gap)
    : patterns_(std::move(patterns)), gap_(gap) {
  for (std::size_t i = 0; i < patterns_.size(); ++i) {
    if (patterns_[i].id != i) throw DataError("pattern vocabulary ids must be 0..n-1 in order");
    if (patterns_[i].symbols.empty()) throw DataError("pattern vocabulary contains an empty pattern");
  }
  build_trie();
}

void PatternVocabulary::build_trie() {
  trie_.assign(1, Node{});
  for (const auto& p : patterns_) {
    std::size_t node = 0;
    for (const auto s : p.symbols) {
      auto it = trie_[node].children.find(s);
      if (it == trie_[node].children.end()) {
        trie_.push_back(Node{});
        it = trie_[node].children.emplace(s, trie_.size() - 1).first;
      }
      node = it->second;
    }
    trie_[node].pattern = static_cast<std::ptrdiff_t>(p.id);
  }
}

std::vector<PatternId> PatternVocabulary::annotate(std::span<const Symbol> sequence) const {
  std::vector<PatternId> out;
  if (trie_.empty() || sequence.empty()) return out;
  struct Frame {
    std::size_t node;
    Positions ends;
  };
  std::vector<Frame> stack;
  for (const auto& [s, child] : trie_[0].children) {
    auto ends = occurrences(sequence, s);
    if (!ends.empty()) stack.push_back({child, std::move(ends)});
  }
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (trie_[f.node].pattern >= 0) out.push_back(static_cast<PatternId>(trie_[f.node].pattern));
    for (const auto& [s, child] : trie_[f.node].children) {
      auto ends = extend(sequence, f.ends, s, gap_);
      if (!ends.empty()) stack.push_back({child, std::move(ends)});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void PatternVocabulary::write(std::ostream& out) const {
  for (const auto& p : patterns_) {
    out << p.id << '\t';
    for (std::size_t i = 0; i < p.symbols.size(); ++i) out << (i ? " " : "") << p.symbols[i];
    out << '\n';
  }
}

PatternVocabulary PatternVocabulary::read(std::istream& in, int gap) {
  std::vector<GapPattern> patterns;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw RecordError(line_no, "expected id<TAB>symbols");
    GapPattern p;
    try {
      p.id = std::stoull(line.substr(0, tab));
    } catch (const std::exception&) {
      throw RecordError(line_no, "malformed pattern id");
    }
    std::istringstream symbols(line.substr(tab + 1));
    Symbol s;
    while (symbols >> s) p.symbols.push_back(s);
    if (!symbols.eof()) throw RecordError(line_no, "malformed pattern symbols");
    patterns.push_back(std::move(p));
  }
  return PatternVocabulary(std::move(patterns), gap);
}

MiningResult mine_patterns(std::span<const SymbolSequence> corpus, const MiningParams& params) {
  params.validate();
  if (corpus.empty()) throw DataError("mine_patterns: empty corpus");
  return Miner(corpus, params).run();
}

void write_sequence_patterns(std::ostream& out, const std::vector<std::vector<PatternId>>& sets) {
  for (std::size_t i = 0; i < sets.size(); ++i) {
    out << i << '\t';
    for (std::size_t k = 0; k < sets[i].size(); ++k) out << (k ? " " : "") << sets[i][k];
    out << '\n';
  }
}

}  // namespace mob2vec
