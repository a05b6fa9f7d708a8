#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mob2vec/embedding.hpp"
#include "mob2vec/patterns.hpp"

namespace mob2vec {

/// Pattern ids live in their own token range so SIM can mix them with symbols.
inline constexpr Token kPatternTokenBase = Token{1} << 48;
inline Token pattern_token(PatternId id) { return kPatternTokenBase + static_cast<Token>(id); }

/// Sequence embeddings fused from a symbol model and a pattern model.
struct Sqn2VecModel {
  TrainingConfig config;
  /// SEP: trained on symbols only. SIM: trained on symbols followed by patterns.
  EmbeddingModel symbols;
  /// SEP only.
  std::optional<EmbeddingModel> patterns;
  PatternVocabulary vocabulary;

  /// Fused vector of a training sequence.
  std::vector<float> vector(const std::string& id) const;
  std::vector<std::string> sequence_ids() const { return symbols.sequence_ids; }
};

/// Documents of pattern tokens, one per symbol document, same ids.
std::vector<Document> pattern_documents(std::span<const Document> symbol_corpus,
                                        const std::vector<std::vector<PatternId>>& sets);

/// Trains SEP (two models, averaged) or SIM (one model over concatenated
/// tokens). Throws DataError when the two corpora disagree on sequence ids.
Sqn2VecModel train_sqn2vec(std::span<const Document> symbol_corpus, std::span<const Document> pattern_corpus,
                           PatternVocabulary vocabulary, const TrainingConfig& config);

/// Fused vector per sequence id.
std::map<std::string, std::vector<float>> sqn2vec_embed(std::span<const Document> symbol_corpus,
                                                        std::span<const Document> pattern_corpus,
                                                        const TrainingConfig& config);

/// Infers the fused vector of a new symbol sequence. Its patterns come from
/// the model vocabulary; with none, SEP keeps the seeded initial pattern
/// vector, matching how training treats pattern-free sequences.
std::vector<float> infer_sqn2vec(const Sqn2VecModel& model, std::span<const Symbol> symbols, int epochs,
                                 std::uint64_t seed);

}  // namespace mob2vec
