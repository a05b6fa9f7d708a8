#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mob2vec/types.hpp"

namespace mob2vec {

using Token = Symbol;

enum class Architecture { kDbow, kDm };
enum class Fusion { kSep, kSim };

struct TrainingConfig {
  std::size_t dim = 128;
  int epochs = 50;
  double initial_lr = 0.025;
  double final_lr = 1e-4;
  int negatives = 5;
  /// Noise distribution is proportional to count^noise_exponent.
  double noise_exponent = 0.75;
  /// PV-DM context: tokens on each side of the target.
  int window = 5;
  std::uint64_t seed = 1;
  Architecture mode = Architecture::kDbow;
  Fusion fusion = Fusion::kSep;
  /// 1 = deterministic; more workers apply unsynchronized updates.
  int threads = 1;

  void validate() const;
};

/// Dense row-major float matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// Tokens with corpus frequencies, indexed densely in order of first appearance.
class Vocabulary {
 public:
  std::size_t add(Token token, std::uint64_t count = 1);
  std::optional<std::size_t> find(Token token) const;
  std::size_t size() const { return tokens_.size(); }
  Token token(std::size_t index) const { return tokens_[index]; }
  std::uint64_t count(std::size_t index) const { return counts_[index]; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.counts_ == b.counts_;
  }

 private:
  std::vector<Token> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<Token, std::size_t> index_;
};

/// A sequence identified by a string id (e.g. `user#week`).
struct Document {
  std::string id;
  std::vector<Token> tokens;
};

struct EmbeddingModel {
  TrainingConfig config;
  Vocabulary vocabulary;
  std::vector<std::string> sequence_ids;
  Matrix sequence_vectors;
  /// Context input vectors; only populated for PV-DM.
  Matrix token_input;
  Matrix token_output;
  /// Mean loss per positive pair, one entry per epoch.
  std::vector<double> epoch_loss;
  std::size_t skipped_empty = 0;

  std::optional<std::size_t> sequence_index(const std::string& id) const;
  std::span<const float> vector(const std::string& id) const;
};

/// Distributed bag of words: the sequence vector predicts each of its tokens.
EmbeddingModel train_pvdbow(std::span<const Document> corpus, TrainingConfig config);

/// Distributed memory: the mean of the sequence vector and the surrounding
/// context vectors predicts the centre token.
EmbeddingModel train_pvdm(std::span<const Document> corpus, TrainingConfig config);

/// Dispatches on `config.mode`.
EmbeddingModel train(std::span<const Document> corpus, const TrainingConfig& config);

/// Initial sequence vector used before any update, seeded per sequence.
std::vector<float> initial_vector(std::size_t dim, std::uint64_t seed, std::uint64_t stream);

/// Fits a fresh sequence vector against frozen token vectors. Unknown tokens
/// are dropped; throws DataError when none remain.
std::vector<float> infer_vector(const EmbeddingModel& model, std::span<const Token> tokens, int epochs,
                                std::uint64_t seed);

/// Componentwise mean of equally sized vectors.
std::vector<float> aggregate_user(std::span<const std::vector<float>> weekly_vectors);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

}  // namespace mob2vec
