#include "mob2vec/sqn2vec.hpp"

#include <set>

#include "mob2vec/errors.hpp"
#include "mob2vec/rng.hpp"

namespace mob2vec {

namespace {

std::vector<float> average(std::span<const float> a, std::span<const float> b) {
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] + b[i]) / 2.0f;
  return out;
}

void check_same_ids(std::span<const Document> a, std::span<const Document> b) {
  if (a.size() != b.size()) throw DataError("sqn2vec: symbol and pattern corpora differ in size");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].id != b[i].id) throw DataError("sqn2vec: sequence id mismatch '" + a[i].id + "' vs '" + b[i].id + "'");
  }
}

}  // namespace

std::vector<float> Sqn2VecModel::vector(const std::string& id) const {
  const auto v1 = symbols.vector(id);
  if (config.fusion == Fusion::kSim || !patterns) return {v1.begin(), v1.end()};
  return average(v1, patterns->vector(id));
}

std::vector<Document> pattern_documents(std::span<const Document> symbol_corpus,
                                        const std::vector<std::vector<PatternId>>& sets) {
  if (symbol_corpus.size() != sets.size()) throw DataError("pattern_documents: size mismatch");
  std::vector<Document> out;
  out.reserve(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    Document d{symbol_corpus[i].id, {}};
    d.tokens.reserve(sets[i].size());
    for (const auto p : sets[i]) d.tokens.push_back(pattern_token(p));
    out.push_back(std::move(d));
  }
  return out;
}

Sqn2VecModel train_sqn2vec(std::span<const Document> symbol_corpus, std::span<const Document> pattern_corpus,
                           PatternVocabulary vocabulary, const TrainingConfig& config) {
  config.validate();
  check_same_ids(symbol_corpus, pattern_corpus);
  {
    std::set<std::string> unique;
    for (const auto& d : symbol_corpus) {
      if (!unique.insert(d.id).second) throw DataError("sqn2vec: duplicate sequence id '" + d.id + "'");
    }
  }

  Sqn2VecModel model;
  model.config = config;
  model.vocabulary = std::move(vocabulary);
  if (config.fusion == Fusion::kSep) {
    model.symbols = train(symbol_corpus, config);
    TrainingConfig pattern_config = config;
    pattern_config.seed = derive_seed(config.seed, 2);
    model.patterns = train(pattern_corpus, pattern_config);
  } else {
    std::vector<Document> joint;
    joint.reserve(symbol_corpus.size());
    for (std::size_t i = 0; i < symbol_corpus.size(); ++i) {
      Document d = symbol_corpus[i];
      d.tokens.insert(d.tokens.end(), pattern_corpus[i].tokens.begin(), pattern_corpus[i].tokens.end());
      joint.push_back(std::move(d));
    }
    model.symbols = train(joint, config);
  }
  return model;
}

std::map<std::string, std::vector<float>> sqn2vec_embed(std::span<const Document> symbol_corpus,
                                                        std::span<const Document> pattern_corpus,
                                                        const TrainingConfig& config) {
  const auto model = train_sqn2vec(symbol_corpus, pattern_corpus, PatternVocabulary{}, config);
  std::map<std::string, std::vector<float>> out;
  for (const auto& id : model.sequence_ids()) out.emplace(id, model.vector(id));
  return out;
}

std::vector<float> infer_sqn2vec(const Sqn2VecModel& model, std::span<const Symbol> symbols, int epochs,
                                 std::uint64_t seed) {
  const auto ids = model.vocabulary.annotate(symbols);
  std::vector<Token> pattern_tokens;
  pattern_tokens.reserve(ids.size());
  for (const auto p : ids) pattern_tokens.push_back(pattern_token(p));

  if (model.config.fusion == Fusion::kSim) {
    std::vector<Token> joint(symbols.begin(), symbols.end());
    joint.insert(joint.end(), pattern_tokens.begin(), pattern_tokens.end());
    return infer_vector(model.symbols, joint, epochs, seed);
  }
  const auto v1 = infer_vector(model.symbols, symbols, epochs, seed);
  bool any_known = false;
  for (const auto t : pattern_tokens) any_known = any_known || model.patterns->vocabulary.find(t).has_value();
  const auto v2 = any_known ? infer_vector(*model.patterns, pattern_tokens, epochs, derive_seed(seed, 2))
                            : initial_vector(model.config.dim, derive_seed(seed, 2), 0);
  return average(v1, v2);
}

}  // namespace mob2vec
