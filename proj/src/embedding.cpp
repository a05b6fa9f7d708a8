#include "mob2vec/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <thread>

#include <Eigen/Core>

#include "mob2vec/errors.hpp"
#include "mob2vec/loss.hpp"
#include "mob2vec/rng.hpp"

namespace mob2vec {

void TrainingConfig::validate() const {
  if (dim < 1) throw ConfigError("training: dim must be >= 1");
  if (epochs < 1) throw ConfigError("training: epochs must be >= 1");
  if (!(initial_lr > final_lr && final_lr >= 0.0)) throw ConfigError("training: need initial_lr > final_lr >= 0");
  if (negatives < 1) throw ConfigError("training: negatives must be >= 1");
  if (window < 1) throw ConfigError("training: window must be >= 1");
  if (threads < 1) throw ConfigError("training: threads must be >= 1");
}

std::size_t Vocabulary::add(Token token, std::uint64_t count) {
  auto [it, inserted] = index_.emplace(token, tokens_.size());
  if (inserted) {
    tokens_.push_back(token);
    counts_.push_back(0);
  }
  counts_[it->second] += count;
  return it->second;
}

std::optional<std::size_t> Vocabulary::find(Token token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> EmbeddingModel::sequence_index(const std::string& id) const {
  const auto it = std::find(sequence_ids.begin(), sequence_ids.end(), id);
  if (it == sequence_ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - sequence_ids.begin());
}

std::span<const float> EmbeddingModel::vector(const std::string& id) const {
  const auto idx = sequence_index(id);
  if (!idx) throw DataError("unknown sequence id '" + id + "'");
  return sequence_vectors.row(*idx);
}

std::vector<float> initial_vector(std::size_t dim, std::uint64_t seed, std::uint64_t stream) {
  Rng rng(derive_seed(seed, stream));
  std::vector<float> v(dim);
  const double scale = 1.0 / static_cast<double>(dim);
  for (auto& x : v) x = static_cast<float>((uniform01(rng) - 0.5) * scale);
  return v;
}

namespace {

// Samples from counts^exponent by inverse CDF.
class NoiseSampler {
 public:
  NoiseSampler(const Vocabulary& vocab, double exponent) : cdf_(vocab.size()) {
    double total = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      total += std::pow(static_cast<double>(vocab.count(i)), exponent);
      cdf_[i] = total;
    }
    for (auto& c : cdf_) c /= total;
  }

  std::size_t sample(Rng& rng) const {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

using ConstVec = Eigen::Map<const Eigen::VectorXf>;
using Vec = Eigen::Map<Eigen::VectorXf>;

float dot(const float* a, const float* b, std::size_t n) {
  const auto len = static_cast<Eigen::Index>(n);
  return ConstVec(a, len).dot(ConstVec(b, len));
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  const auto len = static_cast<Eigen::Index>(n);
  Vec(y, len) += alpha * ConstVec(x, len);
}

struct Workspace {
  std::vector<float> input_grad;
  std::vector<std::size_t> targets;
  std::vector<float> scores;
  std::vector<float> coeffs;
};

// One SGD step of the negative-sampling objective for `input`. Output rows are
// updated in place when `writable` is set; the input gradient is left in
// ws.input_grad. Returns the loss before the update.
float ns_step(const float* input, std::size_t target, const Matrix& outputs, Matrix* writable,
              const NoiseSampler& noise, int negatives, float lr, Rng& rng, Workspace& ws) {
  const std::size_t dim = outputs.cols();
  ws.targets.clear();
  ws.targets.push_back(target);
  for (int k = 0; k < negatives; ++k) {
    const std::size_t t = noise.sample(rng);
    if (t != target) ws.targets.push_back(t);
  }
  ws.scores.resize(ws.targets.size());
  ws.coeffs.resize(ws.targets.size());
  for (std::size_t k = 0; k < ws.targets.size(); ++k) {
    ws.scores[k] = dot(input, outputs.row(ws.targets[k]).data(), dim);
  }
  const float loss = logistic_coefficients<float>(ws.scores, ws.coeffs);
  ws.input_grad.assign(dim, 0.0f);
  for (std::size_t k = 0; k < ws.targets.size(); ++k) {
    axpy(ws.coeffs[k], outputs.row(ws.targets[k]).data(), ws.input_grad.data(), dim);
    if (writable) axpy(-lr * ws.coeffs[k], input, writable->row(ws.targets[k]).data(), dim);
  }
  return loss;
}

float learning_rate(const TrainingConfig& c, std::uint64_t step, std::uint64_t total) {
  const double progress = total == 0 ? 0.0 : static_cast<double>(step) / static_cast<double>(total);
  return static_cast<float>(c.initial_lr - (c.initial_lr - c.final_lr) * std::min(1.0, progress));
}

struct Prepared {
  Vocabulary vocab;
  std::vector<std::vector<std::size_t>> docs;
  std::uint64_t positions = 0;
};

Prepared prepare(std::span<const Document> corpus) {
  if (corpus.empty()) throw DataError("training: empty corpus");
  Prepared p;
  p.docs.reserve(corpus.size());
  for (const auto& d : corpus) {
    std::vector<std::size_t> ids;
    ids.reserve(d.tokens.size());
    for (const auto t : d.tokens) ids.push_back(p.vocab.add(t));
    p.positions += ids.size();
    p.docs.push_back(std::move(ids));
  }
  return p;
}

EmbeddingModel init_model(std::span<const Document> corpus, const TrainingConfig& config, Prepared& p) {
  EmbeddingModel m;
  m.config = config;
  m.vocabulary = p.vocab;
  m.sequence_vectors = Matrix(corpus.size(), config.dim);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    m.sequence_ids.push_back(corpus[i].id);
    const auto v = initial_vector(config.dim, config.seed, i);
    std::copy(v.begin(), v.end(), m.sequence_vectors.row(i).begin());
    if (corpus[i].tokens.empty()) ++m.skipped_empty;
  }
  m.token_output = Matrix(p.vocab.size(), config.dim);
  if (config.mode == Architecture::kDm) {
    m.token_input = Matrix(p.vocab.size(), config.dim);
    for (std::size_t t = 0; t < p.vocab.size(); ++t) {
      const auto v = initial_vector(config.dim, config.seed ^ 0x5bd1e995ULL, t);
      std::copy(v.begin(), v.end(), m.token_input.row(t).begin());
    }
  }
  if (m.skipped_empty > 0) {
    std::clog << "warning: " << m.skipped_empty << " empty sequence(s) receive no updates\n";
  }
  return m;
}

// Builds the mean of the sequence vector and context vectors around `pos`.
std::size_t dm_context(const std::vector<std::size_t>& doc, std::size_t pos, int window, const float* seq_vec,
                       const Matrix& token_input, std::vector<float>& mean, std::vector<std::size_t>& context) {
  const std::size_t dim = token_input.cols();
  context.clear();
  const std::size_t lo = pos >= static_cast<std::size_t>(window) ? pos - static_cast<std::size_t>(window) : 0;
  const std::size_t hi = std::min(doc.size() - 1, pos + static_cast<std::size_t>(window));
  for (std::size_t j = lo; j <= hi; ++j) {
    if (j != pos) context.push_back(doc[j]);
  }
  mean.assign(seq_vec, seq_vec + dim);
  for (const auto c : context) axpy(1.0f, token_input.row(c).data(), mean.data(), dim);
  const std::size_t count = context.size() + 1;
  const float inv = 1.0f / static_cast<float>(count);
  for (auto& x : mean) x *= inv;
  return count;
}

// Runs `epochs` passes over `docs`, updating the given sequence rows.
struct Trainer {
  const TrainingConfig& config;
  const NoiseSampler& noise;
  Matrix& sequences;
  const Matrix& token_output;
  const Matrix& token_input;
  /// Null when the token tables are frozen.
  Matrix* output_updates;
  Matrix* input_updates;

  double run_doc(std::size_t d, const std::vector<std::size_t>& doc, std::uint64_t& step, std::uint64_t total,
                 Rng& rng, Workspace& ws, std::vector<float>& mean, std::vector<std::size_t>& ctx) {
    const std::size_t dim = config.dim;
    float* seq = sequences.row(d).data();
    double loss = 0.0;
    for (std::size_t pos = 0; pos < doc.size(); ++pos) {
      const float lr = learning_rate(config, step++, total);
      if (config.mode == Architecture::kDbow) {
        loss += ns_step(seq, doc[pos], token_output, output_updates, noise, config.negatives, lr, rng, ws);
        axpy(-lr, ws.input_grad.data(), seq, dim);
      } else {
        const std::size_t count = dm_context(doc, pos, config.window, seq, token_input, mean, ctx);
        loss += ns_step(mean.data(), doc[pos], token_output, output_updates, noise, config.negatives, lr, rng, ws);
        const float scale = -lr / static_cast<float>(count);
        axpy(scale, ws.input_grad.data(), seq, dim);
        if (input_updates) {
          for (const auto c : ctx) axpy(scale, ws.input_grad.data(), input_updates->row(c).data(), dim);
        }
      }
    }
    return loss;
  }
};

EmbeddingModel train_impl(std::span<const Document> corpus, TrainingConfig config) {
  config.validate();
  Prepared p = prepare(corpus);
  EmbeddingModel m = init_model(corpus, config, p);
  const NoiseSampler noise(m.vocabulary, config.noise_exponent);
  const std::uint64_t total = p.positions * static_cast<std::uint64_t>(config.epochs);
  Trainer trainer{config, noise, m.sequence_vectors, m.token_output, m.token_input, &m.token_output, &m.token_input};

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), p.docs.size());
  std::vector<Rng> rngs;
  for (std::size_t w = 0; w < workers; ++w) rngs.emplace_back(derive_seed(config.seed, 0xabcdef00ULL + w));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::uint64_t epoch_start = p.positions * static_cast<std::uint64_t>(epoch);
    double epoch_loss = 0.0;
    if (workers <= 1) {
      Workspace ws;
      std::vector<float> mean;
      std::vector<std::size_t> ctx;
      std::uint64_t step = epoch_start;
      for (std::size_t d = 0; d < p.docs.size(); ++d) {
        epoch_loss += trainer.run_doc(d, p.docs[d], step, total, rngs[0], ws, mean, ctx);
      }
    } else {
      std::vector<double> losses(workers, 0.0);
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          Workspace ws;
          std::vector<float> mean;
          std::vector<std::size_t> ctx;
          // Approximate schedule position: each worker walks a strided share.
          std::uint64_t step = epoch_start;
          for (std::size_t d = w; d < p.docs.size(); d += workers) {
            std::uint64_t local = step;
            losses[w] += trainer.run_doc(d, p.docs[d], local, total, rngs[w], ws, mean, ctx);
            step += (local - step) * workers;
          }
        });
      }
      for (auto& t : pool) t.join();
      epoch_loss = std::accumulate(losses.begin(), losses.end(), 0.0);
    }
    m.epoch_loss.push_back(p.positions == 0 ? 0.0 : epoch_loss / static_cast<double>(p.positions));
  }
  return m;
}

}  // namespace

EmbeddingModel train_pvdbow(std::span<const Document> corpus, TrainingConfig config) {
  config.mode = Architecture::kDbow;
  return train_impl(corpus, config);
}

EmbeddingModel train_pvdm(std::span<const Document> corpus, TrainingConfig config) {
  config.mode = Architecture::kDm;
  return train_impl(corpus, config);
}

EmbeddingModel train(std::span<const Document> corpus, const TrainingConfig& config) {
  return config.mode == Architecture::kDbow ? train_pvdbow(corpus, config) : train_pvdm(corpus, config);
}

std::vector<float> infer_vector(const EmbeddingModel& model, std::span<const Token> tokens, int epochs,
                                std::uint64_t seed) {
  if (epochs < 1) throw ConfigError("infer_vector: epochs must be >= 1");
  std::vector<std::size_t> doc;
  for (const auto t : tokens) {
    if (const auto idx = model.vocabulary.find(t)) doc.push_back(*idx);
  }
  if (doc.empty()) throw DataError("infer_vector: no token of the sequence is in the model vocabulary");

  const auto& config = model.config;
  Matrix vec(1, config.dim);
  const auto init = initial_vector(config.dim, seed, 0);
  std::copy(init.begin(), init.end(), vec.row(0).begin());

  const NoiseSampler noise(model.vocabulary, config.noise_exponent);
  Trainer trainer{config, noise, vec, model.token_output, model.token_input, nullptr, nullptr};

  Rng rng(derive_seed(seed, 1));
  Workspace ws;
  std::vector<float> mean;
  std::vector<std::size_t> ctx;
  const std::uint64_t total = doc.size() * static_cast<std::uint64_t>(epochs);
  std::uint64_t step = 0;
  for (int e = 0; e < epochs; ++e) trainer.run_doc(0, doc, step, total, rng, ws, mean, ctx);
  return {vec.row(0).begin(), vec.row(0).end()};
}

std::vector<float> aggregate_user(std::span<const std::vector<float>> weekly_vectors) {
  if (weekly_vectors.empty()) throw DataError("aggregate_user: no weekly vectors");
  const std::size_t dim = weekly_vectors.front().size();
  std::vector<double> sum(dim, 0.0);
  for (const auto& v : weekly_vectors) {
    if (v.size() != dim) throw DataError("aggregate_user: vectors differ in width");
    for (std::size_t i = 0; i < dim; ++i) sum[i] += v[i];
  }
  std::vector<float> out(dim);
  const double n = static_cast<double>(weekly_vectors.size());
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(sum[i] / n);
  return out;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

}  // namespace mob2vec
