#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mob2vec/embedding.hpp"
#include "mob2vec/evaluation.hpp"
#include "mob2vec/errors.hpp"
#include "mob2vec/loss.hpp"
#include "mob2vec/rng.hpp"
#include "mob2vec/sqn2vec.hpp"
#include "mob2vec/synth.hpp"
#include "mob2vec/workflow.hpp"

using namespace mob2vec;

namespace {

std::vector<Document> random_corpus(std::size_t docs, std::size_t vocab, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Document> out;
  for (std::size_t d = 0; d < docs; ++d) {
    Document doc{"d" + std::to_string(d), {}};
    // Each document favours its own small token set so documents differ.
    const auto base = static_cast<Token>(rng() % vocab);
    for (std::size_t i = 0; i < length; ++i) {
      const auto t = rng() % 4 == 0 ? static_cast<Token>(rng() % vocab)
                                    : (base + static_cast<Token>(rng() % 3)) % static_cast<Token>(vocab);
      doc.tokens.push_back(t + 1);
    }
    out.push_back(std::move(doc));
  }
  return out;
}

TrainingConfig small_config(Architecture mode = Architecture::kDbow) {
  TrainingConfig c;
  c.dim = 32;
  c.epochs = 50;
  c.mode = mode;
  return c;
}

bool finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}); }

}  // namespace

TEST_CASE("negative-sampling gradients match central differences") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal(0.0, 0.7);
  for (int instance = 0; instance < 50; ++instance) {
    const std::size_t dim = 1 + rng() % 8;
    const std::size_t rows = 2 + rng() % 5;
    std::vector<double> input(dim), outputs(rows * dim);
    for (auto& x : input) x = normal(rng);
    for (auto& x : outputs) x = normal(rng);
    std::vector<double> gi(dim), go(rows * dim), si(dim), so(rows * dim);
    negative_sampling_loss<double>(input, outputs, gi, go);

    const double h = 1e-6;
    auto loss = [&] { return negative_sampling_loss<double>(input, outputs, si, so); };
    for (std::size_t d = 0; d < dim; ++d) {
      const double keep = input[d];
      input[d] = keep + h;
      const double up = loss();
      input[d] = keep - h;
      const double down = loss();
      input[d] = keep;
      CHECK(relative_error(gi[d], (up - down) / (2 * h)) <= 1e-4);
    }
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      const double keep = outputs[k];
      outputs[k] = keep + h;
      const double up = loss();
      outputs[k] = keep - h;
      const double down = loss();
      outputs[k] = keep;
      CHECK(relative_error(go[k], (up - down) / (2 * h)) <= 1e-4);
    }
  }
}

TEST_CASE("logistic loss stays finite at extreme scores") {
  const std::vector<double> scores = {-800.0, 800.0, 0.0};
  std::vector<double> coeffs(3);
  const double loss = logistic_coefficients<double>(scores, coeffs);
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(1600.0 + std::log(2.0)));
  CHECK(coeffs[0] == doctest::Approx(-1.0));
  CHECK(coeffs[1] == doctest::Approx(1.0));
  CHECK(coeffs[2] == doctest::Approx(0.5));
}

TEST_CASE("training config validation") {
  TrainingConfig c;
  c.dim = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.final_lr = c.initial_lr;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.negatives = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const auto corpus = random_corpus(3, 5, 5, 1);
  TrainingConfig zero;
  zero.dim = 0;
  CHECK_THROWS_AS(train_pvdbow(corpus, zero), ConfigError);
  CHECK_THROWS_AS(train_pvdbow(std::vector<Document>{}, TrainingConfig{}), DataError);
}

TEST_CASE("trained shapes") {
  const auto corpus = random_corpus(10, 20, 15, 2);
  TrainingConfig c;
  c.epochs = 3;
  const auto dbow = train_pvdbow(corpus, c);
  CHECK(dbow.sequence_vectors.rows() == 10);
  CHECK(dbow.sequence_vectors.cols() == 128);
  CHECK(dbow.token_output.rows() == dbow.vocabulary.size());
  CHECK(dbow.token_input.rows() == 0);
  CHECK(dbow.epoch_loss.size() == 3);
  CHECK(dbow.vector("d4").size() == 128);
  CHECK(dbow.sequence_index("d9") == 9);
  CHECK_FALSE(dbow.sequence_index("nope").has_value());

  const auto dm = train_pvdm(corpus, c);
  CHECK(dm.sequence_vectors.rows() == 10);
  CHECK(dm.sequence_vectors.cols() == 128);
  CHECK(dm.token_input.rows() == dm.vocabulary.size());
  CHECK(dm.token_input.cols() == 128);
}

TEST_CASE("identical sequences embed close together") {
  for (const auto mode : {Architecture::kDbow, Architecture::kDm}) {
    auto corpus = random_corpus(40, 30, 40, 3);
    corpus.push_back({"twin_a", corpus[7].tokens});
    corpus.push_back({"twin_b", corpus[7].tokens});
    const auto m = train(corpus, small_config(mode));
    const double twins = cosine_similarity(m.vector("twin_a"), m.vector("twin_b"));
    std::vector<double> random_pairs;
    for (std::size_t i = 0; i < 40; ++i) {
      for (std::size_t j = i + 1; j < 40; ++j) {
        random_pairs.push_back(cosine_similarity(m.vector(corpus[i].id), m.vector(corpus[j].id)));
      }
    }
    std::nth_element(random_pairs.begin(), random_pairs.begin() + static_cast<std::ptrdiff_t>(random_pairs.size() / 2),
                     random_pairs.end());
    const double median = random_pairs[random_pairs.size() / 2];
    CAPTURE(mode == Architecture::kDm);
    CHECK(twins >= 0.9);
    CHECK(twins > median);
  }
}

TEST_CASE("single-symbol vocabulary trains to finite vectors") {
  std::vector<Document> corpus = {{"a", {5, 5, 5}}, {"b", {5}}, {"c", {5, 5}}};
  for (const auto mode : {Architecture::kDbow, Architecture::kDm}) {
    const auto m = train(corpus, small_config(mode));
    CHECK(finite(m.sequence_vectors.data()));
    CHECK(finite(m.token_output.data()));
  }
}

TEST_CASE("empty sequences are skipped") {
  std::vector<Document> corpus = {{"a", {1, 2}}, {"empty", {}}, {"b", {2, 3}}};
  const auto m = train_pvdbow(corpus, small_config());
  CHECK(m.skipped_empty == 1);
  const auto v = m.vector("empty");
  const auto init = initial_vector(32, m.config.seed, 1);
  CHECK(std::vector<float>(v.begin(), v.end()) == init);
}

TEST_CASE("serial training is deterministic and losses fall") {
  const auto corpus = random_corpus(30, 25, 30, 4);
  for (const auto mode : {Architecture::kDbow, Architecture::kDm}) {
    const auto a = train(corpus, small_config(mode));
    const auto b = train(corpus, small_config(mode));
    CHECK(a.sequence_vectors == b.sequence_vectors);
    CHECK(a.token_output == b.token_output);
    CHECK(a.epoch_loss.back() < a.epoch_loss.front());
  }
}

TEST_CASE("parallel training keeps vectors finite") {
  const auto corpus = random_corpus(60, 25, 30, 5);
  auto c = small_config();
  c.threads = 3;
  for (const auto mode : {Architecture::kDbow, Architecture::kDm}) {
    c.mode = mode;
    const auto m = train(corpus, c);
    CHECK(m.sequence_vectors.rows() == 60);
    CHECK(finite(m.sequence_vectors.data()));
    CHECK(m.epoch_loss.back() < m.epoch_loss.front());
  }
}

TEST_CASE("inference recovers a training sequence") {
  const auto corpus = random_corpus(40, 30, 40, 6);
  const auto m = train_pvdbow(corpus, small_config());
  for (const std::size_t i : {0u, 13u, 39u}) {
    const auto v = infer_vector(m, corpus[i].tokens, 50, 17);
    CHECK(cosine_similarity(v, m.vector(corpus[i].id)) >= 0.8);
    CHECK(v == infer_vector(m, corpus[i].tokens, 50, 17));
  }
  std::vector<Token> unknown = {100000, 100001};
  CHECK_THROWS_AS(infer_vector(m, unknown, 10, 1), DataError);
  std::vector<Token> mixed = {100000, corpus[0].tokens[0]};
  CHECK(finite(infer_vector(m, mixed, 10, 1)));
}

TEST_CASE("aggregation is the componentwise mean") {
  const std::vector<std::vector<float>> one = {{1.5f, -2.0f}};
  CHECK(aggregate_user(one) == one[0]);
  const std::vector<std::vector<float>> opposite = {{1.0f, -3.0f, 0.25f}, {-1.0f, 3.0f, -0.25f}};
  CHECK(aggregate_user(opposite) == std::vector<float>{0.0f, 0.0f, 0.0f});

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<float>> vs(1 + rng() % 30, std::vector<float>(16));
    for (auto& v : vs) {
      for (auto& x : v) x = u(rng);
    }
    const auto mean = aggregate_user(vs);
    for (std::size_t d = 0; d < 16; ++d) {
      double sum = 0.0;
      for (std::size_t i = vs.size(); i-- > 0;) sum += vs[i][d];
      CHECK(mean[d] == doctest::Approx(sum / static_cast<double>(vs.size())).epsilon(1e-5));
    }
  }
  CHECK_THROWS_AS(aggregate_user(std::vector<std::vector<float>>{}), DataError);
  const std::vector<std::vector<float>> ragged = {{1.0f}, {1.0f, 2.0f}};
  CHECK_THROWS_AS(aggregate_user(ragged), DataError);
}

TEST_CASE("cosine similarity") {
  const std::vector<float> a = {1, 0}, b = {0, 2}, c = {-3, 0};
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, b) == doctest::Approx(0.0));
  CHECK(cosine_similarity(a, c) == doctest::Approx(-1.0));
}

TEST_CASE("SEP averages the two models") {
  const auto symbols = random_corpus(12, 10, 20, 7);
  std::vector<std::vector<PatternId>> sets(12);
  for (std::size_t i = 0; i < 11; ++i) sets[i] = {i % 3, 3 + i % 2};
  const auto patterns = pattern_documents(symbols, sets);
  CHECK(patterns[11].tokens.empty());
  CHECK(patterns[0].tokens[0] == pattern_token(0));

  auto c = small_config();
  const auto model = train_sqn2vec(symbols, patterns, PatternVocabulary{}, c);
  REQUIRE(model.patterns.has_value());
  for (const auto& id : model.sequence_ids()) {
    const auto v = model.vector(id);
    CHECK(v.size() == c.dim);
    const auto v1 = model.symbols.vector(id);
    const auto v2 = model.patterns->vector(id);
    for (std::size_t d = 0; d < c.dim; ++d) CHECK(v[d] == (v1[d] + v2[d]) / 2.0f);
  }
  const auto empty_init = initial_vector(c.dim, derive_seed(c.seed, 2), 11);
  const auto v11 = model.vector("d11");
  const auto s11 = model.symbols.vector("d11");
  for (std::size_t d = 0; d < c.dim; ++d) CHECK(v11[d] == (s11[d] + empty_init[d]) / 2.0f);
  CHECK(finite(v11));

  Sqn2VecModel same = model;
  same.patterns = model.symbols;
  for (const auto& id : model.sequence_ids()) {
    const auto v1 = model.symbols.vector(id);
    CHECK(same.vector(id) == std::vector<float>(v1.begin(), v1.end()));
  }

  const auto embedded = sqn2vec_embed(symbols, patterns, c);
  CHECK(embedded.size() == 12);
  CHECK(embedded.at("d3") == model.vector("d3"));
}

TEST_CASE("SIM trains one model over both token streams") {
  const auto symbols = random_corpus(12, 10, 20, 8);
  std::vector<std::vector<PatternId>> sets(12, std::vector<PatternId>{0, 1});
  const auto patterns = pattern_documents(symbols, sets);
  auto c = small_config();
  c.fusion = Fusion::kSim;
  const auto model = train_sqn2vec(symbols, patterns, PatternVocabulary{}, c);
  CHECK_FALSE(model.patterns.has_value());
  CHECK(model.symbols.vocabulary.find(pattern_token(1)).has_value());
  CHECK(model.vector("d0").size() == c.dim);
}

TEST_CASE("mismatched corpora are rejected") {
  const auto symbols = random_corpus(4, 10, 5, 9);
  auto patterns = pattern_documents(symbols, std::vector<std::vector<PatternId>>(4));
  patterns[2].id = "other";
  CHECK_THROWS_AS(train_sqn2vec(symbols, patterns, PatternVocabulary{}, small_config()), DataError);
  CHECK_THROWS_AS(pattern_documents(symbols, std::vector<std::vector<PatternId>>(3)), DataError);
}

TEST_CASE("sqn2vec inference uses the model vocabulary") {
  std::vector<Document> symbols;
  std::mt19937_64 rng(10);
  for (int i = 0; i < 30; ++i) {
    Document d{"s" + std::to_string(i), {}};
    for (int k = 0; k < 20; ++k) d.tokens.push_back(1 + static_cast<Token>(rng() % (2 + i % 4)));
    symbols.push_back(std::move(d));
  }
  std::vector<SymbolSequence> seqs;
  for (const auto& d : symbols) seqs.push_back(d.tokens);
  auto mined = mine_patterns(seqs, {0.3, 1, 2});
  const auto patterns = pattern_documents(symbols, mined.sequence_patterns);
  const auto model = train_sqn2vec(symbols, patterns, mined.vocabulary, small_config());
  const auto v = infer_sqn2vec(model, symbols[5].tokens, 50, 3);
  CHECK(v == infer_sqn2vec(model, symbols[5].tokens, 50, 3));
  CHECK(cosine_similarity(v, model.vector("s5")) >= 0.8);

  const SymbolSequence lone = {1};
  const auto lone_vec = infer_sqn2vec(model, lone, 20, 4);
  const auto v1 = infer_vector(model.symbols, lone, 20, 4);
  const auto init = initial_vector(model.config.dim, derive_seed(4, 2), 0);
  if (mined.vocabulary.annotate(lone).empty()) {
    for (std::size_t d = 0; d < v1.size(); ++d) CHECK(lone_vec[d] == (v1[d] + init[d]) / 2.0f);
  }
}

namespace {

double layout_r(const std::map<UserId, std::vector<float>>& user_vectors,
                const std::map<UserId, RankDistribution>& distributions) {
  const auto points = to_points(user_vectors);
  const auto [reducer, layout] = UmapReducer::fit(points.points, UmapParams{});
  QualityParams quality;
  quality.sample = std::min(quality.sample, points.users.size());
  return embedding_quality(to_map(UserPoints{points.users, layout}), distributions, quality).r;
}

}  // namespace

TEST_CASE("default synthetic corpus: loss, norms and order stability") {
  const auto corpus = generate_corpus(SynthConfig{});
  PrepareOptions prep;
  prep.period = SynthConfig{}.period();
  const auto dataset = prepare_weeks(corpus.trajectories, prep);
  const auto distributions = user_distributions(dataset);
  const TrainingConfig config;
  const auto trained = train_embeddings(dataset, MiningParams{}, config);

  for (const auto* m : {&trained.model.symbols, &*trained.model.patterns}) {
    CHECK(m->epoch_loss.back() < m->epoch_loss.front());
  }
  for (const auto& id : trained.model.sequence_ids()) {
    const auto v = trained.model.vector(id);
    CHECK(finite(v));
    double norm = 0.0;
    for (const float x : v) norm += double(x) * x;
    CHECK(std::sqrt(norm) <= 10.0 * static_cast<double>(config.dim));
  }

  std::vector<std::size_t> order(trained.symbol_corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), std::mt19937_64(2));
  std::vector<Document> symbols, patterns;
  for (const auto i : order) {
    symbols.push_back(trained.symbol_corpus[i]);
    patterns.push_back(trained.pattern_corpus[i]);
  }
  const auto permuted = train_sqn2vec(symbols, patterns, trained.model.vocabulary, config);
  std::map<UserId, std::vector<std::vector<float>>> grouped;
  for (const auto& [user, weeks] : dataset.weeks) {
    for (const auto& w : weeks) {
      if (!w.ranks.empty()) grouped[user].push_back(permuted.vector(weekly_id(user, w.week_index)));
    }
  }
  std::map<UserId, std::vector<float>> permuted_users;
  for (const auto& [user, vs] : grouped) permuted_users.emplace(user, aggregate_user(vs));
  CHECK(permuted_users.begin()->second != trained.user_vectors.begin()->second);

  const double r = layout_r(trained.user_vectors, distributions);
  const double r_permuted = layout_r(permuted_users, distributions);
  MESSAGE("r = " << r << ", permuted r = " << r_permuted);
  CHECK(std::abs(r - r_permuted) <= 0.05);
}
