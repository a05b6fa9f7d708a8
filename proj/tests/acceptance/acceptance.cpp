// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mob2vec/evaluation.hpp"
#include "mob2vec/loss.hpp"
#include "mob2vec/patterns.hpp"
#include "mob2vec/pipeline.hpp"
#include "mob2vec/reduction.hpp"
#include "mob2vec/sqn2vec.hpp"
#include "mob2vec/synth.hpp"
#include "mob2vec/workflow.hpp"

using namespace mob2vec;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail, Clock::time_point start) {
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  std::printf("%s %2d %s: %s (%.1f s)\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// ---------------------------------------------------------------- oracles

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  for (auto& x : p) x = u(rng) < 0.25 ? 0.0 : u(rng);
  if (std::accumulate(p.begin(), p.end(), 0.0) == 0.0) p[0] = 1.0;
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& x : p) x /= total;
  return p;
}

double js_by_entropy(const std::vector<double>& a, const std::vector<double>& b) {
  auto h = [](double x) { return x > 0.0 ? -x * std::log2(x) : 0.0; };
  double hm = 0.0, ha = 0.0, hb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    hm += h((a[i] + b[i]) / 2.0);
    ha += h(a[i]);
    hb += h(b[i]);
  }
  return std::sqrt(std::max(0.0, hm - (ha + hb) / 2.0));
}

std::set<SymbolSequence> feasible_subsequences(const SymbolSequence& seq, int gap, std::size_t max_len) {
  std::set<SymbolSequence> out;
  const std::size_t n = seq.size();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    SymbolSequence p;
    int last = -1;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      if (last >= 0 && static_cast<int>(i) - last - 1 > gap) ok = false;
      last = static_cast<int>(i);
      p.push_back(seq[i]);
    }
    if (ok && p.size() <= max_len) out.insert(p);
  }
  return out;
}

std::pair<std::vector<double>, std::vector<std::vector<double>>> jacobi(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a[i][i];
  return {values, v};
}

PointMatrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  PointMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  }
  return m;
}

// ------------------------------------------------------------ experiments

struct Arm {
  double r = 0.0;
  double train_seconds = 0.0;
  TrainedEmbeddings trained;
  UserPoints points;
  UmapReducer umap;
  PointMatrix layout;
  WeeklyDataset dataset;
};

Arm run_arm(const SyntheticCorpus& corpus, const SynthConfig& synth, const std::map<UserId, RankDistribution>& reference,
            bool summarize, SymbolMode symbols, const TrainingConfig& training) {
  Arm arm;
  PrepareOptions prep;
  prep.period = synth.period();
  prep.summarize = summarize;
  prep.symbols = symbols;
  arm.dataset = prepare_weeks(corpus.trajectories, prep);
  const auto t0 = Clock::now();
  arm.trained = train_embeddings(arm.dataset, MiningParams{}, training);
  arm.train_seconds = seconds_since(t0);
  arm.points = to_points(arm.trained.user_vectors);
  std::tie(arm.umap, arm.layout) = UmapReducer::fit(arm.points.points, UmapParams{});
  QualityParams quality;
  quality.sample = std::min(quality.sample, arm.points.users.size());
  arm.r = embedding_quality(to_map(UserPoints{arm.points.users, arm.layout}), reference, quality).r;
  return arm;
}

std::map<UserId, RankDistribution> reference_distributions(const SyntheticCorpus& corpus, const SynthConfig& synth) {
  PrepareOptions prep;
  prep.period = synth.period();
  return user_distributions(prepare_weeks(corpus.trajectories, prep));
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ------------------------------------------------------------- criteria

void js_metric() {
  const auto t = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + rng() % 12;
    const auto a = random_distribution(rng, n);
    const auto b = random_distribution(rng, n);
    worst = std::max(worst, std::abs(js_distance(a, b) - js_by_entropy(a, b)));
  }
  std::size_t violations = 0;
  for (int i = 0; i < 5000; ++i) {
    const std::size_t n = 1 + rng() % 8;
    const auto a = random_distribution(rng, n);
    const auto b = random_distribution(rng, n);
    const auto c = random_distribution(rng, n);
    const double ab = js_distance(a, b);
    if (ab != js_distance(b, a)) ++violations;
    if (js_distance(a, a) != 0.0) ++violations;
    if (a != b && ab <= 0.0) ++violations;
    if (ab < 0.0 || ab > 1.0 + 1e-12) ++violations;
    if (js_distance(a, c) > ab + js_distance(b, c) + 1e-9) ++violations;
  }
  const bool fast = seconds_since(t) < 5.0;
  report(1, "JS distance oracle and metric axioms", worst <= 1e-9 && violations == 0 && fast,
         fmt("max |js - oracle| %.2e over 100 pairs, %zu axiom violations over 5000 triples", worst, violations), t);
}

void mining_oracle() {
  const auto t = Clock::now();
  std::mt19937_64 rng(202);
  std::size_t mismatches = 0, cases = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SymbolSequence> corpus(1 + rng() % 8);
    const auto alphabet = 1 + rng() % 5;
    for (auto& s : corpus) {
      s.resize(rng() % 11);
      for (auto& x : s) x = 1 + static_cast<Symbol>(rng() % alphabet);
    }
    for (const int gap : {0, 1, 2, 4}) {
      for (const double support : {0.25, 0.5, 1.0}) {
        const MiningParams p{support, gap, 10};
        std::map<SymbolSequence, std::size_t> count;
        for (const auto& s : corpus) {
          for (const auto& pat : feasible_subsequences(s, gap, p.max_pattern_length)) ++count[pat];
        }
        std::vector<SymbolSequence> expected;
        for (const auto& [pat, c] : count) {
          if (static_cast<double>(c) >= support * static_cast<double>(corpus.size()) - 1e-9) expected.push_back(pat);
        }
        std::vector<SymbolSequence> got;
        const auto mined = mine_patterns(corpus, p);
        for (const auto& pat : mined.vocabulary.patterns()) got.push_back(pat.symbols);
        ++cases;
        if (got != expected) ++mismatches;
      }
    }
  }
  const bool fast = seconds_since(t) < 60.0;
  report(2, "pattern mining equals brute-force enumeration", mismatches == 0 && fast,
         fmt("%zu of %zu corpus/parameter cases differ", mismatches, cases), t);
}

void gradient_check() {
  const auto t = Clock::now();
  std::mt19937_64 rng(303);
  std::normal_distribution<double> normal(0.0, 0.7);
  double worst = 0.0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}); };
  for (int instance = 0; instance < 50; ++instance) {
    const std::size_t dim = 1 + rng() % 8;
    const std::size_t rows = 2 + rng() % 5;
    std::vector<double> input(dim), outputs(rows * dim);
    for (auto& x : input) x = normal(rng);
    for (auto& x : outputs) x = normal(rng);
    std::vector<double> gi(dim), go(rows * dim), si(dim), so(rows * dim);
    negative_sampling_loss<double>(input, outputs, gi, go);
    const double h = 1e-6;
    auto central = [&](double& x) {
      const double keep = x;
      x = keep + h;
      const double up = negative_sampling_loss<double>(input, outputs, si, so);
      x = keep - h;
      const double down = negative_sampling_loss<double>(input, outputs, si, so);
      x = keep;
      return (up - down) / (2 * h);
    };
    for (std::size_t d = 0; d < dim; ++d) worst = std::max(worst, rel(gi[d], central(input[d])));
    for (std::size_t k = 0; k < outputs.size(); ++k) worst = std::max(worst, rel(go[k], central(outputs[k])));
  }
  const bool fast = seconds_since(t) < 10.0;
  report(3, "negative-sampling gradient check", worst <= 1e-4 && fast,
         fmt("max relative error %.2e over 50 instances", worst), t);
}

void pca_oracle() {
  const auto t = Clock::now();
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (int m = 0; m < 20; ++m) {
    PointMatrix x = gaussian(rng, 100, 16);
    for (Eigen::Index j = 0; j < 16; ++j) x.col(j) *= 1.0 + static_cast<double>(j);
    const auto [pca, projected] = PcaReducer::fit_transform(x, 2);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const PointMatrix centred = x.rowwise() - mean;
    const Eigen::MatrixXd cov = centred.transpose() * centred / 99.0;
    std::vector<std::vector<double>> c(16, std::vector<double>(16));
    for (int i = 0; i < 16; ++i) {
      for (int j = 0; j < 16; ++j) c[i][j] = cov(i, j);
    }
    auto [values, vectors] = jacobi(c);
    std::vector<std::size_t> order(16);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    for (int k = 0; k < 2; ++k) {
      Eigen::VectorXd v(16);
      for (int j = 0; j < 16; ++j) v(j) = vectors[j][order[k]];
      const Eigen::VectorXd expected = centred * v;
      const double plus = (projected.col(k) - expected).cwiseAbs().maxCoeff();
      const double minus = (projected.col(k) + expected).cwiseAbs().maxCoeff();
      worst = std::max(worst, std::min(plus, minus));
    }
  }
  const bool fast = seconds_since(t) < 10.0;
  report(4, "PCA equals covariance eigendecomposition", worst <= 1e-6 && fast,
         fmt("max coordinate difference %.2e over 20 matrices", worst), t);
}

void blob_purity() {
  const auto t = Clock::now();
  std::mt19937_64 rng(42);
  const PointMatrix centres = gaussian(rng, 3, 128, 4.0);
  PointMatrix points = gaussian(rng, 180, 128);
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c) {
    for (Eigen::Index i = 0; i < 60; ++i) {
      points.row(c * 60 + i) += centres.row(c);
      labels.push_back(c);
    }
  }
  const auto [umap, layout] = UmapReducer::fit(points, UmapParams{});
  const auto knn = exact_knn(layout, layout, 10, true);
  double purity = 0.0;
  for (std::size_t i = 0; i < 180; ++i) {
    int same = 0;
    for (const auto j : knn.index[i]) same += labels[j] == labels[i];
    purity += same / 10.0;
  }
  purity /= 180.0;
  const bool fast = seconds_since(t) < 60.0;
  report(5, "UMAP blob purity", purity >= 0.9 && fast, fmt("10-NN same-label purity %.3f", purity), t);
}

void rank_vs_location(const SyntheticCorpus& corpus, const SynthConfig& synth,
                      const std::map<UserId, RankDistribution>& reference, const Arm& rank, double rank_seconds) {
  const auto t = Clock::now() - std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(rank_seconds));
  const auto location = run_arm(corpus, synth, reference, true, SymbolMode::kLocation, TrainingConfig{});
  const double diff = rank.r - location.r;
  const bool fast = seconds_since(t) < 15 * 60.0;
  report(6, "rank vs location symbols", rank.r >= 0.5 && diff >= 0.3 && fast,
         fmt("r(rank) %.4f, r(location) %.4f, difference %.4f", rank.r, location.r, diff), t);
}

void summarization() {
  const auto t = Clock::now();
  SynthConfig synth;
  synth.noise_rate = 0.2;
  const auto corpus = generate_corpus(synth);
  const auto reference = reference_distributions(corpus, synth);
  const auto summarized = run_arm(corpus, synth, reference, true, SymbolMode::kRank, TrainingConfig{});
  const auto raw = run_arm(corpus, synth, reference, false, SymbolMode::kRank, TrainingConfig{});
  const double diff = summarized.r - raw.r;
  const bool fast = seconds_since(t) < 20 * 60.0;
  report(7, "summarized vs raw at noise 0.2", diff >= 0.2 && fast,
         fmt("r(summarized) %.4f, r(raw) %.4f, difference %.4f", summarized.r, raw.r, diff), t);
}

/// Best seconds per epoch of the fused model over alternating repeats.
std::pair<double, double> seconds_per_epoch(const Arm& arm) {
  const auto& trained = arm.trained;
  std::map<Architecture, double> best = {{Architecture::kDbow, 1e300}, {Architecture::kDm, 1e300}};
  for (int repeat = 0; repeat < 3; ++repeat) {
    for (auto& [mode, seconds] : best) {
      TrainingConfig c;
      c.mode = mode;
      c.epochs = 10;
      const auto t0 = Clock::now();
      train_sqn2vec(trained.symbol_corpus, trained.pattern_corpus, trained.model.vocabulary, c);
      seconds = std::min(seconds, seconds_since(t0) / c.epochs);
    }
  }
  return {best.at(Architecture::kDbow), best.at(Architecture::kDm)};
}

void architecture(const SyntheticCorpus& corpus, const SynthConfig& synth,
                  const std::map<UserId, RankDistribution>& reference, const Arm& dbow) {
  const auto t = Clock::now();
  TrainingConfig dm_config;
  dm_config.mode = Architecture::kDm;
  const auto dm = run_arm(corpus, synth, reference, true, SymbolMode::kRank, dm_config);
  const auto [dbow_epoch, dm_epoch] = seconds_per_epoch(dbow);
  const bool fast = seconds_since(t) + dbow.train_seconds < 30 * 60.0;
  report(8, "PV-DBOW vs PV-DM", dbow.r > dm.r && dbow_epoch < dm_epoch && fast,
         fmt("r(DBOW) %.4f, r(DM) %.4f, best seconds per epoch %.3f vs %.3f", dbow.r, dm.r, dbow_epoch, dm_epoch), t);
}

void dimensions(const SyntheticCorpus& corpus, const SynthConfig& synth,
                const std::map<UserId, RankDistribution>& reference, const Arm& d128) {
  const auto t = Clock::now();
  std::map<std::size_t, double> r = {{128, d128.r}};
  for (const std::size_t dim : {std::size_t{64}, std::size_t{256}}) {
    TrainingConfig c;
    c.dim = dim;
    r[dim] = run_arm(corpus, synth, reference, true, SymbolMode::kRank, c).r;
  }
  const auto [lo, hi] = std::minmax_element(r.begin(), r.end(), [](auto& a, auto& b) { return a.second < b.second; });
  const double spread = hi->second - lo->second;
  const bool fast = seconds_since(t) < 45 * 60.0;
  report(9, "dimension robustness", spread <= 0.1 && fast,
         fmt("r(64) %.4f, r(128) %.4f, r(256) %.4f, spread %.4f", r[64], r[128], r[256], spread), t);
}

void perturbation(const Arm& arm) {
  const auto t = Clock::now();
  SimilarityParams params;
  params.n_sources = 200;
  params.k_max = 5;
  const auto report_ = similarity_experiment(arm.trained.model, arm.umap, arm.points.users, arm.dataset.trained_weeks(), params);
  bool monotone = report_.per_k.size() == 5;
  bool below = true;
  std::string medians;
  for (std::size_t i = 0; i < report_.per_k.size(); ++i) {
    if (i > 0 && report_.per_k[i].median < report_.per_k[i - 1].median) monotone = false;
    for (const double d : report_.per_k[i].distances) below = below && d < report_.max_pairwise;
    medians += fmt("%s%.3f", i ? " " : "", report_.per_k[i].median);
  }
  double largest = 0.0;
  for (const auto& s : report_.per_k) largest = std::max(largest, s.max);
  const bool fast = seconds_since(t) < 20 * 60.0;
  report(10, "perturbation monotonicity", report_.sources.size() >= 200 && monotone && below && fast,
         fmt("%zu sources, medians k=1..5 [%s], largest %.3f < max pairwise %.3f", report_.sources.size(), medians.c_str(),
             largest, report_.max_pairwise),
         t);
}

void weekly_clusters(const Arm& arm) {
  const auto t = Clock::now();
  const auto weeks = arm.dataset.trained_weeks();
  std::vector<UserId> users;
  for (const auto& [u, w] : weeks) {
    if (w.size() >= 2) users.push_back(u);
  }
  std::mt19937_64 rng(11);
  std::shuffle(users.begin(), users.end(), rng);
  users.resize(std::min<std::size_t>(50, users.size()));
  std::vector<std::size_t> owner;
  std::vector<std::vector<float>> vectors;
  for (std::size_t i = 0; i < users.size(); ++i) {
    for (const auto& w : weeks.at(users[i])) {
      vectors.push_back(arm.trained.model.vector(weekly_id(users[i], w.week_index)));
      owner.push_back(i);
    }
  }
  PointMatrix high(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(vectors[0].size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = 0; j < vectors[i].size(); ++j) high(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vectors[i][j];
  }
  const PointMatrix low = arm.umap.transform(high);
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (Eigen::Index i = 0; i < low.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < low.rows(); ++j) {
      const double d = (low.row(i) - low.row(j)).norm();
      if (owner[static_cast<std::size_t>(i)] == owner[static_cast<std::size_t>(j)]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  }
  intra /= static_cast<double>(n_intra);
  inter /= static_cast<double>(n_inter);
  const bool fast = seconds_since(t) < 10 * 60.0;
  report(11, "weekly embeddings cluster by user", users.size() == 50 && intra < inter && fast,
         fmt("%zu users, %zu weekly points, mean intra %.3f vs inter %.3f", users.size(), vectors.size(), intra, inter), t);
}

void determinism() {
  const auto t = Clock::now();
  const auto root = fs::temp_directory_path() / "mob2vec_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::string> reports;
  for (const char* name : {"first", "second"}) {
    PipelineConfig c;
    c.run_dir = (root / name).string();
    c.threads = 1;
    run_pipeline(c);
    reports.push_back(read_file(stage_dir(c, Stage::kEvaluate) / "evaluation.json"));
  }
  const bool same = !reports[0].empty() && reports[0] == reports[1];
  fs::remove_all(root);
  report(12, "serial runs are byte-identical", same,
         fmt("evaluation.json %zu and %zu bytes, %s", reports[0].size(), reports[1].size(), same ? "identical" : "different"), t);
}

}  // namespace

int main() {
  js_metric();
  mining_oracle();
  gradient_check();
  pca_oracle();
  blob_purity();

  const auto t = Clock::now();
  const SynthConfig synth;
  const auto corpus = generate_corpus(synth);
  const auto reference = reference_distributions(corpus, synth);
  const auto rank = run_arm(corpus, synth, reference, true, SymbolMode::kRank, TrainingConfig{});
  const double rank_seconds = seconds_since(t);

  rank_vs_location(corpus, synth, reference, rank, rank_seconds);
  summarization();
  architecture(corpus, synth, reference, rank);
  dimensions(corpus, synth, reference, rank);
  perturbation(rank);
  weekly_clusters(rank);
  determinism();

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
