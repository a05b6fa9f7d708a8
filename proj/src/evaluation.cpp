#include "mob2vec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mob2vec/embedding.hpp"
#include "mob2vec/errors.hpp"
#include "mob2vec/hash.hpp"
#include "mob2vec/rng.hpp"

namespace mob2vec {

RankDistribution::RankDistribution(std::vector<double> probabilities) : p_(std::move(probabilities)) {
  double total = 0.0;
  for (const auto p : p_) {
    if (p < 0.0) throw DataError("rank distribution: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DataError("rank distribution: probabilities do not sum to 1");
}

RankDistribution RankDistribution::padded(std::size_t size) const {
  RankDistribution out = *this;
  if (out.p_.size() < size) out.p_.resize(size, 0.0);
  return out;
}

RankDistribution rank_distribution(std::span<const Symbol> ranks) {
  if (ranks.empty()) throw DataError("rank_distribution: empty rank list");
  Symbol max_rank = 0;
  for (const auto r : ranks) {
    if (r < 1) throw DataError("rank_distribution: ranks must be positive");
    max_rank = std::max(max_rank, r);
  }
  std::vector<double> counts(static_cast<std::size_t>(max_rank), 0.0);
  for (const auto r : ranks) counts[static_cast<std::size_t>(r - 1)] += 1.0;
  for (auto& c : counts) c /= static_cast<double>(ranks.size());
  // Renormalize away rounding so the sum is 1 within 1e-12.
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  for (auto& c : counts) c /= total;
  return RankDistribution(std::move(counts));
}

double js_distance(std::span<const double> g1, std::span<const double> g2) {
  if (g1.size() != g2.size()) throw DataError("js_distance: distributions have different supports");
  double divergence = 0.0;
  for (std::size_t i = 0; i < g1.size(); ++i) {
    const double m = 0.5 * (g1[i] + g2[i]);
    const double t1 = g1[i] > 0.0 ? g1[i] * std::log2(g1[i] / m) : 0.0;
    const double t2 = g2[i] > 0.0 ? g2[i] * std::log2(g2[i] / m) : 0.0;
    divergence += 0.5 * (t1 + t2);
  }
  return std::sqrt(std::clamp(divergence, 0.0, 1.0));
}

double js_distance(const RankDistribution& g1, const RankDistribution& g2) {
  const std::size_t n = std::max(g1.support(), g2.support());
  return js_distance(g1.padded(n).probabilities(), g2.padded(n).probabilities());
}

double pearson_r(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DataError("pearson_r: length mismatch");
  if (xs.size() < 2) throw DataError("pearson_r: need at least two values");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw DataError("pearson_r: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b, DistanceKind kind) {
  if (a.size() != b.size()) throw DataError("embedding widths differ");
  if (kind == DistanceKind::kEuclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 1.0;
  return 1.0 - ab / std::sqrt(aa * bb);
}

// Seeded uniform sample without replacement, returned in input order.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

}  // namespace

EvaluationReport embedding_quality(const std::map<UserId, std::vector<double>>& embeddings,
                                   const std::map<UserId, RankDistribution>& distributions,
                                   const QualityParams& params) {
  if (embeddings.size() != distributions.size()) throw DataError("embedding_quality: user sets differ");
  std::vector<UserId> users;
  for (const auto& [u, _] : embeddings) {
    if (!distributions.count(u)) throw DataError("embedding_quality: no distribution for user '" + u + "'");
    users.push_back(u);
  }
  if (params.sample > users.size()) throw DataError("embedding_quality: sample exceeds user count");
  if (params.sample < 2) throw DataError("embedding_quality: need at least two sampled users");

  EvaluationReport report;
  report.params = params;
  for (const auto i : sample_indices(users.size(), params.sample, params.seed)) report.sampled.push_back(users[i]);

  std::vector<double> xs, ys;
  const std::size_t m = report.sampled.size();
  report.pairs.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& ui = report.sampled[i];
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto& uj = report.sampled[j];
      const double d = distance(embeddings.at(ui), embeddings.at(uj), params.distance);
      const double js = js_distance(distributions.at(ui), distributions.at(uj));
      report.pairs.push_back({ui, uj, d, js});
      xs.push_back(d);
      ys.push_back(js);
    }
  }
  report.r = pearson_r(xs, ys);
  return report;
}

WeeklyTrajectory perturb_trajectory(const WeeklyTrajectory& weekly, int k) {
  if (k < 1) throw ConfigError("perturb_trajectory: k must be >= 1");
  std::set<Symbol> distinct(weekly.ranks.begin(), weekly.ranks.end());
  std::set<Symbol> removed;
  if (distinct.size() <= static_cast<std::size_t>(k)) {
    for (const auto r : distinct) {
      if (r != 1) removed.insert(r);
    }
  } else {
    auto it = distinct.rbegin();
    for (int i = 0; i < k; ++i, ++it) removed.insert(*it);
  }
  WeeklyTrajectory out{weekly.user_id, weekly.week_index, {}};
  for (const auto r : weekly.ranks) {
    if (!removed.count(r)) out.ranks.push_back(r);
  }
  if (out.ranks.empty()) throw DataError("perturb_trajectory: nothing left after removing ranks");
  return out;
}

DistanceSummary summarize_distances(int k, std::vector<double> distances) {
  DistanceSummary s;
  s.k = k;
  s.distances = std::move(distances);
  std::vector<double> sorted = s.distances;
  std::sort(sorted.begin(), sorted.end());
  if (!sorted.empty()) {
    s.min = sorted.front();
    s.max = sorted.back();
    s.q1 = quantile(sorted, 0.25);
    s.median = quantile(sorted, 0.5);
    s.q3 = quantile(sorted, 0.75);
  }
  return s;
}

double max_pairwise_distance(const PointMatrix& points) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < points.rows(); ++j) {
      best = std::max(best, (points.row(i) - points.row(j)).squaredNorm());
    }
  }
  return std::sqrt(best);
}

std::uint64_t weekly_seed(std::uint64_t seed, const UserId& user, int week_index) {
  return derive_seed(seed, fnv1a(user) ^ (static_cast<std::uint64_t>(week_index) * 0x9e3779b97f4a7c15ULL));
}

SimilarityReport similarity_experiment(const Sqn2VecModel& model, const UmapReducer& reducer,
                                       const std::vector<UserId>& layout_users,
                                       const std::map<UserId, std::vector<WeeklyTrajectory>>& weeks,
                                       const SimilarityParams& params) {
  SimilarityReport report;
  if (params.k_max < 1) return report;
  if (!reducer.fitted()) throw DataError("similarity_experiment: reducer not fitted");
  const auto& layout = reducer.layout();
  if (static_cast<std::size_t>(layout.rows()) != layout_users.size()) {
    throw DataError("similarity_experiment: layout rows and users differ");
  }
  report.max_pairwise = max_pairwise_distance(layout);

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < layout_users.size(); ++i) {
    const auto it = weeks.find(layout_users[i]);
    if (it != weeks.end() && !it->second.empty()) candidates.push_back(i);
  }
  const std::size_t n_sources = std::min(params.n_sources, candidates.size());
  std::vector<std::size_t> rows;
  for (const auto i : sample_indices(candidates.size(), n_sources, params.seed)) rows.push_back(candidates[i]);
  for (const auto r : rows) report.sources.push_back(layout_users[r]);

  // Embeds the given weekly sequences of every source; k = 0 means unperturbed.
  auto run = [&](int k) {
    std::vector<std::size_t> kept_rows;
    std::vector<std::vector<float>> user_vectors;
    for (const auto r : rows) {
      const auto& user = layout_users[r];
      std::vector<std::vector<float>> weekly;
      for (const auto& w : weeks.at(user)) {
        WeeklyTrajectory t = w;
        if (k > 0) {
          try {
            t = perturb_trajectory(w, k);
          } catch (const DataError&) {
            continue;
          }
        }
        try {
          weekly.push_back(infer_sqn2vec(model, t.ranks, params.infer_epochs, weekly_seed(params.seed, user, w.week_index)));
        } catch (const DataError&) {
          continue;
        }
      }
      if (weekly.empty()) continue;
      kept_rows.push_back(r);
      user_vectors.push_back(aggregate_user(weekly));
    }
    std::vector<double> distances;
    if (kept_rows.empty()) return summarize_distances(k, distances);
    PointMatrix batch(static_cast<Eigen::Index>(user_vectors.size()), reducer.training_data().cols());
    for (std::size_t i = 0; i < user_vectors.size(); ++i) {
      for (std::size_t d = 0; d < user_vectors[i].size(); ++d) {
        batch(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = user_vectors[i][d];
      }
    }
    const PointMatrix placed = reducer.transform(batch);
    for (std::size_t i = 0; i < kept_rows.size(); ++i) {
      distances.push_back(
          (placed.row(static_cast<Eigen::Index>(i)) - layout.row(static_cast<Eigen::Index>(kept_rows[i]))).norm());
    }
    return summarize_distances(k, std::move(distances));
  };

  report.baseline = run(0);
  for (int k = 1; k <= params.k_max; ++k) {
    report.per_k.push_back(run(k));
    const auto& s = report.per_k.back();
    if (report.per_k.size() > 1 && s.median < report.per_k[report.per_k.size() - 2].median) report.monotone = false;
    for (const auto d : s.distances) report.below_max = report.below_max && d < report.max_pairwise;
  }
  return report;
}

}  // namespace mob2vec
