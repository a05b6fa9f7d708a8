#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mob2vec/reduction.hpp"
#include "mob2vec/sqn2vec.hpp"
#include "mob2vec/types.hpp"

namespace mob2vec {

/// Empirical distribution over rank values; entry r-1 holds P(rank = r).
class RankDistribution {
 public:
  RankDistribution() = default;
  explicit RankDistribution(std::vector<double> probabilities);

  const std::vector<double>& probabilities() const { return p_; }
  std::size_t support() const { return p_.size(); }
  /// Copy zero-padded to `size` ranks.
  RankDistribution padded(std::size_t size) const;

 private:
  std::vector<double> p_;
};

/// Relative frequency of each rank value. Throws DataError when empty.
RankDistribution rank_distribution(std::span<const Symbol> ranks);

/// Square root of the base-2 Jensen-Shannon divergence, in [0, 1]. Throws
/// DataError when the supports differ in length.
double js_distance(std::span<const double> g1, std::span<const double> g2);

/// Pads both distributions to their union support first.
double js_distance(const RankDistribution& g1, const RankDistribution& g2);

/// Sample Pearson correlation. Throws DataError on length mismatch, fewer
/// than two values, or zero variance.
double pearson_r(std::span<const double> xs, std::span<const double> ys);

enum class DistanceKind { kEuclidean, kCosine };

struct QualityParams {
  std::size_t sample = 800;
  DistanceKind distance = DistanceKind::kEuclidean;
  std::uint64_t seed = 1;
};

struct PairDistance {
  UserId a;
  UserId b;
  double embedding;
  double js;
};

struct EvaluationReport {
  std::vector<UserId> sampled;
  std::vector<PairDistance> pairs;
  double r = 0.0;
  QualityParams params;
};

/// Pearson r between pairwise embedding distances and Jensen-Shannon
/// distances of the users' rank distributions, over all pairs of a seeded
/// uniform user sample.
EvaluationReport embedding_quality(const std::map<UserId, std::vector<double>>& embeddings,
                                   const std::map<UserId, RankDistribution>& distributions,
                                   const QualityParams& params);

/// Removes every occurrence of the k largest distinct ranks. With at most k
/// distinct ranks only rank 1 survives. Throws DataError when nothing is left.
WeeklyTrajectory perturb_trajectory(const WeeklyTrajectory& weekly, int k);

struct SimilarityParams {
  std::size_t n_sources = 1000;
  int k_max = 5;
  int infer_epochs = 50;
  std::uint64_t seed = 1;
};

struct DistanceSummary {
  int k = 0;
  std::vector<double> distances;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

struct SimilarityReport {
  std::vector<UserId> sources;
  /// Unperturbed re-inference of each source.
  DistanceSummary baseline;
  /// One entry per k = 1..k_max.
  std::vector<DistanceSummary> per_k;
  /// Largest distance between two points of the fitted layout.
  double max_pairwise = 0.0;
  bool monotone = true;
  bool below_max = true;
};

/// Inference seed of one weekly trajectory, independent of batch order.
std::uint64_t weekly_seed(std::uint64_t seed, const UserId& user, int week_index);

DistanceSummary summarize_distances(int k, std::vector<double> distances);

/// Largest Euclidean distance between two rows.
double max_pairwise_distance(const PointMatrix& points);

/// Perturbs the weekly trajectories of sampled source users for k = 1..k_max,
/// re-embeds them through inference, aggregation and the fitted reducer, and
/// measures the distance to each source's fitted point. `layout_users[i]`
/// owns row i of the reducer's layout; `weeks` holds each user's trained
/// (non-empty) weekly trajectories.
SimilarityReport similarity_experiment(const Sqn2VecModel& model, const UmapReducer& reducer,
                                       const std::vector<UserId>& layout_users,
                                       const std::map<UserId, std::vector<WeeklyTrajectory>>& weeks,
                                       const SimilarityParams& params);

}  // namespace mob2vec
