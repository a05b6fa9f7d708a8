#pragma once

#include <map>
#include <optional>
#include <vector>

#include "mob2vec/evaluation.hpp"
#include "mob2vec/generalization.hpp"
#include "mob2vec/patterns.hpp"
#include "mob2vec/reduction.hpp"
#include "mob2vec/seqscan.hpp"
#include "mob2vec/sqn2vec.hpp"

namespace mob2vec {

/// Which symbols the weekly sequences carry.
enum class SymbolMode {
  kRank,      ///< per-user frequency ranks
  kLocation,  ///< dataset-wide location ids (1-based)
};

struct PrepareOptions {
  bool summarize = true;
  SymbolMode symbols = SymbolMode::kRank;
  SeqScanParams seqscan;
  TimeZone zone;
  /// Observation period; the data span when unset.
  std::optional<Interval> period;
};

/// Weekly sequences of every user over a shared calendar.
struct WeeklyDataset {
  WeekCalendar calendar;
  /// All calendar weeks per user, empty ones included.
  std::map<UserId, std::vector<WeeklyTrajectory>> weeks;
  /// Users without any segment.
  std::vector<UserId> dropped;

  /// Non-empty weeks only (the training units).
  std::map<UserId, std::vector<WeeklyTrajectory>> trained_weeks() const;
};

/// Summarize (optionally), rank or label, and split every trajectory.
WeeklyDataset prepare_weeks(const std::vector<CdrTrajectory>& trajectories, const PrepareOptions& options);

/// Rank distribution per user over the concatenation of its weekly sequences;
/// users with no symbols are left out.
std::map<UserId, RankDistribution> user_distributions(const WeeklyDataset& dataset);

/// `user#week`.
std::string weekly_id(const UserId& user, int week_index);

struct TrainedEmbeddings {
  Sqn2VecModel model;
  std::vector<Document> symbol_corpus;
  std::vector<Document> pattern_corpus;
  /// Centroid of the weekly vectors of each user.
  std::map<UserId, std::vector<float>> user_vectors;
};

std::vector<Document> weekly_documents(const WeeklyDataset& dataset);

/// Mines patterns over the weekly sequences and trains the fused model.
TrainedEmbeddings train_embeddings(const WeeklyDataset& dataset, const MiningParams& mining,
                                   const TrainingConfig& training);

/// Users in key order and their embedding rows.
struct UserPoints {
  std::vector<UserId> users;
  PointMatrix points;
};

UserPoints to_points(const std::map<UserId, std::vector<float>>& vectors);
std::map<UserId, std::vector<double>> to_map(const UserPoints& points);

}  // namespace mob2vec
