#include "mob2vec/workflow.hpp"

#include "mob2vec/cdr.hpp"
#include "mob2vec/errors.hpp"

namespace mob2vec {

std::map<UserId, std::vector<WeeklyTrajectory>> WeeklyDataset::trained_weeks() const {
  std::map<UserId, std::vector<WeeklyTrajectory>> out;
  for (const auto& [user, list] : weeks) {
    std::vector<WeeklyTrajectory> kept;
    for (const auto& w : list) {
      if (!w.ranks.empty()) kept.push_back(w);
    }
    if (!kept.empty()) out.emplace(user, std::move(kept));
  }
  return out;
}

WeeklyDataset prepare_weeks(const std::vector<CdrTrajectory>& trajectories, const PrepareOptions& options) {
  WeeklyDataset out;
  out.calendar = trim_to_weeks(options.period.value_or(dataset_period(trajectories)), options.zone);
  LocationDictionary dictionary;
  for (const auto& traj : trajectories) {
    const SummaryTrajectory summary = options.summarize ? segment(traj, options.seqscan) : unsummarized(traj);
    if (summary.segments.empty()) {
      out.dropped.push_back(traj.user_id);
      continue;
    }
    RankTrajectory ranked = to_rank(summary);
    if (options.symbols == SymbolMode::kLocation) {
      for (std::size_t i = 0; i < ranked.segments.size(); ++i) {
        ranked.segments[i].rank = dictionary.intern(summary.segments[i].location) + 1;
      }
    }
    out.weeks.emplace(traj.user_id, split_weeks(ranked, out.calendar));
  }
  return out;
}

std::map<UserId, RankDistribution> user_distributions(const WeeklyDataset& dataset) {
  std::map<UserId, RankDistribution> out;
  for (const auto& [user, weeks] : dataset.weeks) {
    SymbolSequence all;
    for (const auto& w : weeks) all.insert(all.end(), w.ranks.begin(), w.ranks.end());
    if (!all.empty()) out.emplace(user, rank_distribution(all));
  }
  return out;
}

std::string weekly_id(const UserId& user, int week_index) { return user + "#" + std::to_string(week_index); }

std::vector<Document> weekly_documents(const WeeklyDataset& dataset) {
  std::vector<Document> docs;
  for (const auto& [user, weeks] : dataset.weeks) {
    for (const auto& w : weeks) {
      if (!w.ranks.empty()) docs.push_back({weekly_id(user, w.week_index), w.ranks});
    }
  }
  return docs;
}

TrainedEmbeddings train_embeddings(const WeeklyDataset& dataset, const MiningParams& mining,
                                   const TrainingConfig& training) {
  TrainedEmbeddings out;
  out.symbol_corpus = weekly_documents(dataset);
  if (out.symbol_corpus.empty()) throw DataError("train_embeddings: no non-empty weekly trajectory");

  std::vector<SymbolSequence> sequences;
  sequences.reserve(out.symbol_corpus.size());
  for (const auto& d : out.symbol_corpus) sequences.push_back(d.tokens);
  MiningResult mined = mine_patterns(sequences, mining);
  out.pattern_corpus = pattern_documents(out.symbol_corpus, mined.sequence_patterns);
  out.model = train_sqn2vec(out.symbol_corpus, out.pattern_corpus, std::move(mined.vocabulary), training);

  std::map<UserId, std::vector<std::vector<float>>> grouped;
  for (const auto& [user, weeks] : dataset.weeks) {
    for (const auto& w : weeks) {
      if (!w.ranks.empty()) grouped[user].push_back(out.model.vector(weekly_id(user, w.week_index)));
    }
  }
  for (const auto& [user, vectors] : grouped) out.user_vectors.emplace(user, aggregate_user(vectors));
  return out;
}

UserPoints to_points(const std::map<UserId, std::vector<float>>& vectors) {
  UserPoints out;
  if (vectors.empty()) return out;
  const auto dim = static_cast<Eigen::Index>(vectors.begin()->second.size());
  out.points.resize(static_cast<Eigen::Index>(vectors.size()), dim);
  Eigen::Index row = 0;
  for (const auto& [user, v] : vectors) {
    out.users.push_back(user);
    for (Eigen::Index d = 0; d < dim; ++d) out.points(row, d) = v[static_cast<std::size_t>(d)];
    ++row;
  }
  return out;
}

std::map<UserId, std::vector<double>> to_map(const UserPoints& points) {
  std::map<UserId, std::vector<double>> out;
  for (std::size_t i = 0; i < points.users.size(); ++i) {
    const auto row = points.points.row(static_cast<Eigen::Index>(i));
    out.emplace(points.users[i], std::vector<double>(row.begin(), row.end()));
  }
  return out;
}

}  // namespace mob2vec
