#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mob2vec/types.hpp"

namespace mob2vec {

enum class Archetype { kCommuter, kHomebody, kRoamer };

const char* to_string(Archetype a);

struct SynthConfig {
  std::size_t n_users = 500;
  int n_weeks = 10;
  std::size_t n_locations = 250;
  double events_per_day = 48.0;
  /// Log-normal sigma of the per-user activity multiplier (mean 1).
  double activity_spread = 1.0;
  /// Multiplier of every persona's daily outing rate; 0 keeps commuters to
  /// home and work and homebodies at home.
  double outing_rate = 1.0;
  double commuter_share = 0.4;
  double homebody_share = 0.3;
  double roamer_share = 0.3;
  /// Probability that an event's location is replaced by a uniform random one.
  double noise_rate = 0.05;
  /// Zipf exponent for secondary-location choice.
  double zipf_exponent = 1.2;
  std::uint64_t seed = 7;
  /// First day of the period, days since 1970-01-01 (default 2012-03-05, a Monday).
  std::int64_t start_day = 15404;
  TimeZone zone;

  void validate() const;
  Interval period() const;
};

struct SyntheticCorpus {
  std::vector<CdrTrajectory> trajectories;
  /// Ground-truth archetype per user, aligned with `trajectories`.
  std::vector<std::pair<UserId, Archetype>> labels;
};

/// Per-user schedules (commuter: weekday home/work/home; homebody: home with
/// occasional outings; roamer: Zipf-chosen stays over many places) sampled
/// by a two-peak diurnal Poisson process, then noise flips. Exact duplicate
/// events are dropped, as parse_cdr does. Deterministic
/// under `seed`; throws ConfigError for n_locations < 3.
SyntheticCorpus generate_corpus(const SynthConfig& config);

/// Sidecar `user_id,archetype` lines.
void write_labels(std::ostream& out, const std::vector<std::pair<UserId, Archetype>>& labels);

}  // namespace mob2vec
