#include "mob2vec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "mob2vec/errors.hpp"
#include "mob2vec/rng.hpp"

namespace mob2vec {

const char* to_string(Archetype a) {
  switch (a) {
    case Archetype::kCommuter: return "commuter";
    case Archetype::kHomebody: return "homebody";
    case Archetype::kRoamer: return "roamer";
  }
  return "unknown";
}

void SynthConfig::validate() const {
  if (n_users < 1) throw ConfigError("synth: n_users must be >= 1");
  if (n_weeks < 1) throw ConfigError("synth: n_weeks must be >= 1");
  if (n_locations < 3) throw ConfigError("synth: n_locations must be >= 3");
  if (events_per_day <= 0.0) throw ConfigError("synth: events_per_day must be > 0");
  if (activity_spread < 0.0) throw ConfigError("synth: activity_spread must be >= 0");
  if (outing_rate < 0.0) throw ConfigError("synth: outing_rate must be >= 0");
  for (const double s : {commuter_share, homebody_share, roamer_share}) {
    if (s < 0.0 || s > 1.0) throw ConfigError("synth: archetype shares must be in [0, 1]");
  }
  if (std::abs(commuter_share + homebody_share + roamer_share - 1.0) > 1e-9) {
    throw ConfigError("synth: archetype shares must sum to 1");
  }
  if (noise_rate < 0.0 || noise_rate > 1.0) throw ConfigError("synth: noise_rate must be in [0, 1]");
  if (zipf_exponent < 0.0) throw ConfigError("synth: zipf_exponent must be >= 0");
}

Interval SynthConfig::period() const {
  const Timestamp start = zone.from_local(start_day * kSecondsPerDay);
  return {start, start + n_weeks * kSecondsPerWeek};
}

namespace {

constexpr double kHour = 3600.0;

struct Stay {
  double from;  // seconds of day
  double to;
  std::size_t place;  // index into the user's places
};

double normal(Rng& rng, double mean, double sd) {
  // Box-Muller keeps the stream portable across standard libraries.
  const double u1 = std::max(uniform01(rng), 1e-300);
  const double u2 = uniform01(rng);
  return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

std::size_t poisson(Rng& rng, double mean) {
  // Knuth for small means, normal approximation otherwise.
  if (mean < 50.0) {
    const double limit = std::exp(-mean);
    std::size_t k = 0;
    double p = uniform01(rng);
    while (p > limit) {
      ++k;
      p *= uniform01(rng);
    }
    return k;
  }
  return static_cast<std::size_t>(std::max(0.0, std::round(normal(rng, mean, std::sqrt(mean)))));
}

// Two activity peaks (late morning, evening) over a low night floor.
double diurnal(double hour) {
  const auto bump = [](double h, double centre, double width) {
    return std::exp(-(h - centre) * (h - centre) / (2.0 * width * width));
  };
  return 0.15 + 1.0 * bump(hour, 10.0, 2.5) + 1.2 * bump(hour, 19.0, 2.5);
}

double sample_time_of_day(Rng& rng) {
  constexpr double kMax = 1.45;
  while (true) {
    const double h = uniform(rng, 0.0, 24.0);
    if (uniform01(rng) * kMax <= diurnal(h)) return h * kHour;
  }
}

class Zipf {
 public:
  Zipf(std::size_t n, double exponent) : cdf_(n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += 1.0 / std::pow(static_cast<double>(i + 1), exponent);
      cdf_[i] = total;
    }
    for (auto& c : cdf_) c /= total;
  }
  std::size_t operator()(Rng& rng) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), uniform01(rng));
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

struct Persona {
  Archetype archetype;
  std::vector<std::size_t> places;  // [0] home, [1] work for commuters
  double weekday_outings = 0.0;     // Poisson means per day
  double weekend_outings = 0.0;
  double zipf = 1.0;
  double home_between = 0.5;  // chance of a home stop between outings
  int work_days = 5;          // Monday first
};

Persona make_persona(Archetype a, const SynthConfig& c, Rng& rng) {
  Persona p;
  p.archetype = a;
  std::size_t wanted = 0;
  switch (a) {
    case Archetype::kCommuter:
      wanted = 2 + 4 + uniform_index(rng, 7);
      p.weekday_outings = uniform(rng, 0.3, 1.0);
      p.weekend_outings = uniform(rng, 1.0, 2.0);
      p.work_days = 3 + static_cast<int>(uniform_index(rng, 3));
      p.zipf = c.zipf_exponent * uniform(rng, 0.4, 1.0);
      break;
    case Archetype::kHomebody:
      wanted = 1 + 4 + uniform_index(rng, 7);
      p.weekday_outings = uniform(rng, 0.6, 1.5);
      p.weekend_outings = p.weekday_outings;
      p.home_between = 1.0;
      p.zipf = c.zipf_exponent * uniform(rng, 0.4, 1.6);
      break;
    case Archetype::kRoamer:
      wanted = 1 + 15 + uniform_index(rng, 16);
      p.weekday_outings = uniform(rng, 2.5, 4.0);
      p.weekend_outings = p.weekday_outings;
      p.zipf = c.zipf_exponent * uniform(rng, 0.3, 0.7);
      p.home_between = 0.1;
      break;
  }
  p.weekday_outings *= c.outing_rate;
  p.weekend_outings *= c.outing_rate;
  wanted = std::min(wanted, c.n_locations);
  // Distinct personal places by partial shuffle of the dictionary.
  std::vector<std::size_t> all(c.n_locations);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (std::size_t i = 0; i < wanted; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, all.size() - i));
    std::swap(all[i], all[j]);
  }
  p.places.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(wanted));
  return p;
}

// Secondary place (not home, not work for commuters) by Zipf over the extras.
std::size_t pick_extra(const Persona& p, Rng& rng) {
  const std::size_t first = p.archetype == Archetype::kCommuter ? 2 : 1;
  if (p.places.size() <= first) return 0;
  const Zipf zipf(p.places.size() - first, p.zipf);
  return first + zipf(rng);
}

// Outings from `from` until the evening, with optional stops at home between.
void plan_outings(const Persona& p, std::size_t n, double from, Rng& rng, std::vector<Stay>& stays) {
  constexpr double kLast = 22.0 * kHour;
  double t = from;
  std::size_t previous = 0;
  for (std::size_t i = 0; i < n && t < kLast; ++i) {
    std::size_t place = pick_extra(p, rng);
    for (int retry = 0; retry < 4 && place == previous; ++retry) place = pick_extra(p, rng);
    const double end = std::min(kLast + kHour, t + uniform(rng, 1.5, 3.5) * kHour);
    stays.push_back({t, end, place});
    previous = place;
    t = end;
    if (uniform01(rng) < p.home_between) {
      t += uniform(rng, 1.0, 3.0) * kHour;
      previous = 0;
    }
  }
}

std::vector<Stay> plan_day(const Persona& p, int weekday, Rng& rng) {
  const bool weekend = weekday >= 5;
  std::vector<Stay> stays;
  if (p.archetype == Archetype::kCommuter && weekday < p.work_days && p.places.size() > 1) {
    const double leave = normal(rng, 8.0, 0.3) * kHour;
    const double back = normal(rng, 17.5, 0.5) * kHour;
    stays.push_back({leave, back, 1});
    plan_outings(p, poisson(rng, p.weekday_outings), back + 0.5 * kHour, rng, stays);
    return stays;
  }
  std::size_t n = poisson(rng, weekend ? p.weekend_outings : p.weekday_outings);
  if (p.archetype == Archetype::kRoamer) n = std::max<std::size_t>(n, 1);
  plan_outings(p, n, uniform(rng, 9.0, 11.0) * kHour, rng, stays);
  return stays;
}

std::size_t place_at(const std::vector<Stay>& stays, double second) {
  for (const auto& s : stays) {
    if (second >= s.from && second < s.to) return s.place;
  }
  return 0;
}

std::string location_label(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "LA%03zu", i + 1);
  return buf;
}

std::string user_label(std::size_t i, std::size_t n) {
  const int width = std::max(4, static_cast<int>(std::to_string(n).size()));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "u%0*zu", width, i + 1);
  return buf;
}

}  // namespace

SyntheticCorpus generate_corpus(const SynthConfig& config) {
  config.validate();
  SyntheticCorpus out;
  out.trajectories.reserve(config.n_users);
  const Timestamp period_start = config.period().start;

  std::vector<SymbolicLocation> labels;
  labels.reserve(config.n_locations);
  for (std::size_t i = 0; i < config.n_locations; ++i) labels.emplace_back(location_label(i));

  for (std::size_t u = 0; u < config.n_users; ++u) {
    Rng rng(derive_seed(config.seed, u));
    const double draw = uniform01(rng);
    const Archetype a = draw < config.commuter_share                            ? Archetype::kCommuter
                        : draw < config.commuter_share + config.homebody_share ? Archetype::kHomebody
                                                                               : Archetype::kRoamer;
    const Persona persona = make_persona(a, config, rng);
    const double s = config.activity_spread;
    const double rate = config.events_per_day * std::exp(s * normal(rng, 0.0, 1.0) - s * s / 2.0);

    CdrTrajectory traj;
    traj.user_id = user_label(u, config.n_users);
    for (int day = 0; day < config.n_weeks * 7; ++day) {
      const bool weekend = day % 7 >= 5;  // the period starts on a Monday
      const auto stays = plan_day(persona, day % 7, rng);
      const std::size_t count = poisson(rng, rate * (weekend ? 0.8 : 1.0));
      std::vector<double> times(count);
      for (auto& t : times) t = sample_time_of_day(rng);
      std::sort(times.begin(), times.end());
      for (const double t : times) {
        std::size_t location = persona.places[place_at(stays, t)];
        if (uniform01(rng) < config.noise_rate) location = uniform_index(rng, config.n_locations);
        const auto second = std::clamp<Timestamp>(static_cast<Timestamp>(t), 1, kSecondsPerDay - 1);
        CdrEvent event{traj.user_id, period_start + day * kSecondsPerDay + second, labels[location]};
        bool duplicate = false;
        for (auto it = traj.events.rbegin(); it != traj.events.rend() && it->timestamp == event.timestamp; ++it) {
          duplicate = duplicate || *it == event;
        }
        if (!duplicate) traj.events.push_back(std::move(event));
      }
    }
    if (traj.events.empty()) {
      // Keep every user non-empty: one event at home on the first midday.
      traj.events.push_back({traj.user_id, period_start + 12 * 3600, labels[persona.places[0]]});
    }
    out.labels.emplace_back(traj.user_id, a);
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

void write_labels(std::ostream& out, const std::vector<std::pair<UserId, Archetype>>& labels) {
  out << "user_id,archetype\n";
  for (const auto& [user, a] : labels) out << user << ',' << to_string(a) << '\n';
}

}  // namespace mob2vec
