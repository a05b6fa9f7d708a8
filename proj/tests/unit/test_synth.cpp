#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "mob2vec/cdr.hpp"
#include "mob2vec/errors.hpp"
#include "mob2vec/synth.hpp"
#include "mob2vec/workflow.hpp"

using namespace mob2vec;

namespace {

SynthConfig quiet_config() {
  SynthConfig c;
  c.n_users = 60;
  c.n_weeks = 3;
  c.outing_rate = 0.0;
  c.noise_rate = 0.0;
  c.activity_spread = 0.0;
  return c;
}

std::string serialized(const SyntheticCorpus& corpus) {
  std::ostringstream out;
  write_cdr(out, corpus.trajectories);
  write_labels(out, corpus.labels);
  return out.str();
}

}  // namespace

TEST_CASE("generation is deterministic under the seed") {
  SynthConfig c;
  c.n_users = 40;
  c.n_weeks = 2;
  const auto a = serialized(generate_corpus(c));
  CHECK(a == serialized(generate_corpus(c)));
  c.seed = 8;
  CHECK(a != serialized(generate_corpus(c)));
}

TEST_CASE("events lie inside the period, sorted and without duplicates") {
  SynthConfig c;
  c.n_users = 80;
  c.n_weeks = 2;
  const auto corpus = generate_corpus(c);
  const auto period = c.period();
  CHECK(period.end - period.start == 2 * kSecondsPerWeek);
  REQUIRE(corpus.trajectories.size() == 80);
  REQUIRE(corpus.labels.size() == 80);
  std::set<std::string> locations;
  for (std::size_t u = 0; u < corpus.trajectories.size(); ++u) {
    const auto& t = corpus.trajectories[u];
    CHECK(t.user_id == corpus.labels[u].first);
    CHECK_FALSE(t.events.empty());
    for (std::size_t i = 0; i < t.events.size(); ++i) {
      const auto& e = t.events[i];
      CHECK(e.user_id == t.user_id);
      CHECK(e.timestamp > period.start);
      CHECK(e.timestamp < period.end);
      locations.insert(e.location.label());
      if (i > 0) {
        CHECK(t.events[i - 1].timestamp <= e.timestamp);
        CHECK_FALSE(t.events[i - 1] == e);
      }
    }
  }
  CHECK(locations.size() <= c.n_locations);
}

TEST_CASE("without outings or noise a homebody stays at one place") {
  const auto c = quiet_config();
  const auto corpus = generate_corpus(c);
  std::size_t homebodies = 0;
  for (std::size_t u = 0; u < corpus.trajectories.size(); ++u) {
    if (corpus.labels[u].second != Archetype::kHomebody) continue;
    ++homebodies;
    std::set<std::string> places;
    for (const auto& e : corpus.trajectories[u].events) places.insert(e.location.label());
    CHECK(places.size() == 1);
  }
  CHECK(homebodies > 0);
}

TEST_CASE("without outings or noise a commuter alternates two ranks") {
  const auto c = quiet_config();
  const auto corpus = generate_corpus(c);
  PrepareOptions prep;
  prep.period = c.period();
  const auto dataset = prepare_weeks(corpus.trajectories, prep);
  std::size_t commuters = 0;
  for (const auto& [user, archetype] : corpus.labels) {
    if (archetype != Archetype::kCommuter) continue;
    ++commuters;
    std::set<std::string> places;
    for (const auto& t : corpus.trajectories) {
      if (t.user_id != user) continue;
      for (const auto& e : t.events) places.insert(e.location.label());
    }
    CHECK(places.size() == 2);
    SymbolSequence joined;
    for (const auto& w : dataset.weeks.at(user)) joined.insert(joined.end(), w.ranks.begin(), w.ranks.end());
    CHECK(std::set<Symbol>(joined.begin(), joined.end()) == std::set<Symbol>{1, 2});
    for (std::size_t i = 1; i < joined.size(); ++i) CHECK(joined[i] != joined[i - 1]);
  }
  CHECK(commuters > 0);
}

TEST_CASE("archetypes are separable by rank distribution") {
  SynthConfig c;
  c.n_users = 150;
  c.n_weeks = 4;
  const auto corpus = generate_corpus(c);
  PrepareOptions prep;
  prep.period = c.period();
  const auto dists = user_distributions(prepare_weeks(corpus.trajectories, prep));
  std::map<UserId, Archetype> archetype(corpus.labels.begin(), corpus.labels.end());
  double same = 0.0, different = 0.0;
  std::size_t n_same = 0, n_different = 0;
  for (auto i = dists.begin(); i != dists.end(); ++i) {
    for (auto j = std::next(i); j != dists.end(); ++j) {
      const double d = js_distance(i->second, j->second);
      if (archetype.at(i->first) == archetype.at(j->first)) {
        same += d;
        ++n_same;
      } else {
        different += d;
        ++n_different;
      }
    }
  }
  REQUIRE(n_same > 0);
  REQUIRE(n_different > 0);
  MESSAGE("same " << same / n_same << ", different " << different / n_different);
  CHECK(same / n_same < different / n_different);
}

TEST_CASE("configuration validation") {
  SynthConfig c;
  c.n_locations = 2;
  CHECK_THROWS_AS(generate_corpus(c), ConfigError);
  c = SynthConfig{};
  c.commuter_share = 0.9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SynthConfig{};
  c.outing_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("label sidecar format") {
  std::ostringstream out;
  write_labels(out, {{"u1", Archetype::kCommuter}, {"u2", Archetype::kHomebody}, {"u3", Archetype::kRoamer}});
  CHECK(out.str() == "user_id,archetype\nu1,commuter\nu2,homebody\nu3,roamer\n");
}
