#include "mob2vec/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mob2vec/artifacts.hpp"
#include "mob2vec/errors.hpp"
#include "mob2vec/generalization.hpp"
#include "mob2vec/hash.hpp"
#include "mob2vec/model_io.hpp"
#include "mob2vec/version.hpp"

namespace mob2vec {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::pair<Stage, std::string_view> kStageNames[] = {
    {Stage::kSynth, "synth"},         {Stage::kIngest, "ingest"},       {Stage::kSummarize, "summarize"},
    {Stage::kRank, "rank"},           {Stage::kSplit, "split"},         {Stage::kMine, "mine"},
    {Stage::kTrain, "train"},         {Stage::kAggregate, "aggregate"}, {Stage::kReduce, "reduce"},
    {Stage::kEvaluate, "evaluate"},   {Stage::kPerturb, "perturb-experiment"}, {Stage::kInfer, "infer"},
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
std::string shortest(T v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config: " + std::string(key) + " = '" + std::string(value) + "' (expected " +
                    std::string(expected) + ")");
}

template <typename T>
T parse_value(std::string_view key, std::string_view v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return std::string(v);
  } else if constexpr (std::is_same_v<T, bool>) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_value(key, v, "true or false");
  } else {
    T out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) bad_value(key, v, "a number");
    return out;
  }
}

template <typename T>
std::string format_value(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else {
    return shortest(v);
  }
}

struct KeyDef {
  ConfigKey info;
  std::function<void(PipelineConfig&, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename Ref>
KeyDef field(std::string name, std::string help, Ref ref) {
  using T = std::remove_reference_t<decltype(ref(std::declval<PipelineConfig&>()))>;
  return {{name, std::move(help)},
          [ref, name](PipelineConfig& c, std::string_view v) { ref(c) = parse_value<T>(name, v); },
          [ref](const PipelineConfig& c) { return format_value(ref(const_cast<PipelineConfig&>(c))); }};
}

template <typename E, typename Ref>
KeyDef choice(std::string name, std::string help, Ref ref, std::vector<std::pair<std::string, E>> options) {
  std::string expected;
  for (const auto& [label, _] : options) expected += (expected.empty() ? "" : " or ") + label;
  return {{name, std::move(help) + " (" + expected + ")"},
          [ref, name, options, expected](PipelineConfig& c, std::string_view v) {
            for (const auto& [label, value] : options) {
              if (v == label) {
                ref(c) = value;
                return;
              }
            }
            bad_value(name, v, expected);
          },
          [ref, options](const PipelineConfig& c) {
            for (const auto& [label, value] : options) {
              if (ref(const_cast<PipelineConfig&>(c)) == value) return label;
            }
            return std::string();
          }};
}

std::string field_name(CdrField f) {
  switch (f) {
    case CdrField::kUser: return "user";
    case CdrField::kTimestamp: return "timestamp";
    case CdrField::kLocation: return "location";
  }
  return {};
}

std::vector<KeyDef> build_keys() {
  std::vector<KeyDef> k;
  k.push_back(field("paths.run_dir", "directory holding every stage output", [](PipelineConfig& c) -> auto& { return c.run_dir; }));
  k.push_back(field("paths.input", "CDR file to ingest; empty ingests the synth output", [](PipelineConfig& c) -> auto& { return c.input; }));
  k.push_back(field("paths.infer_input", "weekly corpus to infer; empty infers the split output", [](PipelineConfig& c) -> auto& { return c.infer_input; }));
  k.push_back(field("threads", "worker threads; 1 is deterministic", [](PipelineConfig& c) -> auto& { return c.threads; }));

  k.push_back({{"parse.delimiter", "CDR field delimiter (a character or 'tab')"},
               [](PipelineConfig& c, std::string_view v) {
                 if (v == "tab") {
                   c.parse.delimiter = '\t';
                 } else if (v.size() == 1) {
                   c.parse.delimiter = v[0];
                 } else {
                   bad_value("parse.delimiter", v, "one character or 'tab'");
                 }
               },
               [](const PipelineConfig& c) { return c.parse.delimiter == '\t' ? std::string("tab") : std::string(1, c.parse.delimiter); }});
  k.push_back({{"parse.fields", "CDR column order, a permutation of user,timestamp,location"},
               [](PipelineConfig& c, std::string_view v) {
                 std::array<CdrField, 3> order{};
                 std::size_t n = 0;
                 bool seen[3] = {false, false, false};
                 std::size_t start = 0;
                 while (start <= v.size()) {
                   const auto pos = std::min(v.find(',', start), v.size());
                   const auto name = trim(v.substr(start, pos - start));
                   CdrField f;
                   if (name == "user") f = CdrField::kUser;
                   else if (name == "timestamp") f = CdrField::kTimestamp;
                   else if (name == "location") f = CdrField::kLocation;
                   else bad_value("parse.fields", v, "a permutation of user,timestamp,location");
                   if (n == 3 || seen[static_cast<int>(f)]) bad_value("parse.fields", v, "a permutation of user,timestamp,location");
                   seen[static_cast<int>(f)] = true;
                   order[n++] = f;
                   start = pos + 1;
                 }
                 if (n != 3) bad_value("parse.fields", v, "a permutation of user,timestamp,location");
                 c.parse.field_order = order;
               },
               [](const PipelineConfig& c) {
                 return field_name(c.parse.field_order[0]) + "," + field_name(c.parse.field_order[1]) + "," +
                        field_name(c.parse.field_order[2]);
               }});
  k.push_back(field("parse.header", "CDR file starts with a header line", [](PipelineConfig& c) -> auto& { return c.parse.has_header; }));
  k.push_back({{"parse.utc_offset_minutes", "local time offset used for days and weeks"},
               [](PipelineConfig& c, std::string_view v) {
                 c.parse.zone.utc_offset_seconds = parse_value<std::int32_t>("parse.utc_offset_minutes", v) * 60;
               },
               [](const PipelineConfig& c) { return shortest(c.parse.zone.utc_offset_seconds / 60); }});
  k.push_back(field("parse.period_start", "observation period start (ISO-8601 or epoch); empty uses the data", [](PipelineConfig& c) -> auto& { return c.period_start; }));
  k.push_back(field("parse.period_end", "observation period end, exclusive", [](PipelineConfig& c) -> auto& { return c.period_end; }));

  k.push_back(field("synth.users", "synthetic users", [](PipelineConfig& c) -> auto& { return c.synth.n_users; }));
  k.push_back(field("synth.weeks", "synthetic weeks", [](PipelineConfig& c) -> auto& { return c.synth.n_weeks; }));
  k.push_back(field("synth.locations", "symbolic locations in the dictionary", [](PipelineConfig& c) -> auto& { return c.synth.n_locations; }));
  k.push_back(field("synth.events_per_day", "mean events per user and day", [](PipelineConfig& c) -> auto& { return c.synth.events_per_day; }));
  k.push_back(field("synth.activity_spread", "log-normal sigma of per-user activity", [](PipelineConfig& c) -> auto& { return c.synth.activity_spread; }));
  k.push_back(field("synth.outing_rate", "multiplier of daily outing rates", [](PipelineConfig& c) -> auto& { return c.synth.outing_rate; }));
  k.push_back(field("synth.commuter_share", "fraction of commuters", [](PipelineConfig& c) -> auto& { return c.synth.commuter_share; }));
  k.push_back(field("synth.homebody_share", "fraction of homebodies", [](PipelineConfig& c) -> auto& { return c.synth.homebody_share; }));
  k.push_back(field("synth.roamer_share", "fraction of roamers", [](PipelineConfig& c) -> auto& { return c.synth.roamer_share; }));
  k.push_back(field("synth.noise_rate", "probability of a random location flip", [](PipelineConfig& c) -> auto& { return c.synth.noise_rate; }));
  k.push_back(field("synth.zipf_exponent", "Zipf exponent of secondary places", [](PipelineConfig& c) -> auto& { return c.synth.zipf_exponent; }));
  k.push_back(field("synth.seed", "generator seed", [](PipelineConfig& c) -> auto& { return c.synth.seed; }));
  k.push_back({{"synth.start_date", "first day of the synthetic period (YYYY-MM-DD)"},
               [](PipelineConfig& c, std::string_view v) {
                 int y = 0;
                 unsigned m = 0, d = 0;
                 char dash1 = 0, dash2 = 0;
                 std::istringstream in{std::string(v)};
                 if (!(in >> y >> dash1 >> m >> dash2 >> d) || dash1 != '-' || dash2 != '-' || m < 1 || m > 12 ||
                     d < 1 || d > 31 || in.peek() != std::char_traits<char>::eof()) {
                   bad_value("synth.start_date", v, "YYYY-MM-DD");
                 }
                 c.synth.start_day = days_from_civil(y, m, d);
               },
               [](const PipelineConfig& c) {
                 const auto date = civil_from_days(c.synth.start_day);
                 char buf[32];
                 std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(date.year), date.month,
                               date.day);
                 return std::string(buf);
               }});

  k.push_back(field("seqscan.enabled", "summarize with SeqScan-d; false keeps one segment per event", [](PipelineConfig& c) -> auto& { return c.summarize; }));
  k.push_back(field("seqscan.n", "minimum occurrences of a segment's location", [](PipelineConfig& c) -> auto& { return c.seqscan.min_occurrences; }));
  k.push_back({{"seqscan.delta_minutes", "minimum presence of a segment's location, minutes"},
               [](PipelineConfig& c, std::string_view v) {
                 const double minutes = parse_value<double>("seqscan.delta_minutes", v);
                 if (!std::isfinite(minutes)) bad_value("seqscan.delta_minutes", v, "a finite number");
                 c.seqscan.min_presence = static_cast<Timestamp>(std::llround(minutes * 60.0));
               },
               [](const PipelineConfig& c) { return shortest(static_cast<double>(c.seqscan.min_presence) / 60.0); }});

  k.push_back(choice<SymbolMode>("rank.symbols", "weekly symbols", [](PipelineConfig& c) -> auto& { return c.symbols; },
                                 {{"rank", SymbolMode::kRank}, {"location", SymbolMode::kLocation}}));

  k.push_back(field("mining.min_support", "fraction of weekly sequences containing a pattern", [](PipelineConfig& c) -> auto& { return c.mining.min_support; }));
  k.push_back(field("mining.gap", "maximum symbols between consecutive pattern symbols", [](PipelineConfig& c) -> auto& { return c.mining.gap; }));
  k.push_back(field("mining.max_length", "longest mined pattern", [](PipelineConfig& c) -> auto& { return c.mining.max_pattern_length; }));

  k.push_back(field("training.dim", "embedding width", [](PipelineConfig& c) -> auto& { return c.training.dim; }));
  k.push_back(field("training.epochs", "training epochs", [](PipelineConfig& c) -> auto& { return c.training.epochs; }));
  k.push_back(field("training.initial_lr", "initial learning rate", [](PipelineConfig& c) -> auto& { return c.training.initial_lr; }));
  k.push_back(field("training.final_lr", "final learning rate", [](PipelineConfig& c) -> auto& { return c.training.final_lr; }));
  k.push_back(field("training.negatives", "negative samples per positive", [](PipelineConfig& c) -> auto& { return c.training.negatives; }));
  k.push_back(field("training.noise_exponent", "exponent of the noise distribution", [](PipelineConfig& c) -> auto& { return c.training.noise_exponent; }));
  k.push_back(field("training.window", "PV-DM context tokens per side", [](PipelineConfig& c) -> auto& { return c.training.window; }));
  k.push_back(field("training.seed", "training seed", [](PipelineConfig& c) -> auto& { return c.training.seed; }));
  k.push_back(choice<Architecture>("training.mode", "paragraph vector architecture", [](PipelineConfig& c) -> auto& { return c.training.mode; },
                                   {{"dbow", Architecture::kDbow}, {"dm", Architecture::kDm}}));
  k.push_back(choice<Fusion>("training.fusion", "symbol and pattern fusion", [](PipelineConfig& c) -> auto& { return c.training.fusion; },
                             {{"sep", Fusion::kSep}, {"sim", Fusion::kSim}}));

  k.push_back(choice<ReducerKind>("reduction.method", "2D reducer", [](PipelineConfig& c) -> auto& { return c.reducer; },
                                  {{"umap", ReducerKind::kUmap}, {"pca", ReducerKind::kPca}}));
  k.push_back(field("reduction.n_neighbors", "UMAP neighbourhood size", [](PipelineConfig& c) -> auto& { return c.umap.n_neighbors; }));
  k.push_back(field("reduction.min_dist", "UMAP minimum distance", [](PipelineConfig& c) -> auto& { return c.umap.min_dist; }));
  k.push_back(field("reduction.spread", "UMAP spread", [](PipelineConfig& c) -> auto& { return c.umap.spread; }));
  k.push_back(field("reduction.epochs", "UMAP layout epochs", [](PipelineConfig& c) -> auto& { return c.umap.epochs; }));
  k.push_back(field("reduction.transform_epochs", "UMAP epochs per transformed point; 0 uses epochs / 3", [](PipelineConfig& c) -> auto& { return c.umap.transform_epochs; }));
  k.push_back(field("reduction.negative_sample_rate", "UMAP negative samples per edge", [](PipelineConfig& c) -> auto& { return c.umap.negative_sample_rate; }));
  k.push_back(field("reduction.learning_rate", "UMAP learning rate", [](PipelineConfig& c) -> auto& { return c.umap.learning_rate; }));
  k.push_back(choice<UmapInit>("reduction.init", "UMAP initial layout", [](PipelineConfig& c) -> auto& { return c.umap.init; },
                               {{"pca", UmapInit::kPca}, {"random", UmapInit::kRandom}}));
  k.push_back(field("reduction.seed", "UMAP seed", [](PipelineConfig& c) -> auto& { return c.umap.seed; }));

  k.push_back(field("evaluation.sample", "users sampled for pairwise distances", [](PipelineConfig& c) -> auto& { return c.evaluation.sample; }));
  k.push_back(choice<DistanceKind>("evaluation.distance", "distance between layout points", [](PipelineConfig& c) -> auto& { return c.evaluation.distance; },
                                   {{"euclidean", DistanceKind::kEuclidean}, {"cosine", DistanceKind::kCosine}}));
  k.push_back(field("evaluation.seed", "user sampling seed", [](PipelineConfig& c) -> auto& { return c.evaluation.seed; }));

  k.push_back(field("perturb.n_sources", "sampled source users", [](PipelineConfig& c) -> auto& { return c.perturb.n_sources; }));
  k.push_back(field("perturb.k_max", "largest number of removed ranks", [](PipelineConfig& c) -> auto& { return c.perturb.k_max; }));
  k.push_back(field("perturb.infer_epochs", "inference epochs per weekly trajectory", [](PipelineConfig& c) -> auto& { return c.perturb.infer_epochs; }));
  k.push_back(field("perturb.seed", "source sampling and inference seed", [](PipelineConfig& c) -> auto& { return c.perturb.seed; }));

  k.push_back(field("infer.epochs", "inference epochs per weekly trajectory", [](PipelineConfig& c) -> auto& { return c.infer_epochs; }));
  k.push_back(field("infer.seed", "inference seed", [](PipelineConfig& c) -> auto& { return c.infer_seed; }));
  return k;
}

const std::vector<KeyDef>& registry() {
  static const std::vector<KeyDef> keys = build_keys();
  return keys;
}

const KeyDef* find_key(std::string_view name) {
  for (const auto& k : registry()) {
    if (k.info.name == name) return &k;
  }
  return nullptr;
}

std::vector<std::string> stage_prefixes(Stage stage) {
  switch (stage) {
    case Stage::kSynth: return {"synth.", "parse.delimiter", "parse.fields", "parse.header", "parse.utc_offset_minutes"};
    case Stage::kIngest: return {"paths.input", "parse."};
    case Stage::kSummarize: return {"seqscan."};
    case Stage::kRank: return {};
    case Stage::kSplit: return {"rank.", "parse.utc_offset_minutes"};
    case Stage::kMine: return {"mining."};
    case Stage::kTrain: return {"training.", "threads"};
    case Stage::kAggregate: return {};
    case Stage::kReduce: return {"reduction.", "threads"};
    case Stage::kEvaluate: return {"evaluation."};
    case Stage::kPerturb: return {"perturb."};
    case Stage::kInfer: return {"infer.", "paths.infer_input"};
  }
  return {};
}

// --- files --------------------------------------------------------------

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), {}};
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void write_json(const fs::path& path, const ojson& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

ojson read_json(const fs::path& path) {
  try {
    return ojson::parse(read_file(path));
  } catch (const ojson::exception& e) {
    throw DataError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

// --- stage plans ----------------------------------------------------------

struct Input {
  fs::path path;
  /// Stage that produces the file; none for user-supplied files.
  std::optional<Stage> producer;
};

struct Plan {
  std::vector<Input> inputs;
  std::vector<fs::path> outputs;
};

fs::path artifact(const PipelineConfig& c, Stage s, const char* name) { return stage_dir(c, s) / name; }

Plan plan_for(Stage stage, const PipelineConfig& c) {
  auto in = [&](Stage s, const char* name) { return Input{artifact(c, s, name), s}; };
  auto out = [&](const char* name) { return artifact(c, stage, name); };
  switch (stage) {
    case Stage::kSynth:
      return {{}, {out("cdr.csv"), out("labels.csv"), out("period.json")}};
    case Stage::kIngest:
      if (c.input.empty()) return {{in(Stage::kSynth, "cdr.csv"), in(Stage::kSynth, "period.json")}, {out("events.csv"), out("corpus.json")}};
      return {{Input{c.input, std::nullopt}}, {out("events.csv"), out("corpus.json")}};
    case Stage::kSummarize:
      return {{in(Stage::kIngest, "events.csv")}, {out("summaries.jsonl")}};
    case Stage::kRank:
      return {{in(Stage::kSummarize, "summaries.jsonl")}, {out("ranks.jsonl")}};
    case Stage::kSplit:
      return {{in(Stage::kRank, "ranks.jsonl"), in(Stage::kIngest, "corpus.json")}, {out("weekly.txt"), out("calendar.json")}};
    case Stage::kMine:
      return {{in(Stage::kSplit, "weekly.txt")}, {out("patterns.txt"), out("sequence_patterns.txt")}};
    case Stage::kTrain:
      return {{in(Stage::kSplit, "weekly.txt"), in(Stage::kMine, "patterns.txt"), in(Stage::kMine, "sequence_patterns.txt")},
              {out("model.m2v"), out("corpus.json")}};
    case Stage::kAggregate:
      return {{in(Stage::kTrain, "model.m2v"), in(Stage::kSplit, "weekly.txt")}, {out("user_vectors.tsv")}};
    case Stage::kReduce:
      return {{in(Stage::kAggregate, "user_vectors.tsv"), in(Stage::kTrain, "model.m2v")}, {out("layout.csv"), out("model.m2v")}};
    case Stage::kEvaluate:
      return {{in(Stage::kReduce, "layout.csv"), in(Stage::kRank, "ranks.jsonl"), in(Stage::kSplit, "calendar.json")},
              {out("evaluation.json"), out("pairs.csv")}};
    case Stage::kPerturb:
      return {{in(Stage::kReduce, "model.m2v"), in(Stage::kReduce, "layout.csv"), in(Stage::kSplit, "weekly.txt")},
              {out("similarity.json"), out("distances.csv")}};
    case Stage::kInfer: {
      Plan p{{in(Stage::kReduce, "model.m2v")}, {out("inferred.csv"), out("vectors.tsv"), out("report.json")}};
      p.inputs.push_back(c.infer_input.empty() ? in(Stage::kSplit, "weekly.txt") : Input{c.infer_input, std::nullopt});
      return p;
    }
  }
  return {};
}

std::string relative_name(const PipelineConfig& c, const fs::path& p) {
  const auto rel = p.lexically_relative(c.run_dir);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.generic_string();
}

ojson file_hashes(const PipelineConfig& c, const std::vector<fs::path>& paths) {
  ojson j = ojson::object();
  for (const auto& p : paths) j[relative_name(c, p)] = hex64(fnv1a(read_file(p)));
  return j;
}

/// Small JSON artifacts carry the tool version and the stage's own config hash.
ojson artifact_header(const PipelineConfig& c, Stage s) {
  ojson j;
  j["tool"] = "mob2vec";
  j["version"] = kToolVersion;
  j["stage"] = stage_name(s);
  j["stage_config_hash"] = hex64(c.stage_hash(s));
  return j;
}

/// Reports also echo the configuration, except the run directory.
ojson report_header(const PipelineConfig& c, Stage s) {
  ojson j;
  j["tool"] = "mob2vec";
  j["version"] = kToolVersion;
  j["stage"] = stage_name(s);
  j["config_hash"] = hex64(c.hash());
  ojson config = ojson::object();
  for (const auto& k : registry()) {
    if (k.info.name != "paths.run_dir") config[k.info.name] = k.get(c);
  }
  j["config"] = std::move(config);
  return j;
}

ParseOptions canonical_cdr(const PipelineConfig& c) {
  ParseOptions o;
  o.zone = c.parse.zone;
  return o;
}

Interval read_period(const ojson& j) { return {j.at("start").get<Timestamp>(), j.at("end").get<Timestamp>()}; }

WeekCalendar read_calendar(const fs::path& path) {
  const auto j = read_json(path);
  WeekCalendar cal;
  try {
    cal.first_monday = j.at("first_monday").get<Timestamp>();
    cal.weeks = j.at("weeks").get<int>();
    cal.zone.utc_offset_seconds = j.at("utc_offset_seconds").get<std::int32_t>();
  } catch (const ojson::exception& e) {
    throw DataError("malformed calendar '" + path.string() + "': " + e.what());
  }
  return cal;
}

std::map<UserId, std::vector<WeeklyTrajectory>> non_empty(std::map<UserId, std::vector<WeeklyTrajectory>> weeks) {
  std::map<UserId, std::vector<WeeklyTrajectory>> out;
  for (auto& [user, list] : weeks) {
    std::vector<WeeklyTrajectory> kept;
    for (auto& w : list) {
      if (!w.ranks.empty()) kept.push_back(std::move(w));
    }
    if (!kept.empty()) out.emplace(user, std::move(kept));
  }
  return out;
}

std::map<UserId, std::vector<WeeklyTrajectory>> load_weekly(const fs::path& path) {
  auto in = open_in(path);
  return read_weekly(in);
}

ojson summary_json(const DistanceSummary& s) {
  return {{"k", s.k}, {"n", s.distances.size()}, {"min", s.min}, {"q1", s.q1},
          {"median", s.median}, {"q3", s.q3}, {"max", s.max}};
}

PointMatrix rows_of(const std::vector<std::vector<float>>& vectors, std::size_t dim) {
  PointMatrix m(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dim) throw DataError("vector width differs from the model");
    for (std::size_t d = 0; d < dim; ++d) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = vectors[i][d];
  }
  return m;
}

// --- stages -------------------------------------------------------------

std::string run_synth(const PipelineConfig& c, const Plan& p) {
  SynthConfig sc = c.synth;
  sc.zone = c.parse.zone;
  const auto corpus = generate_corpus(sc);
  {
    auto out = open_out(p.outputs[0]);
    write_cdr(out, corpus.trajectories, c.parse);
  }
  {
    auto out = open_out(p.outputs[1]);
    write_labels(out, corpus.labels);
  }
  const Interval period = sc.period();
  write_json(p.outputs[2], ojson{{"start", period.start}, {"end", period.end}});
  std::size_t events = 0;
  for (const auto& t : corpus.trajectories) events += t.events.size();
  return std::to_string(corpus.trajectories.size()) + " users, " + std::to_string(events) + " events";
}

std::string run_ingest(const PipelineConfig& c, const Plan& p) {
  ParseOptions options = c.parse;
  std::optional<Interval> period = c.period();
  if (!period && c.input.empty()) period = read_period(read_json(p.inputs[1].path));
  options.observation_period = c.period();
  std::vector<CdrTrajectory> trajectories;
  {
    auto in = open_in(p.inputs[0].path);
    trajectories = parse_cdr(in, options);
  }
  if (trajectories.empty()) throw DataError("ingest: no CDR records in '" + p.inputs[0].path.string() + "'");
  if (!period) period = dataset_period(trajectories);
  {
    auto out = open_out(p.outputs[0]);
    write_cdr(out, trajectories, canonical_cdr(c));
  }
  LocationDictionary dictionary;
  std::vector<SymbolSequence> sequences;
  std::size_t events = 0;
  for (const auto& t : trajectories) {
    SymbolSequence s;
    for (const auto& e : t.events) s.push_back(dictionary.intern(e.location));
    events += s.size();
    sequences.push_back(std::move(s));
  }
  const auto stats = corpus_stats(sequences);
  ojson j = artifact_header(c, Stage::kIngest);
  j["users"] = trajectories.size();
  j["events"] = events;
  j["period"] = {{"start", period->start}, {"end", period->end}};
  j["stats"] = {{"trajectories", stats.trajectory_count}, {"symbols", stats.symbol_count},
                {"max_length", stats.max_length}, {"avg_length", stats.avg_length}};
  write_json(p.outputs[1], j);
  return std::to_string(trajectories.size()) + " users, " + std::to_string(events) + " events, " +
         std::to_string(stats.symbol_count) + " locations";
}

std::string run_summarize(const PipelineConfig& c, const Plan& p) {
  std::vector<CdrTrajectory> trajectories;
  {
    auto in = open_in(p.inputs[0].path);
    trajectories = parse_cdr(in, canonical_cdr(c));
  }
  std::vector<SummaryTrajectory> summaries;
  std::size_t segments = 0, noise = 0, transitions = 0;
  for (const auto& t : trajectories) {
    summaries.push_back(c.summarize ? segment(t, c.seqscan) : unsummarized(t));
    segments += summaries.back().segments.size();
    noise += summaries.back().local_noise_count();
    transitions += summaries.back().transition_count();
  }
  auto out = open_out(p.outputs[0]);
  write_summaries(out, summaries);
  return std::to_string(segments) + " segments, " + std::to_string(noise) + " local noise, " +
         std::to_string(transitions) + " transitions";
}

std::string run_rank(const PipelineConfig&, const Plan& p) {
  std::vector<SummaryTrajectory> summaries;
  {
    auto in = open_in(p.inputs[0].path);
    summaries = read_summaries(in);
  }
  std::vector<RankTrajectory> ranks;
  std::size_t dropped = 0;
  for (const auto& s : summaries) {
    if (s.segments.empty()) {
      ++dropped;
      continue;
    }
    ranks.push_back(to_rank(s));
  }
  auto out = open_out(p.outputs[0]);
  write_rank_trajectories(out, ranks);
  return std::to_string(ranks.size()) + " users ranked, " + std::to_string(dropped) + " without segments";
}

std::string run_split(const PipelineConfig& c, const Plan& p) {
  std::vector<RankTrajectory> ranks;
  {
    auto in = open_in(p.inputs[0].path);
    ranks = read_rank_trajectories(in);
  }
  Interval period;
  try {
    period = read_period(read_json(p.inputs[1].path).at("period"));
  } catch (const ojson::exception& e) {
    throw DataError(std::string("split: malformed ingest corpus.json: ") + e.what());
  }
  const WeekCalendar calendar = trim_to_weeks(period, c.parse.zone);
  LocationDictionary dictionary;
  std::map<UserId, std::vector<WeeklyTrajectory>> weeks;
  std::size_t non_empty_weeks = 0;
  for (auto r : ranks) {
    if (c.symbols == SymbolMode::kLocation) {
      for (auto& s : r.segments) {
        if (s.rank < 1 || s.rank > r.max_rank()) throw DataError("split: rank outside the location map of " + r.user_id);
        s.rank = dictionary.intern(r.locations[static_cast<std::size_t>(s.rank - 1)]) + 1;
      }
    }
    auto list = split_weeks(r, calendar);
    for (const auto& w : list) non_empty_weeks += w.ranks.empty() ? 0 : 1;
    weeks.emplace(r.user_id, std::move(list));
  }
  {
    auto out = open_out(p.outputs[0]);
    write_weekly(out, weeks);
  }
  write_json(p.outputs[1], ojson{{"first_monday", calendar.first_monday},
                                 {"weeks", calendar.weeks},
                                 {"utc_offset_seconds", calendar.zone.utc_offset_seconds}});
  return std::to_string(calendar.weeks) + " weeks, " + std::to_string(non_empty_weeks) + " non-empty weekly trajectories";
}

std::string run_mine(const PipelineConfig& c, const Plan& p) {
  const auto weeks = non_empty(load_weekly(p.inputs[0].path));
  std::vector<std::string> ids;
  std::vector<SymbolSequence> sequences;
  for (const auto& [user, list] : weeks) {
    for (const auto& w : list) {
      ids.push_back(weekly_id(user, w.week_index));
      sequences.push_back(w.ranks);
    }
  }
  if (sequences.empty()) throw DataError("mine: no non-empty weekly trajectory");
  const auto mined = mine_patterns(sequences, c.mining);
  {
    auto out = open_out(p.outputs[0]);
    mined.vocabulary.write(out);
  }
  auto out = open_out(p.outputs[1]);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << '\t';
    const auto& set = mined.sequence_patterns[i];
    for (std::size_t k = 0; k < set.size(); ++k) out << (k ? " " : "") << set[k];
    out << '\n';
  }
  return std::to_string(mined.vocabulary.size()) + " patterns over " + std::to_string(ids.size()) + " sequences";
}

std::string run_train(const PipelineConfig& c, const Plan& p) {
  const auto weeks = non_empty(load_weekly(p.inputs[0].path));
  std::vector<Document> symbols;
  for (const auto& [user, list] : weeks) {
    for (const auto& w : list) symbols.push_back({weekly_id(user, w.week_index), w.ranks});
  }
  if (symbols.empty()) throw DataError("train: no non-empty weekly trajectory");

  PatternVocabulary vocabulary;
  {
    auto in = open_in(p.inputs[1].path);
    vocabulary = PatternVocabulary::read(in, c.mining.gap);
  }
  std::map<std::string, std::vector<PatternId>> sets;
  {
    auto in = open_in(p.inputs[2].path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw RecordError(line_no, "expected seq_id<TAB>pattern ids");
      std::vector<PatternId> ids;
      std::istringstream fields(line.substr(tab + 1));
      std::string field;
      while (fields >> field) {
        PatternId id = 0;
        const auto res = std::from_chars(field.data(), field.data() + field.size(), id);
        if (res.ec != std::errc{} || res.ptr != field.data() + field.size() || id >= vocabulary.size()) {
          throw RecordError(line_no, "bad pattern id '" + field + "'");
        }
        ids.push_back(id);
      }
      sets[line.substr(0, tab)] = std::move(ids);
    }
  }
  std::vector<std::vector<PatternId>> aligned;
  for (const auto& d : symbols) {
    const auto it = sets.find(d.id);
    if (it == sets.end()) throw DataError("train: no mined pattern set for '" + d.id + "'; rerun mine");
    aligned.push_back(it->second);
  }
  const auto patterns = pattern_documents(symbols, aligned);

  TrainingConfig tc = c.training;
  tc.threads = c.threads;
  ModelBundle bundle{train_sqn2vec(symbols, patterns, std::move(vocabulary), tc), {}};
  save_model(p.outputs[0].string(), bundle);

  std::vector<SymbolSequence> symbol_seqs, pattern_seqs;
  for (const auto& d : symbols) symbol_seqs.push_back(d.tokens);
  for (const auto& d : patterns) {
    if (!d.tokens.empty()) pattern_seqs.push_back(d.tokens);
  }
  auto stats_json = [](const std::vector<SymbolSequence>& seqs) {
    if (seqs.empty()) return ojson(nullptr);
    const auto s = corpus_stats(seqs);
    return ojson{{"trajectories", s.trajectory_count}, {"symbols", s.symbol_count},
                 {"max_length", s.max_length}, {"avg_length", s.avg_length}};
  };
  ojson j = artifact_header(c, Stage::kTrain);
  j["symbol_corpus"] = stats_json(symbol_seqs);
  j["pattern_corpus"] = stats_json(pattern_seqs);
  j["symbol_epoch_loss"] = bundle.model.symbols.epoch_loss;
  j["pattern_epoch_loss"] = bundle.model.patterns ? ojson(bundle.model.patterns->epoch_loss) : ojson(nullptr);
  write_json(p.outputs[1], j);
  return std::to_string(symbols.size()) + " weekly trajectories, " + std::to_string(bundle.model.vocabulary.size()) +
         " patterns, dim " + std::to_string(tc.dim);
}

std::string run_aggregate(const PipelineConfig&, const Plan& p) {
  const auto bundle = load_model(p.inputs[0].path.string());
  const auto weeks = non_empty(load_weekly(p.inputs[1].path));
  std::map<std::string, std::size_t> index;
  const auto& ids = bundle.model.symbols.sequence_ids;
  for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);

  std::map<UserId, std::vector<float>> vectors;
  for (const auto& [user, list] : weeks) {
    std::vector<std::vector<float>> weekly;
    for (const auto& w : list) {
      const auto id = weekly_id(user, w.week_index);
      if (!index.count(id)) throw DataError("aggregate: model has no vector for '" + id + "'; rerun train");
      weekly.push_back(bundle.model.vector(id));
    }
    vectors.emplace(user, aggregate_user(weekly));
  }
  auto out = open_out(p.outputs[0]);
  write_vectors(out, vectors);
  return std::to_string(vectors.size()) + " user vectors";
}

std::string run_reduce(const PipelineConfig& c, const Plan& p) {
  std::map<UserId, std::vector<float>> vectors;
  {
    auto in = open_in(p.inputs[0].path);
    vectors = read_vectors(in);
  }
  const auto points = to_points(vectors);
  ModelBundle bundle = load_model(p.inputs[1].path.string());
  PointMatrix layout;
  if (c.reducer == ReducerKind::kUmap) {
    UmapParams params = c.umap;
    params.threads = c.threads;
    auto [reducer, placed] = UmapReducer::fit(points.points, params);
    bundle.reducer = std::move(reducer);
    layout = std::move(placed);
  } else {
    auto [reducer, placed] = PcaReducer::fit_transform(points.points, 2);
    bundle.reducer = std::move(reducer);
    layout = std::move(placed);
  }
  {
    auto out = open_out(p.outputs[0]);
    write_layout(out, points.users, layout);
  }
  save_model(p.outputs[1].string(), bundle);
  return std::to_string(points.users.size()) + " users placed";
}

std::string run_evaluate(const PipelineConfig& c, const Plan& p) {
  std::vector<UserId> users;
  PointMatrix layout;
  {
    auto in = open_in(p.inputs[0].path);
    std::tie(users, layout) = read_layout(in);
  }
  std::vector<RankTrajectory> ranks;
  {
    auto in = open_in(p.inputs[1].path);
    ranks = read_rank_trajectories(in);
  }
  const WeekCalendar calendar = read_calendar(p.inputs[2].path);

  std::map<UserId, RankDistribution> distributions;
  for (const auto& r : ranks) {
    SymbolSequence all;
    for (const auto& w : split_weeks(r, calendar)) all.insert(all.end(), w.ranks.begin(), w.ranks.end());
    if (!all.empty()) distributions.emplace(r.user_id, rank_distribution(all));
  }
  std::map<UserId, std::vector<double>> embedded;
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (!distributions.count(users[i])) throw DataError("evaluate: no rank trajectory for '" + users[i] + "'");
    const auto row = layout.row(static_cast<Eigen::Index>(i));
    embedded.emplace(users[i], std::vector<double>(row.begin(), row.end()));
  }
  for (auto it = distributions.begin(); it != distributions.end();) {
    it = embedded.count(it->first) ? std::next(it) : distributions.erase(it);
  }
  QualityParams q = c.evaluation;
  q.sample = std::min(q.sample, embedded.size());
  const auto report = embedding_quality(embedded, distributions, q);

  ojson j = report_header(c, Stage::kEvaluate);
  j["users"] = embedded.size();
  j["sampled_users"] = report.sampled.size();
  j["pairs"] = report.pairs.size();
  j["r"] = report.r;
  write_json(p.outputs[0], j);
  auto out = open_out(p.outputs[1]);
  out << "user_a,user_b,embedding_distance,js_distance\n";
  for (const auto& pair : report.pairs) {
    out << pair.a << ',' << pair.b << ',' << shortest(pair.embedding) << ',' << shortest(pair.js) << '\n';
  }
  return "r = " + shortest(report.r) + " over " + std::to_string(report.pairs.size()) + " pairs";
}

std::string run_perturb(const PipelineConfig& c, const Plan& p) {
  const auto bundle = load_model(p.inputs[0].path.string());
  const auto* umap = std::get_if<UmapReducer>(&bundle.reducer);
  if (!umap) throw ConfigError("perturb-experiment needs reduction.method = umap");
  std::vector<UserId> users;
  {
    auto in = open_in(p.inputs[1].path);
    users = read_layout(in).first;
  }
  const auto weeks = non_empty(load_weekly(p.inputs[2].path));
  const auto report = similarity_experiment(bundle.model, *umap, users, weeks, c.perturb);

  ojson j = report_header(c, Stage::kPerturb);
  j["sources"] = report.sources.size();
  j["max_pairwise"] = report.max_pairwise;
  j["baseline"] = summary_json(report.baseline);
  ojson per_k = ojson::array();
  for (const auto& s : report.per_k) per_k.push_back(summary_json(s));
  j["per_k"] = std::move(per_k);
  j["monotone"] = report.monotone;
  j["below_max"] = report.below_max;
  write_json(p.outputs[0], j);

  auto out = open_out(p.outputs[1]);
  out << "k,distance\n";
  for (const auto d : report.baseline.distances) out << "0," << shortest(d) << '\n';
  for (const auto& s : report.per_k) {
    for (const auto d : s.distances) out << s.k << ',' << shortest(d) << '\n';
  }
  std::string medians;
  for (const auto& s : report.per_k) medians += (medians.empty() ? "" : " ") + shortest(s.median);
  return "medians " + medians + (report.monotone ? " (monotone)" : " (not monotone)") + ", max pairwise " +
         shortest(report.max_pairwise);
}

std::string run_infer(const PipelineConfig& c, const Plan& p) {
  const auto bundle = load_model(p.inputs[0].path.string());
  if (std::holds_alternative<std::monostate>(bundle.reducer)) throw DataError("infer: model has no fitted reducer");
  const auto weeks = non_empty(load_weekly(p.inputs[1].path));

  std::vector<UserId> users;
  std::vector<std::vector<float>> vectors;
  std::size_t inferred = 0, skipped = 0;
  for (const auto& [user, list] : weeks) {
    std::vector<std::vector<float>> weekly;
    for (const auto& w : list) {
      try {
        weekly.push_back(infer_sqn2vec(bundle.model, w.ranks, c.infer_epochs, weekly_seed(c.infer_seed, user, w.week_index)));
        ++inferred;
      } catch (const DataError&) {
        ++skipped;
      }
    }
    if (weekly.empty()) continue;
    users.push_back(user);
    vectors.push_back(aggregate_user(weekly));
  }
  if (users.empty()) throw DataError("infer: no weekly trajectory shares a symbol with the model vocabulary");

  const PointMatrix batch = rows_of(vectors, bundle.model.config.dim);
  const PointMatrix placed = std::holds_alternative<UmapReducer>(bundle.reducer)
                                 ? std::get<UmapReducer>(bundle.reducer).transform(batch)
                                 : std::get<PcaReducer>(bundle.reducer).transform(batch);
  {
    auto out = open_out(p.outputs[0]);
    write_layout(out, users, placed);
  }
  {
    std::map<UserId, std::vector<float>> by_user;
    for (std::size_t i = 0; i < users.size(); ++i) by_user.emplace(users[i], vectors[i]);
    auto out = open_out(p.outputs[1]);
    write_vectors(out, by_user);
  }
  ojson j = report_header(c, Stage::kInfer);
  j["users"] = users.size();
  j["weeks_inferred"] = inferred;
  j["weeks_skipped"] = skipped;
  write_json(p.outputs[2], j);
  return std::to_string(users.size()) + " users inferred, " + std::to_string(skipped) + " weeks without known symbols";
}

std::string execute(Stage stage, const PipelineConfig& c, const Plan& p) {
  switch (stage) {
    case Stage::kSynth: return run_synth(c, p);
    case Stage::kIngest: return run_ingest(c, p);
    case Stage::kSummarize: return run_summarize(c, p);
    case Stage::kRank: return run_rank(c, p);
    case Stage::kSplit: return run_split(c, p);
    case Stage::kMine: return run_mine(c, p);
    case Stage::kTrain: return run_train(c, p);
    case Stage::kAggregate: return run_aggregate(c, p);
    case Stage::kReduce: return run_reduce(c, p);
    case Stage::kEvaluate: return run_evaluate(c, p);
    case Stage::kPerturb: return run_perturb(c, p);
    case Stage::kInfer: return run_infer(c, p);
  }
  return {};
}

}  // namespace

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = [] {
    std::vector<Stage> s;
    for (const auto& [stage, _] : kStageNames) s.push_back(stage);
    return s;
  }();
  return stages;
}

std::string_view stage_name(Stage stage) {
  for (const auto& [s, name] : kStageNames) {
    if (s == stage) return name;
  }
  return {};
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (const auto& [s, n] : kStageNames) {
    if (n == name) return s;
  }
  return std::nullopt;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "seed") {
    const auto seed = parse_value<std::uint64_t>(key, value);
    synth.seed = training.seed = umap.seed = evaluation.seed = perturb.seed = infer_seed = seed;
    return;
  }
  const auto* k = find_key(key);
  if (!k) throw ConfigError("config: unknown key '" + std::string(key) + "'");
  k->set(*this, value);
}

std::string PipelineConfig::get(std::string_view key) const {
  const auto* k = find_key(key);
  if (!k) throw ConfigError("config: unknown key '" + std::string(key) + "'");
  return k->get(*this);
}

void PipelineConfig::merge(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  PipelineConfig c;
  c.merge(in);
  return c;
}

std::optional<Interval> PipelineConfig::period() const {
  if (period_start.empty() && period_end.empty()) return std::nullopt;
  if (period_start.empty() || period_end.empty()) {
    throw ConfigError("config: parse.period_start and parse.period_end must be set together");
  }
  const auto start = parse_timestamp(period_start, parse.zone);
  const auto end = parse_timestamp(period_end, parse.zone);
  if (!start || !end) throw ConfigError("config: malformed observation period");
  if (*start >= *end) throw ConfigError("config: observation period must have start < end");
  return Interval{*start, *end};
}

void PipelineConfig::validate() const {
  if (run_dir.empty()) throw ConfigError("config: paths.run_dir must not be empty");
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
  (void)period();
  synth.validate();
  seqscan.validate();
  mining.validate();
  training.validate();
  umap.validate();
  if (evaluation.sample < 2) throw ConfigError("config: evaluation.sample must be >= 2");
  if (perturb.n_sources < 1) throw ConfigError("config: perturb.n_sources must be >= 1");
  if (perturb.k_max < 0) throw ConfigError("config: perturb.k_max must be >= 0");
  if (perturb.infer_epochs < 1) throw ConfigError("config: perturb.infer_epochs must be >= 1");
  if (infer_epochs < 1) throw ConfigError("config: infer.epochs must be >= 1");
}

std::string PipelineConfig::to_text() const {
  std::string out;
  for (const auto& k : registry()) out += k.info.name + " = " + k.get(*this) + "\n";
  return out;
}

std::uint64_t PipelineConfig::hash() const {
  std::string text;
  for (const auto& k : registry()) {
    if (k.info.name != "paths.run_dir") text += k.info.name + " = " + k.get(*this) + "\n";
  }
  return fnv1a(text);
}

std::uint64_t PipelineConfig::stage_hash(Stage stage) const {
  std::string text = std::string(stage_name(stage)) + "\n";
  for (const auto& key : stage_keys(stage)) text += key + " = " + get(key) + "\n";
  return fnv1a(text);
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& k : registry()) out.push_back(k.info);
    return out;
  }();
  return keys;
}

std::vector<std::string> stage_keys(Stage stage) {
  std::vector<std::string> out;
  const auto prefixes = stage_prefixes(stage);
  for (const auto& k : registry()) {
    for (const auto& p : prefixes) {
      const bool match = p.back() == '.' ? k.info.name.starts_with(p) : k.info.name == p;
      if (match) {
        out.push_back(k.info.name);
        break;
      }
    }
  }
  return out;
}

fs::path stage_dir(const PipelineConfig& config, Stage stage) { return fs::path(config.run_dir) / stage_name(stage); }

fs::path manifest_path(const PipelineConfig& config, Stage stage) {
  return fs::path(config.run_dir) / "manifests" / (std::string(stage_name(stage)) + ".json");
}

StageResult run_stage(Stage stage, const PipelineConfig& config, bool force) {
  config.validate();
  const Plan plan = plan_for(stage, config);
  for (const auto& input : plan.inputs) {
    if (fs::exists(input.path)) continue;
    if (input.producer) throw MissingUpstreamError(*input.producer);
    throw DataError("input file '" + input.path.string() + "' not found");
  }
  std::vector<fs::path> inputs;
  for (const auto& input : plan.inputs) inputs.push_back(input.path);

  StageResult result{stage, false, plan.outputs, {}};
  const auto manifest_file = manifest_path(config, stage);
  ojson expected;
  expected["stage"] = stage_name(stage);
  expected["version"] = kToolVersion;
  expected["config_hash"] = hex64(config.stage_hash(stage));
  expected["inputs"] = file_hashes(config, inputs);

  if (!force && fs::exists(manifest_file)) {
    try {
      const ojson stored = read_json(manifest_file);
      bool hit = stored.value("stage", "") == expected["stage"] && stored.value("version", "") == expected["version"] &&
                 stored.value("config_hash", "") == expected["config_hash"] && stored.at("inputs") == expected["inputs"];
      for (const auto& out : plan.outputs) hit = hit && fs::exists(out);
      if (hit && stored.at("outputs") == file_hashes(config, plan.outputs)) {
        result.skipped = true;
        result.summary = stored.value("summary", "");
        return result;
      }
    } catch (const std::exception&) {
      // An unreadable manifest is a miss.
    }
  }

  fs::create_directories(stage_dir(config, stage));
  fs::create_directories(manifest_file.parent_path());
  std::error_code ec;
  fs::remove(manifest_file, ec);
  result.summary = execute(stage, config, plan);
  expected["outputs"] = file_hashes(config, plan.outputs);
  expected["summary"] = result.summary;
  write_json(manifest_file, expected);
  return result;
}

std::vector<StageResult> run_pipeline(const PipelineConfig& config, bool with_perturb, bool force) {
  std::vector<StageResult> results;
  for (const auto stage : all_stages()) {
    if (stage == Stage::kSynth && !config.input.empty()) continue;
    if (stage == Stage::kInfer || (stage == Stage::kPerturb && !with_perturb)) continue;
    results.push_back(run_stage(stage, config, force));
  }
  return results;
}

}  // namespace mob2vec
