#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mob2vec/cdr.hpp"
#include "mob2vec/evaluation.hpp"
#include "mob2vec/patterns.hpp"
#include "mob2vec/reduction.hpp"
#include "mob2vec/seqscan.hpp"
#include "mob2vec/synth.hpp"
#include "mob2vec/workflow.hpp"

namespace mob2vec {

enum class Stage {
  kSynth,
  kIngest,
  kSummarize,
  kRank,
  kSplit,
  kMine,
  kTrain,
  kAggregate,
  kReduce,
  kEvaluate,
  kPerturb,
  kInfer,
};

/// Every stage in pipeline order.
const std::vector<Stage>& all_stages();
std::string_view stage_name(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);

enum class ReducerKind { kUmap, kPca };

/// Every parameter of a run. Read from flat `key = value` text; `#` starts a
/// comment. The key `seed` sets every module seed at once.
struct PipelineConfig {
  std::string run_dir = "run";
  /// CDR file to ingest; empty ingests the synth stage output.
  std::string input;
  /// Weekly corpus to infer; empty infers the split stage output.
  std::string infer_input;
  int threads = 1;

  ParseOptions parse;
  std::string period_start;
  std::string period_end;

  SynthConfig synth;
  bool summarize = true;
  SeqScanParams seqscan;
  SymbolMode symbols = SymbolMode::kRank;
  MiningParams mining;
  TrainingConfig training;
  ReducerKind reducer = ReducerKind::kUmap;
  UmapParams umap;
  QualityParams evaluation;
  SimilarityParams perturb;
  int infer_epochs = 50;
  std::uint64_t infer_seed = 1;

  /// Throws ConfigError on an unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  /// Applies every `key = value` line; throws ConfigError naming the line.
  void merge(std::istream& in);
  static PipelineConfig from_file(const std::string& path);

  /// Module validation plus cross-field checks; throws ConfigError.
  void validate() const;

  /// Observation period from period_start/period_end, when both are set.
  std::optional<Interval> period() const;

  /// Canonical `key = value` lines of every key, in registry order.
  std::string to_text() const;
  /// Hash of every key except paths.run_dir.
  std::uint64_t hash() const;
  /// Hash of the keys that affect one stage's outputs.
  std::uint64_t stage_hash(Stage stage) const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

/// Registry order.
const std::vector<ConfigKey>& config_keys();

/// Keys that affect the outputs of `stage`.
std::vector<std::string> stage_keys(Stage stage);

/// An upstream stage has not produced its artifacts yet.
class MissingUpstreamError : public std::runtime_error {
 public:
  explicit MissingUpstreamError(Stage needed)
      : std::runtime_error("run " + std::string(stage_name(needed)) + " first"), needed_(needed) {}
  Stage needed() const noexcept { return needed_; }

 private:
  Stage needed_;
};

struct StageResult {
  Stage stage;
  /// Manifest hit: inputs, stage config and outputs were unchanged.
  bool skipped = false;
  std::vector<std::filesystem::path> outputs;
  /// One-line outcome (e.g. the evaluation r).
  std::string summary;
};

std::filesystem::path stage_dir(const PipelineConfig& config, Stage stage);
std::filesystem::path manifest_path(const PipelineConfig& config, Stage stage);

/// Runs one stage against the run directory and writes its manifest. Skips
/// the work when the manifest matches unless `force`. Throws
/// MissingUpstreamError when an input artifact is absent.
StageResult run_stage(Stage stage, const PipelineConfig& config, bool force = false);

/// Stages from synth (only without an input file) through evaluate, plus the
/// perturbation experiment when asked.
std::vector<StageResult> run_pipeline(const PipelineConfig& config, bool with_perturb = false, bool force = false);

/// `0x`-free 16-digit lowercase hex.
std::string hex64(std::uint64_t value);

}  // namespace mob2vec
