#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mob2vec/errors.hpp"
#include "mob2vec/pipeline.hpp"
#include "mob2vec/version.hpp"

namespace {

using namespace mob2vec;

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kMissingUpstream = 3, kData = 4 };

/// Options shared by every subcommand.
struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string run_dir;
  std::string input;
  std::string infer_input;
  int threads = 0;
  bool force = false;
  /// Flag values by config key, filled only when given.
  std::map<std::string, std::string> flags;
};

std::string flag_name(const std::string& key) {
  std::string out = "--";
  for (const char ch : key) out += (ch == '.' || ch == '_') ? '-' : ch;
  return out;
}

bool has_common_flag(const std::string& key) {
  return key == "threads" || key == "paths.run_dir" || key == "paths.input" || key == "paths.infer_input";
}

void add_common(CLI::App& cmd, Common& common, const std::vector<std::string>& keys) {
  cmd.add_option("-c,--config", common.config_file, "flat key = value config file");
  cmd.add_option("--set", common.overrides, "override a config key (key=value), repeatable");
  cmd.add_option("--run-dir", common.run_dir, "run directory (paths.run_dir)");
  cmd.add_option("--input", common.input, "CDR file to ingest (paths.input)");
  cmd.add_option("--infer-input", common.infer_input, "weekly corpus to infer (paths.infer_input)");
  cmd.add_option("--threads", common.threads, "worker threads; 1 is deterministic")->check(CLI::PositiveNumber);
  cmd.add_flag("--force", common.force, "rerun even when the manifest matches");
  for (const auto& key : keys) {
    if (has_common_flag(key)) continue;
    std::string help;
    for (const auto& k : config_keys()) {
      if (k.name == key) help = k.help;
    }
    cmd.add_option_function<std::string>(
        flag_name(key), [&common, key](const std::string& v) { common.flags[key] = v; }, help + " (" + key + ")");
  }
}

PipelineConfig resolve(const Common& common) {
  PipelineConfig config;
  if (!common.config_file.empty()) config = PipelineConfig::from_file(common.config_file);
  for (const auto& o : common.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
    config.set(o.substr(0, eq), o.substr(eq + 1));
  }
  if (!common.run_dir.empty()) config.run_dir = common.run_dir;
  if (!common.input.empty()) config.input = common.input;
  if (!common.infer_input.empty()) config.infer_input = common.infer_input;
  if (common.threads > 0) config.threads = common.threads;
  for (const auto& [key, value] : common.flags) config.set(key, value);
  config.validate();
  return config;
}

void print(const StageResult& r, double seconds) {
  std::printf("%-18s %s%s (%.1f s)\n", std::string(stage_name(r.stage)).c_str(), r.skipped ? "skipped, manifest hit: " : "",
              r.summary.c_str(), seconds);
  std::fflush(stdout);
}

int run(int argc, char** argv) {
  CLI::App app{"Behavioural embeddings of symbolic CDR trajectories"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Common common;
  std::vector<std::pair<CLI::App*, Stage>> stage_commands;
  const std::map<Stage, std::string> descriptions = {
      {Stage::kSynth, "generate a synthetic CDR corpus with archetype labels"},
      {Stage::kIngest, "parse CDR records into per-user trajectories"},
      {Stage::kSummarize, "segment trajectories into relevant locations"},
      {Stage::kRank, "replace locations by per-user frequency ranks"},
      {Stage::kSplit, "split rank trajectories into calendar weeks"},
      {Stage::kMine, "mine gap-constrained sequential patterns"},
      {Stage::kTrain, "train weekly embeddings over symbols and patterns"},
      {Stage::kAggregate, "average weekly embeddings per user"},
      {Stage::kReduce, "fit the 2D reducer and export the layout"},
      {Stage::kEvaluate, "correlate layout distances with rank-distribution distances"},
      {Stage::kPerturb, "measure how far perturbed trajectories move"},
      {Stage::kInfer, "embed weekly trajectories with the trained model"},
  };
  for (const auto stage : all_stages()) {
    auto* cmd = app.add_subcommand(std::string(stage_name(stage)), descriptions.at(stage));
    add_common(*cmd, common, stage_keys(stage));
    stage_commands.emplace_back(cmd, stage);
  }

  bool with_perturb = false;
  auto* all = app.add_subcommand("all", "run every stage up to evaluate");
  std::vector<std::string> every_key;
  for (const auto& k : config_keys()) every_key.push_back(k.name);
  add_common(*all, common, every_key);
  all->add_flag("--perturb", with_perturb, "also run the perturbation experiment");

  auto* show = app.add_subcommand("config", "print the resolved configuration");
  add_common(*show, common, {});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  const PipelineConfig config = resolve(common);
  if (show->parsed()) {
    std::cout << config.to_text();
    return kOk;
  }
  if (all->parsed()) {
    for (const auto stage : all_stages()) {
      if (stage == Stage::kSynth && !config.input.empty()) continue;
      if (stage == Stage::kInfer || (stage == Stage::kPerturb && !with_perturb)) continue;
      const auto t0 = std::chrono::steady_clock::now();
      const auto r = run_stage(stage, config, common.force);
      print(r, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return kOk;
  }
  for (const auto& [cmd, stage] : stage_commands) {
    if (!cmd->parsed()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_stage(stage, config, common.force);
    print(r, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const MissingUpstreamError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMissingUpstream;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
