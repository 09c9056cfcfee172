#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "floodwatch/balance.hpp"
#include "floodwatch/fed_mnd.hpp"
#include "floodwatch/fed_onset.hpp"
#include "floodwatch/gbdt.hpp"
#include "floodwatch/head.hpp"
#include "floodwatch/metrics.hpp"
#include "floodwatch/mnd.hpp"
#include "floodwatch/preprocess.hpp"
#include "floodwatch/scenario.hpp"

namespace floodwatch {

enum class Method { centralized, federated, federated_smote };

std::string_view to_string(Method m);
Method method_from(std::string_view name);

struct MndMode {
  enum class Kind { local_mad, fl_aggregate, fl_threshold } kind = Kind::fl_aggregate;
  std::uint32_t th = 2;  // only read for fl_threshold

  /// Frequency threshold handed to the server; local_mad has none.
  std::uint32_t effective_th() const { return kind == Kind::fl_threshold ? th : 1; }
  friend bool operator==(const MndMode&, const MndMode&) = default;
};

/// "local_mad", "fl_aggregate", "fl_threshold" or "fl_threshold(3)".
std::string to_string(const MndMode& mode);
MndMode mnd_mode_from(std::string_view name, std::optional<std::uint32_t> th = std::nullopt);

/// Everything tunable in a run. Loaded from the JSON config file.
struct PipelineConfig {
  ScenarioConfig scenario;
  WindowOptions window;
  GbdtConfig gbdt;
  HeadConfig head;
  FedConfig fed;
  BalanceConfig balance;
  MadParams mad;
  IntervalConfig intervals;
  ListMode list_mode = ListMode::stateless;
  double timer_duration_s = 120;
  double train_fraction = 0.7;

  void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
/// Sections and keys absent from the file keep their defaults.
void from_json(const nlohmann::json& j, PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);

struct RunManifest {
  std::filesystem::path scenario_path;  // directory with events.csv (+ truth.json) or a CSV file
  Method method = Method::federated_smote;
  MndMode mnd_mode;
  std::filesystem::path output_dir;
  std::uint64_t seed = 1;
  std::string scenario_name;  // defaults to the scenario directory name
};

/// events.csv and truth.json under `dir`.
void write_scenario(const std::filesystem::path& dir, const Scenario& scenario);
/// Accepts a directory or a CSV path; truth.json beside the log wins over
/// annotation columns.
Scenario load_scenario(const std::filesystem::path& path);

/// Per-vehicle feature rows for every vehicle with ground-truth presence.
std::map<VehicleId, std::vector<FeatureRow>> build_features(const Scenario& scenario,
                                                             const WindowOptions& options);

/// First second of the held-out split.
std::int64_t split_second(const GroundTruth& truth, double train_fraction);

struct OnsetRecord {
  VehicleId vehicle{};
  std::int64_t t = 0;
  bool label = false;
  bool attack = false;
  bool test = false;
};

struct MndRoundRecord {
  TimeWindow interval;
  std::vector<SuspicionReport> reports;
  std::optional<MaliciousList> list;  // absent for local_mad
};

struct RunArtifacts {
  std::vector<OnsetRecord> onset;
  std::vector<MndRoundRecord> rounds;
  std::size_t clients = 0;
  std::size_t synthetic_rows = 0;
  std::uint32_t fedavg_calls = 0;
  Timing timing;
};

/// Everything but I/O: onset training and inference, then malicious-node
/// rounds for the given mode.
RunArtifacts execute(const Scenario& scenario, Method method, const MndMode& mode,
                     const PipelineConfig& config, std::uint64_t seed);

/// Alert-mode detection rounds driven by confirmed onsets; lists are
/// aggregated by the server unless the mode is local_mad.
std::vector<MndRoundRecord> mnd_rounds(const Scenario& scenario,
                                       const std::vector<OnsetRecord>& onset, const MndMode& mode,
                                       const PipelineConfig& config);

/// Score artifacts against the ground truth.
EvalReport evaluate(const RunArtifacts& artifacts, const GroundTruth& truth,
                    const std::string& scenario, Method method, const MndMode& mode,
                    std::uint64_t seed);

/// Runs a manifest and writes report.json, report.csv, timing.json,
/// onset_decisions.csv and mnd_rounds.jsonl to the output directory.
EvalReport cmd_run(const RunManifest& manifest, const PipelineConfig& config);

/// Recomputes the report from the decision files of a previous run.
EvalReport cmd_evaluate(const std::filesystem::path& run_dir,
                        const std::filesystem::path& scenario_path);

struct ReportTable {
  std::string csv;
  std::string text;
  std::size_t rows = 0;
};

/// Collects every report.json below `dir`, ordered by (scenario, method, mnd_mode, seed).
ReportTable cmd_report(const std::filesystem::path& dir);

void write_onset_decisions(const std::filesystem::path& path,
                           const std::vector<OnsetRecord>& records);
std::vector<OnsetRecord> read_onset_decisions(const std::filesystem::path& path);
void write_mnd_rounds(const std::filesystem::path& path, const std::vector<MndRoundRecord>& rounds);
std::vector<MndRoundRecord> read_mnd_rounds(const std::filesystem::path& path);

}  // namespace floodwatch
