// Command-line front end: generate scenarios, run the detection pipeline,
// re-evaluate runs and tabulate reports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"
#include "floodwatch/log.hpp"
#include "floodwatch/pipeline.hpp"

namespace fs = std::filesystem;
using namespace floodwatch;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

PipelineConfig config_from(const Common& c) {
  return c.config.empty() ? PipelineConfig{} : load_config(c.config);
}

int generate(const Common& c) {
  auto cfg = config_from(c);
  if (c.seed) cfg.scenario.rng_seed = *c.seed;
  cfg.scenario.validate();
  const fs::path dir = c.out.empty() ? "scenario" : c.out;
  const auto scenario = generate(cfg.scenario);
  write_scenario(dir, scenario);
  std::cout << "wrote " << scenario.events.size() << " events to " << (dir / "events.csv").string()
            << '\n';
  return 0;
}

int preprocess(const Common& c, const std::string& scenario_path) {
  const auto cfg = config_from(c);
  const auto scenario = load_scenario(scenario_path);
  const auto features = build_features(scenario, cfg.window);
  const fs::path dir = c.out.empty() ? "features" : c.out;
  fs::create_directories(dir);
  for (const auto& [v, rows] : features)
    write_feature_csv(dir / (to_string(v) + ".csv"), rows);
  std::cout << "wrote " << features.size() << " feature files to " << dir.string() << '\n';
  return 0;
}

int run(const Common& c, const std::string& scenario_path, const std::string& method,
        const std::string& mnd_mode, std::optional<std::uint32_t> th) {
  auto cfg = config_from(c);
  if (c.seed) cfg.scenario.rng_seed = *c.seed;
  RunManifest m;
  m.method = method_from(method);
  m.mnd_mode = mnd_mode_from(mnd_mode, th);
  m.seed = c.seed.value_or(1);
  m.output_dir = c.out.empty() ? "run" : c.out;
  if (scenario_path.empty()) {
    // No scenario given: synthesise one from the config into the output directory.
    m.scenario_path = m.output_dir / "scenario";
    write_scenario(m.scenario_path, generate(cfg.scenario));
  } else {
    m.scenario_path = scenario_path;
  }
  const auto report = cmd_run(m, cfg);
  std::cout << csv_header() << '\n' << csv_row(report) << '\n';
  return 0;
}

int evaluate(const Common& c, const std::string& run_dir, const std::string& scenario_path) {
  const auto report = cmd_evaluate(run_dir, scenario_path);
  const std::string dump = nlohmann::json(report).dump(2) + "\n";
  if (c.out.empty()) {
    std::cout << dump;
  } else {
    std::ofstream(c.out) << dump;
  }
  return 0;
}

int report(const Common& c, const std::string& dir) {
  const auto table = cmd_report(dir);
  if (!c.out.empty()) {
    std::ofstream(c.out) << table.csv;
  }
  std::cout << table.text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VANET flooding detection: onset detection and malicious-node lists"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "RNG seed");
    sub->add_option("--out", common.out, "output path");
  };

  auto* gen = app.add_subcommand("generate", "write a synthetic event log and ground truth");
  add_common(gen);

  std::string scenario_path;
  auto* pre = app.add_subcommand("preprocess", "write per-vehicle feature rows");
  add_common(pre);
  pre->add_option("--scenario", scenario_path, "scenario directory or event log")->required();

  std::string method = "federated_smote";
  std::string mnd_mode = "fl_aggregate";
  std::optional<std::uint32_t> th;
  auto* runc = app.add_subcommand("run", "train, detect and score one configuration");
  add_common(runc);
  runc->add_option("--scenario", scenario_path, "scenario directory or event log");
  runc->add_option("--method", method, "centralized | federated | federated_smote");
  runc->add_option("--mnd-mode", mnd_mode, "local_mad | fl_aggregate | fl_threshold");
  runc->add_option("--th", th, "reporter threshold for fl_threshold");

  std::string run_dir;
  auto* eval = app.add_subcommand("evaluate", "recompute a report from a run directory");
  add_common(eval);
  eval->add_option("run_dir", run_dir, "output directory of a previous run")->required();
  eval->add_option("--scenario", scenario_path, "override the scenario recorded in the run");

  std::string report_dir;
  auto* rep = app.add_subcommand("report", "tabulate every report under a directory");
  add_common(rep);
  rep->add_option("dir", report_dir, "directory to scan")->required();

  CLI11_PARSE(app, argc, argv);
  logger();

  try {
    if (*gen) return generate(common);
    if (*pre) return preprocess(common, scenario_path);
    if (*runc) return run(common, scenario_path, method, mnd_mode, th);
    if (*eval) return evaluate(common, run_dir, scenario_path);
    if (*rep) return report(common, report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
