#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"
#include "floodwatch/pipeline.hpp"

using namespace floodwatch;
namespace fs = std::filesystem;

namespace {

PipelineConfig small() {
  PipelineConfig c;
  c.scenario.duration_s = 1200;
  c.scenario.total_vehicles = 120;
  c.scenario.attacker_fraction = 0.1;
  c.scenario.attack_count = 2;
  c.scenario.first_attack_s = 300;
  c.head.epochs = 10;
  c.fed.rounds = 3;
  return c;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / "floodwatch_test_pipeline" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("method and mode names") {
  CHECK(method_from("centralized") == Method::centralized);
  CHECK(method_from("federated_smote") == Method::federated_smote);
  CHECK_THROWS_AS(method_from("gossip"), ConfigError);
  CHECK(mnd_mode_from("fl_threshold(3)").th == 3);
  CHECK(mnd_mode_from("fl_threshold", 2).effective_th() == 2);
  CHECK(mnd_mode_from("fl_aggregate").effective_th() == 1);
  CHECK(to_string(mnd_mode_from("fl_threshold", 2)) == "fl_threshold(2)");
  CHECK(mnd_mode_from(to_string(mnd_mode_from("fl_threshold(5)"))) == mnd_mode_from("fl_threshold(5)"));
  CHECK_THROWS_AS(mnd_mode_from("fl_threshold(x"), ConfigError);
  CHECK_THROWS_AS(mnd_mode_from("gossip"), ConfigError);
}

TEST_CASE("config file precedence and validation") {
  const auto dir = scratch("config");
  std::ofstream(dir / "c.json") << R"({"gbdt": {"max_depth": 4}, "mnd": {"list_mode": "stateful"}})";
  auto c = load_config(dir / "c.json");
  CHECK(c.gbdt.max_depth == 4);
  CHECK(c.gbdt.trees_per_client == 10);
  CHECK(c.list_mode == ListMode::stateful);
  std::ofstream(dir / "bad.json") << R"({"gbdtt": {}})";
  CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigError);
  std::ofstream(dir / "typed.json") << R"({"head": {"epochs": "many"}})";
  CHECK_THROWS_AS(load_config(dir / "typed.json"), ConfigError);
  std::ofstream(dir / "broken.json") << "{";
  CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
  nlohmann::json j = small();
  CHECK(j.get<PipelineConfig>().scenario.duration_s == 1200);
}

TEST_CASE("the train/test split is chronological") {
  const auto cfg = small();
  const auto scenario = generate(cfg.scenario);
  const auto split = split_second(*scenario.truth, cfg.train_fraction);
  CHECK(split == 840);
  const auto a = execute(scenario, Method::centralized, MndMode{}, cfg, 1);
  for (const auto& o : a.onset) CHECK(o.test == (o.t >= split));
  // No attacker rows among the onset decisions.
  for (const auto& o : a.onset) CHECK_FALSE(scenario.truth->is_attacker(o.vehicle));
}

TEST_CASE("federated run trains every both-class client") {
  auto cfg = small();
  const auto scenario = generate(cfg.scenario);
  const auto a = execute(scenario, Method::federated, MndMode{}, cfg, 2);
  CHECK(a.clients > 1);
  CHECK(a.fedavg_calls == cfg.fed.rounds - 1);
  CHECK(a.synthetic_rows == 0);
  const auto r = evaluate(a, *scenario.truth, "small", Method::federated, MndMode{}, 2);
  CHECK(r.onset.total() > 0);
  CHECK(r.first_second.windows == 2);
}

TEST_CASE("threshold mode lists a subset of the aggregate mode") {
  auto cfg = small();
  const auto scenario = generate(cfg.scenario);
  const auto a = execute(scenario, Method::centralized, MndMode{MndMode::Kind::fl_aggregate, 1}, cfg, 1);
  const auto t = mnd_rounds(scenario, a.onset, MndMode{MndMode::Kind::fl_threshold, 2}, cfg);
  REQUIRE(t.size() == a.rounds.size());
  CHECK_FALSE(t.empty());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& big = a.rounds[i].list->ids;
    for (auto id : t[i].list->ids) CHECK(big.contains(id));
  }
  const auto local = mnd_rounds(scenario, a.onset, MndMode{MndMode::Kind::local_mad, 1}, cfg);
  for (const auto& r : local) CHECK_FALSE(r.list.has_value());
}

TEST_CASE("cmd_run is byte-reproducible and evaluate agrees") {
  const auto cfg = small();
  const auto dir = scratch("run");
  write_scenario(dir / "scenario", generate(cfg.scenario));
  RunManifest m;
  m.scenario_path = dir / "scenario";
  m.method = Method::federated_smote;
  m.mnd_mode = mnd_mode_from("fl_threshold(2)");
  m.seed = 9;
  m.output_dir = dir / "a";
  const auto first = cmd_run(m, cfg);
  m.output_dir = dir / "b";
  cmd_run(m, cfg);
  for (const char* f : {"report.json", "report.csv", "onset_decisions.csv", "mnd_rounds.jsonl"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  CHECK(first.scenario == "scenario");

  const auto again = cmd_evaluate(dir / "a", {});
  auto stored = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  CHECK(nlohmann::json(again) == stored);
}

TEST_CASE("report table collects and orders runs") {
  const auto cfg = small();
  const auto dir = scratch("report");
  write_scenario(dir / "scenario", generate(cfg.scenario));
  RunManifest m;
  m.scenario_path = dir / "scenario";
  m.method = Method::centralized;
  const char* modes[] = {"local_mad", "fl_threshold(2)", "fl_aggregate"};
  int i = 0;
  for (const char* mode : modes) {
    m.mnd_mode = mnd_mode_from(mode);
    m.output_dir = dir / "runs" / std::to_string(i++);
    cmd_run(m, cfg);
  }
  const auto table = cmd_report(dir / "runs");
  CHECK(table.rows == 3);
  std::istringstream csv(table.csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  REQUIRE(lines.size() == 4);
  CHECK(lines[1].find("fl_aggregate") != std::string::npos);
  CHECK(lines[2].find("fl_threshold(2)") != std::string::npos);
  CHECK(lines[3].find("local_mad") != std::string::npos);
  CHECK(table.text.find("centralized") != std::string::npos);
  CHECK_THROWS_AS(cmd_report(dir / "nope"), EvaluationError);
  fs::create_directories(dir / "empty");
  CHECK_THROWS_AS(cmd_report(dir / "empty"), EvaluationError);
}

TEST_CASE("missing inputs fail cleanly") {
  RunManifest m;
  m.scenario_path = fs::temp_directory_path() / "floodwatch_no_such_scenario";
  m.output_dir = scratch("missing");
  CHECK_THROWS(cmd_run(m, small()));
  Scenario bare;
  CHECK_THROWS_AS(execute(bare, Method::centralized, MndMode{}, small(), 1), EvaluationError);
}
