#include "floodwatch/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"
#include "floodwatch/log.hpp"
#include "floodwatch/protocol.hpp"
#include "floodwatch/rng.hpp"

namespace floodwatch {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

/// Seconds of overlap between two half-open windows.
double overlap(const TimeWindow& a, const TimeWindow& b) {
  return std::max(0.0, std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s));
}

}  // namespace

// --- enums -----------------------------------------------------------------------

std::string_view to_string(Method m) {
  switch (m) {
    case Method::centralized: return "centralized";
    case Method::federated: return "federated";
    case Method::federated_smote: return "federated_smote";
  }
  return "?";
}

Method method_from(std::string_view name) {
  if (name == "centralized" || name == "ct") return Method::centralized;
  if (name == "federated" || name == "fl") return Method::federated;
  if (name == "federated_smote" || name == "fls") return Method::federated_smote;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string to_string(const MndMode& mode) {
  switch (mode.kind) {
    case MndMode::Kind::local_mad: return "local_mad";
    case MndMode::Kind::fl_aggregate: return "fl_aggregate";
    case MndMode::Kind::fl_threshold: return "fl_threshold(" + std::to_string(mode.th) + ")";
  }
  return "?";
}

MndMode mnd_mode_from(std::string_view name, std::optional<std::uint32_t> th) {
  MndMode mode;
  if (name == "local_mad") {
    mode.kind = MndMode::Kind::local_mad;
  } else if (name == "fl_aggregate") {
    mode.kind = MndMode::Kind::fl_aggregate;
  } else if (name.starts_with("fl_threshold")) {
    mode.kind = MndMode::Kind::fl_threshold;
    auto rest = name.substr(std::string_view("fl_threshold").size());
    if (!rest.empty()) {
      if (rest.size() < 3 || rest.front() != '(' || rest.back() != ')')
        throw ConfigError("malformed mnd mode '" + std::string(name) + "'");
      mode.th = static_cast<std::uint32_t>(std::stoul(std::string(rest.substr(1, rest.size() - 2))));
    }
  } else {
    throw ConfigError("unknown mnd mode '" + std::string(name) + "'");
  }
  if (th) mode.th = *th;
  if (mode.th < 1) throw ConfigError("mnd mode: TH must be >= 1");
  return mode;
}

// --- configuration ---------------------------------------------------------------------

void PipelineConfig::validate() const {
  scenario.validate();
  if (window.lags < 1) throw ConfigError("window: lags must be >= 1");
  gbdt.validate();
  head.validate();
  fed.validate();
  balance.validate();
  mad.validate();
  if (!(intervals.normal_s > 0) || !(intervals.alert_s > 0))
    throw ConfigError("intervals: lengths must be > 0");
  if (!(timer_duration_s >= 0)) throw ConfigError("mnd: timer_duration_s must be >= 0");
  if (!(train_fraction > 0 && train_fraction < 1))
    throw ConfigError("split: train_fraction must be in (0,1)");
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{
      {"scenario", c.scenario},
      {"window", {{"lags", c.window.lags}, {"require_attack_traffic", c.window.require_attack_traffic}}},
      {"gbdt", c.gbdt},
      {"head", c.head},
      {"fed", c.fed},
      {"balance", c.balance},
      {"mad", c.mad},
      {"intervals", {{"normal_s", c.intervals.normal_s}, {"alert_s", c.intervals.alert_s}}},
      {"mnd", {{"list_mode", to_string(c.list_mode)}, {"timer_duration_s", c.timer_duration_s}}},
      {"split", {{"train_fraction", c.train_fraction}}}};
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> sections{"scenario", "window",    "gbdt", "head",
                                              "fed",      "balance",   "mad",  "intervals",
                                              "mnd",      "split"};
  for (const auto& [k, v] : j.items())
    if (!sections.contains(k)) throw ConfigError("unknown config section '" + k + "'");
  try {
    if (j.contains("scenario")) j["scenario"].get_to(c.scenario);
    if (j.contains("window")) {
      const auto& w = j["window"];
      c.window.lags = w.value("lags", c.window.lags);
      c.window.require_attack_traffic =
          w.value("require_attack_traffic", c.window.require_attack_traffic);
    }
    if (j.contains("gbdt")) j["gbdt"].get_to(c.gbdt);
    if (j.contains("head")) j["head"].get_to(c.head);
    if (j.contains("fed")) j["fed"].get_to(c.fed);
    if (j.contains("balance")) j["balance"].get_to(c.balance);
    if (j.contains("mad")) j["mad"].get_to(c.mad);
    if (j.contains("intervals")) {
      const auto& w = j["intervals"];
      c.intervals.normal_s = w.value("normal_s", c.intervals.normal_s);
      c.intervals.alert_s = w.value("alert_s", c.intervals.alert_s);
    }
    if (j.contains("mnd")) {
      const auto& m = j["mnd"];
      if (m.contains("list_mode")) c.list_mode = list_mode_from(m["list_mode"].get<std::string>());
      c.timer_duration_s = m.value("timer_duration_s", c.timer_duration_s);
    }
    if (j.contains("split")) c.train_fraction = j["split"].value("train_fraction", c.train_fraction);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
}

PipelineConfig load_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return j.get<PipelineConfig>();
}

// --- scenario files ---------------------------------------------------------------------

void write_scenario(const fs::path& dir, const Scenario& scenario) {
  fs::create_directories(dir);
  write_event_log(dir / "events.csv", scenario.events,
                  scenario.truth ? &*scenario.truth : nullptr);
  if (scenario.truth) write_ground_truth(dir / "truth.json", *scenario.truth);
}

Scenario load_scenario(const fs::path& path) {
  const bool is_dir = fs::is_directory(path);
  const fs::path log = is_dir ? path / "events.csv" : path;
  if (!fs::exists(log)) throw std::runtime_error("missing event log " + log.string());
  Scenario s = ingest(log);
  const fs::path truth = (is_dir ? path : path.parent_path()) / "truth.json";
  if (fs::exists(truth)) s.truth = read_ground_truth(truth);
  return s;
}

std::map<VehicleId, std::vector<FeatureRow>> build_features(const Scenario& scenario,
                                                             const WindowOptions& options) {
  if (!scenario.truth) throw EvaluationError("feature labels need ground truth");
  const auto& truth = *scenario.truth;
  const auto inbound = partition_by_receiver(scenario.events);
  std::map<VehicleId, std::vector<FeatureRow>> out;
  for (const auto& [v, presence] : truth.presence) {
    static const std::vector<PacketEvent> none;
    auto it = inbound.find(v);
    const auto& events = it == inbound.end() ? none : it->second;
    const auto series = build_count_series(events, v);
    if (options.require_attack_traffic) {
      std::vector<PacketEvent> hostile;
      for (const auto& ev : events)
        if (truth.is_attacker(ev.sender)) hostile.push_back(ev);
      const auto attack_series = build_count_series(hostile, v);
      out[v] = windowize(series, presence, truth.attack_windows, options, &attack_series);
    } else {
      out[v] = windowize(series, presence, truth.attack_windows, options);
    }
  }
  return out;
}

std::int64_t split_second(const GroundTruth& truth, double train_fraction) {
  double end = 0;
  for (const auto& [v, p] : truth.presence) end = std::max(end, p.end_s);
  for (const auto& w : truth.attack_windows) end = std::max(end, w.end_s);
  return static_cast<std::int64_t>(std::floor(train_fraction * std::ceil(end)));
}

// --- execution ------------------------------------------------------------------------------

namespace {

struct Detector {
  // Exactly one of the two is set.
  std::optional<LocalEnsemble> central;
  std::shared_ptr<const GlobalModel> federated;
};

std::vector<OnsetRecord> infer(const Detector& detector,
                               const std::map<VehicleId, std::vector<FeatureRow>>& features,
                               const GroundTruth& truth, std::int64_t split) {
  std::vector<OnsetRecord> out;
  std::optional<OnsetScorer> scorer;
  if (detector.federated) scorer.emplace(*detector.federated);
  for (const auto& [v, rows] : features) {
    if (truth.is_attacker(v)) continue;
    for (const auto& row : rows) {
      const bool attack = scorer ? scorer->detect(row.features) == Detection::attack
                                 : predict_margin(*detector.central, row.features) > 0;
      out.push_back(OnsetRecord{v, row.t, row.positive(), attack, row.t >= split});
    }
  }
  return out;
}

/// Seconds at which at least Q distinct vehicles flagged within the confirmation window.
std::set<std::int64_t> confirmed_seconds(const std::vector<OnsetRecord>& onset,
                                         const FedConfig& fed) {
  std::map<std::int64_t, std::vector<OnsetReport>> by_second;
  for (const auto& r : onset)
    if (r.attack)
      by_second[r.t].push_back(OnsetReport{client_of(r.vehicle), static_cast<double>(r.t)});
  std::set<std::int64_t> out;
  for (const auto& [t, reports] : by_second) {
    std::vector<OnsetReport> recent;
    for (auto it = by_second.lower_bound(t - static_cast<std::int64_t>(
                                                 std::ceil(fed.confirmation_window_s)) + 1);
         it != by_second.end() && it->first <= t; ++it)
      if (static_cast<double>(t - it->first) < fed.confirmation_window_s)
        recent.insert(recent.end(), it->second.begin(), it->second.end());
    if (confirm_onset(recent, fed.onset_quorum, fed.confirmation_window_s)) out.insert(t);
  }
  return out;
}

}  // namespace

std::vector<MndRoundRecord> mnd_rounds(const Scenario& scenario,
                                       const std::vector<OnsetRecord>& onset, const MndMode& mode,
                                       const PipelineConfig& config) {
  const auto confirmed = confirmed_seconds(onset, config.fed);
  std::map<std::int64_t, std::set<VehicleId>> flaggers;
  for (const auto& r : onset)
    if (r.attack) flaggers[r.t].insert(r.vehicle);
  const auto inbound = partition_by_receiver(scenario.events);
  const double step = config.intervals.alert_s;

  std::optional<MndServer> server;
  if (mode.kind != MndMode::Kind::local_mad)
    server.emplace(AggregationState{config.list_mode, mode.effective_th(), config.timer_duration_s,
                                    {}, {}, {}});
  Channel uplink;

  std::vector<MndRoundRecord> rounds;
  double episode_end = -1;
  for (const auto t0 : confirmed) {
    if (static_cast<double>(t0) < episode_end) continue;
    for (std::int64_t k = 0;; ++k) {
      const TimeWindow interval{static_cast<double>(t0) + step * static_cast<double>(k),
                                static_cast<double>(t0) + step * static_cast<double>(k + 1)};
      std::set<VehicleId> reporters;
      for (auto it = flaggers.lower_bound(static_cast<std::int64_t>(std::ceil(interval.start_s)));
           it != flaggers.end() && static_cast<double>(it->first) < interval.end_s; ++it)
        reporters.insert(it->second.begin(), it->second.end());
      MndRoundRecord record{interval, {}, std::nullopt};
      for (auto v : reporters) {
        static const std::vector<PacketEvent> none;
        auto it = inbound.find(v);
        auto report = detect(counts_in(it == inbound.end() ? none : it->second, v, interval),
                             config.mad);
        if (server)
          uplink.push(Message{MessageType::suspicion_report, raw(v), 0, 0, report}.serialize());
        record.reports.push_back(std::move(report));
      }
      if (server) {
        for (const auto& line : uplink.drain()) server->submit(Message::parse(line));
        record.list = server->tick(interval.end_s);
      }
      rounds.push_back(std::move(record));
      episode_end = interval.end_s;
      const bool again = std::any_of(
          confirmed.lower_bound(static_cast<std::int64_t>(std::ceil(interval.start_s))),
          confirmed.end(), [&](std::int64_t t) { return static_cast<double>(t) < interval.end_s; });
      if (!again) break;
    }
  }
  return rounds;
}

RunArtifacts execute(const Scenario& scenario, Method method, const MndMode& mode,
                     const PipelineConfig& config, std::uint64_t seed) {
  config.validate();
  if (!scenario.truth) throw EvaluationError("scenario has no ground truth");
  const auto& truth = *scenario.truth;
  RunArtifacts out;

  auto started = Clock::now();
  const auto features = build_features(scenario, config.window);
  const auto split = split_second(truth, config.train_fraction);
  out.timing.preprocess_s = since(started);

  started = Clock::now();
  Detector detector;
  if (method == Method::centralized) {
    std::vector<FeatureRow> pooled;
    for (const auto& [v, rows] : features) {
      if (truth.is_attacker(v)) continue;
      for (const auto& row : rows)
        if (row.t < split) pooled.push_back(row);
    }
    if (pooled.empty()) throw EvaluationError("no training rows before the split");
    detector.central = train(pooled, config.gbdt, ClientId{0});
  } else {
    ClientTraining training{config.gbdt, config.head, std::nullopt, seed};
    training.head.rng_seed = mix_seed(seed, config.head.rng_seed);
    if (method == Method::federated_smote) training.balance = config.balance;
    std::vector<OnsetClient> clients;
    for (const auto& [v, rows] : features) {
      if (truth.is_attacker(v)) continue;
      std::vector<FeatureRow> local;
      for (const auto& row : rows)
        if (row.t < split) local.push_back(row);
      const bool both = std::ranges::any_of(local, &FeatureRow::positive) &&
                        !std::ranges::all_of(local, &FeatureRow::positive);
      if (both) clients.emplace_back(client_of(v), std::move(local), training);
    }
    if (clients.empty()) throw EvaluationError("no vehicle observed both classes before the split");
    HeadConfig head = training.head;
    OnsetServer server(config.fed, head);
    auto outcome = run_training(clients, server);
    detector.federated = outcome.model;
    out.clients = clients.size();
    out.fedavg_calls = outcome.fedavg_calls;
    for (const auto& c : clients) out.synthetic_rows += c.synthetic_count();
  }
  out.timing.onset_train_s = since(started);
  logger()->info("{}: trained in {:.2f}s ({} clients)", to_string(method),
                 out.timing.onset_train_s, out.clients);

  out.onset = infer(detector, features, truth, split);

  started = Clock::now();
  out.rounds = mnd_rounds(scenario, out.onset, mode, config);
  out.timing.mnd_s = since(started);
  return out;
}

// --- evaluation --------------------------------------------------------------------------

EvalReport evaluate(const RunArtifacts& artifacts, const GroundTruth& truth,
                    const std::string& scenario, Method method, const MndMode& mode,
                    std::uint64_t seed) {
  EvalReport r;
  r.scenario = scenario;
  r.method = std::string(to_string(method));
  r.mnd_mode = to_string(mode);
  r.seed = seed;

  std::vector<OnsetDecision> decisions;
  decisions.reserve(artifacts.onset.size());
  for (const auto& o : artifacts.onset) {
    decisions.push_back(OnsetDecision{o.vehicle, o.t, o.attack});
    if (!o.test) continue;
    if (o.label && o.attack) ++r.onset.tp;
    if (o.label && !o.attack) ++r.onset.fn;
    if (!o.label && o.attack) ++r.onset.fp;
    if (!o.label && !o.attack) ++r.onset.tn;
  }
  r.onset_scores = score(r.onset);
  r.first_second = first_second(decisions, truth);

  std::map<VehicleId, Confusion> per_vehicle;
  for (const auto& round : artifacts.rounds) {
    std::set<VehicleId> benign, active;
    for (const auto& [v, presence] : truth.presence) {
      if (overlap(presence, round.interval) < 1.0) continue;
      if (!truth.is_attacker(v)) {
        benign.insert(v);
        continue;
      }
      for (const auto& w : truth.attack_windows) {
        const TimeWindow both{std::max(w.start_s, round.interval.start_s),
                              std::min(w.end_s, round.interval.end_s)};
        if (overlap(presence, both) >= 1.0) active.insert(v);
      }
    }
    std::map<VehicleId, const SuspicionReport*> by_reporter;
    for (const auto& rep : round.reports) by_reporter[rep.reporter] = &rep;
    for (auto v : benign) {
      std::set<VehicleId> listed;
      if (round.list) {
        listed = round.list->ids;
      } else if (auto it = by_reporter.find(v); it != by_reporter.end()) {
        listed = it->second->suspected;
      }
      listed.erase(v);
      std::set<VehicleId> present = active;
      for (auto b : benign)
        if (b != v) present.insert(b);
      const auto c = mnd_confusion(listed, truth.attackers, present);
      per_vehicle[v] += c;
      r.mnd_pooled += c;
    }
  }
  std::vector<Scores> node_scores;
  for (const auto& [v, c] : per_vehicle) node_scores.push_back(score(c));
  r.mnd_pooled_scores = score(r.mnd_pooled);
  r.mnd_per_node = macro_average(node_scores);
  r.mnd_rounds = artifacts.rounds.size();
  return r;
}

// --- decision files -------------------------------------------------------------------

void write_onset_decisions(const fs::path& path, const std::vector<OnsetRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "vehicle,t,label,attack,split\n";
  for (const auto& r : records)
    out << raw(r.vehicle) << ',' << r.t << ',' << int(r.label) << ',' << int(r.attack) << ','
        << (r.test ? "test" : "train") << '\n';
}

std::vector<OnsetRecord> read_onset_decisions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::size_t n = 0;
  std::vector<OnsetRecord> out;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1) {
      if (line != "vehicle,t,label,attack,split") throw ParseError("bad decisions header", n);
      continue;
    }
    if (line.empty()) continue;
    std::istringstream s(line);
    std::string v, t, label, attack, split;
    if (!std::getline(s, v, ',') || !std::getline(s, t, ',') || !std::getline(s, label, ',') ||
        !std::getline(s, attack, ',') || !std::getline(s, split))
      throw ParseError("expected 5 fields", n);
    try {
      out.push_back(OnsetRecord{VehicleId{static_cast<std::uint32_t>(std::stoul(v))},
                                std::stoll(t), label == "1", attack == "1", split == "test"});
    } catch (const std::logic_error&) {
      throw ParseError("bad number", n);
    }
  }
  return out;
}

void write_mnd_rounds(const fs::path& path, const std::vector<MndRoundRecord>& rounds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : rounds) {
    nlohmann::json j{{"interval", {r.interval.start_s, r.interval.end_s}},
                     {"reports", r.reports},
                     {"list", r.list ? nlohmann::json(*r.list) : nlohmann::json(nullptr)}};
    out << j.dump() << '\n';
  }
}

std::vector<MndRoundRecord> read_mnd_rounds(const fs::path& path) {
  std::vector<MndRoundRecord> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      MndRoundRecord r;
      r.interval = TimeWindow{j.at("interval").at(0).get<double>(), j.at("interval").at(1).get<double>()};
      r.reports = j.at("reports").get<std::vector<SuspicionReport>>();
      if (!j.at("list").is_null()) r.list = j["list"].get<MaliciousList>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), n);
    }
  }
  return out;
}

// --- commands ------------------------------------------------------------------------------

EvalReport cmd_run(const RunManifest& m, const PipelineConfig& config) {
  const Scenario scenario = load_scenario(m.scenario_path);
  if (!scenario.truth) throw EvaluationError("scenario has no ground truth: " + m.scenario_path.string());
  std::string name = m.scenario_name;
  if (name.empty()) {
    const auto p = fs::is_directory(m.scenario_path) ? m.scenario_path : m.scenario_path.parent_path();
    name = fs::absolute(p).lexically_normal().filename().string();
    if (name.empty()) name = fs::absolute(p).lexically_normal().parent_path().filename().string();
  }

  const auto artifacts = execute(scenario, m.method, m.mnd_mode, config, m.seed);
  auto report = evaluate(artifacts, *scenario.truth, name, m.method, m.mnd_mode, m.seed);

  fs::create_directories(m.output_dir);
  nlohmann::json manifest{{"scenario", name},
                          {"scenario_path", fs::absolute(m.scenario_path).lexically_normal().string()},
                          {"method", to_string(m.method)},
                          {"mnd_mode", to_string(m.mnd_mode)},
                          {"seed", m.seed},
                          {"config", config},
                          {"training",
                           {{"clients", artifacts.clients},
                            {"synthetic_rows", artifacts.synthetic_rows},
                            {"fedavg_calls", artifacts.fedavg_calls}}}};
  write_file(m.output_dir / "manifest.json", manifest.dump(2) + "\n");
  write_onset_decisions(m.output_dir / "onset_decisions.csv", artifacts.onset);
  write_mnd_rounds(m.output_dir / "mnd_rounds.jsonl", artifacts.rounds);
  write_file(m.output_dir / "report.json", nlohmann::json(report).dump(2) + "\n");
  write_file(m.output_dir / "report.csv", csv_header() + "\n" + csv_row(report) + "\n");
  write_file(m.output_dir / "timing.json", nlohmann::json(artifacts.timing).dump(2) + "\n");
  report.timing = artifacts.timing;
  return report;
}

EvalReport cmd_evaluate(const fs::path& run_dir, const fs::path& scenario_path) {
  const auto manifest = nlohmann::json::parse(read_file(run_dir / "manifest.json"));
  const fs::path source =
      scenario_path.empty() ? fs::path(manifest.at("scenario_path").get<std::string>()) : scenario_path;
  const Scenario scenario = load_scenario(source);
  if (!scenario.truth) throw EvaluationError("evaluation needs ground truth");
  RunArtifacts artifacts;
  artifacts.onset = read_onset_decisions(run_dir / "onset_decisions.csv");
  artifacts.rounds = read_mnd_rounds(run_dir / "mnd_rounds.jsonl");
  const auto mode_name = manifest.at("mnd_mode").get<std::string>();
  return evaluate(artifacts, *scenario.truth, manifest.at("scenario").get<std::string>(),
                  method_from(manifest.at("method").get<std::string>()), mnd_mode_from(mode_name),
                  manifest.at("seed").get<std::uint64_t>());
}

ReportTable cmd_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw EvaluationError("no such directory: " + dir.string());
  std::vector<EvalReport> reports;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().filename() != "report.json") continue;
    auto r = nlohmann::json::parse(read_file(entry.path())).get<EvalReport>();
    const auto timing = entry.path().parent_path() / "timing.json";
    if (fs::exists(timing)) r.timing = nlohmann::json::parse(read_file(timing)).get<Timing>();
    reports.push_back(std::move(r));
  }
  if (reports.empty()) throw EvaluationError("no report.json under " + dir.string());
  std::ranges::sort(reports, {}, [](const EvalReport& r) {
    return std::tie(r.scenario, r.method, r.mnd_mode, r.seed);
  });

  ReportTable table;
  table.rows = reports.size();
  table.csv = csv_header() + "\n";
  for (const auto& r : reports) table.csv += csv_row(r) + "\n";

  auto pct = [](const std::optional<double>& v) {
    if (!v) return std::string("NA");
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * *v;
    return s.str();
  };
  std::ostringstream t;
  t << std::left << std::setw(16) << "scenario" << std::setw(16) << "method" << std::setw(18)
    << "mnd_mode" << std::right << std::setw(6) << "seed" << std::setw(9) << "F1" << std::setw(9)
    << "FAR" << std::setw(9) << "1st-s" << std::setw(9) << "MND-DR" << std::setw(9) << "MND-FPR"
    << std::setw(9) << "MND-F1" << std::setw(10) << "train_s" << '\n';
  for (const auto& r : reports) {
    std::ostringstream secs;
    if (r.timing)
      secs << std::fixed << std::setprecision(2) << r.timing->onset_train_s;
    else
      secs << "NA";
    t << std::left << std::setw(16) << r.scenario << std::setw(16) << r.method << std::setw(18)
      << r.mnd_mode << std::right << std::setw(6) << r.seed << std::setw(9)
      << pct(r.onset_scores.f1) << std::setw(9) << pct(r.onset_scores.far) << std::setw(9)
      << pct(r.first_second.rate()) << std::setw(9) << pct(r.mnd_per_node.dr) << std::setw(9)
      << pct(r.mnd_per_node.far) << std::setw(9) << pct(r.mnd_per_node.f1) << std::setw(10)
      << secs.str() << '\n';
  }
  table.text = t.str();
  return table;
}

}  // namespace floodwatch
