#include "floodwatch/fed_onset.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"
#include "floodwatch/log.hpp"
#include "floodwatch/rng.hpp"

namespace floodwatch {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

Message server_message(MessageType type, std::uint32_t round, std::uint64_t version,
                       nlohmann::json payload) {
  return Message{type, 0, round, version, std::move(payload)};
}

}  // namespace

bool should_retrain(const RetrainState& s, const UpdatePolicy& policy) {
  return std::visit(
      overloaded{
          [&](const StaticInterval& p) { return s.seconds_since_training >= p.seconds; },
          [&](const NewNodeThreshold& p) { return s.joins_since_training >= p.joins; },
          [&](const AttackCountThreshold& p) { return s.onsets_since_training >= p.onsets; },
          [&](const WeightedTrigger& p) {
            return p.join_weight * s.joins_since_training +
                       p.attack_weight * s.onsets_since_training >=
                   p.threshold;
          },
      },
      policy);
}

void FedConfig::validate() const {
  if (rounds < 1) throw ConfigError("fed: rounds must be >= 1");
  if (onset_quorum < 1) throw ConfigError("fed: onset_quorum must be >= 1");
  if (clients_per_round && *clients_per_round < 1)
    throw ConfigError("fed: clients_per_round must be >= 1");
  if (!(confirmation_window_s > 0)) throw ConfigError("fed: confirmation_window_s must be > 0");
  if (const auto* p = std::get_if<StaticInterval>(&update_policy); p && !(p->seconds > 0))
    throw ConfigError("fed: static_interval seconds must be > 0");
}

GlobalModel round0_aggregate(std::vector<std::pair<ClientId, LocalEnsemble>> submissions,
                             const HeadConfig& head_config, std::uint32_t rounds_total) {
  if (submissions.empty()) throw ProtocolError("round 0: no tree submissions");
  std::ranges::sort(submissions, {}, [](const auto& s) { return raw(s.first); });
  GlobalModel model;
  for (std::size_t i = 0; i < submissions.size(); ++i) {
    if (i > 0 && submissions[i].first == submissions[i - 1].first)
      throw ProtocolError("round 0: duplicate submission from client " +
                          to_string(submissions[i].first));
    auto& e = submissions[i].second;
    e.client = submissions[i].first;
    if (!model.ensembles.empty() &&
        (e.trees.size() != model.ensembles.front().trees.size() ||
         e.num_features != model.ensembles.front().num_features))
      throw ProtocolError("round 0: ensemble from " + to_string(e.client) +
                          " has a different shape");
    model.ensembles.push_back(std::move(e));
  }
  model.head = init(model.ensembles.size(), model.ensembles.front().trees.size(), head_config);
  model.round = 0;
  model.model_version = 1;
  model.rounds_total = rounds_total;
  return model;
}

HeadWeights fedavg(std::vector<WeightUpdate> updates) {
  if (updates.empty()) throw ProtocolError("fedavg: no updates");
  std::ranges::sort(updates, {}, [](const WeightUpdate& u) { return raw(u.client); });
  double total = 0;
  for (const auto& u : updates) {
    if (u.sample_count < 1)
      throw ProtocolError("fedavg: client " + to_string(u.client) + " reports no samples");
    if (!u.weights.same_shape(updates.front().weights))
      throw ProtocolError("fedavg: weight shape mismatch from client " + to_string(u.client));
    total += static_cast<double>(u.sample_count);
  }
  // Accumulate deviations from the first update: identical inputs then
  // reproduce the input exactly.
  auto base = updates.front().weights.flatten();
  std::vector<double> acc(base.size(), 0.0);
  for (std::size_t c = 1; c < updates.size(); ++c) {
    const double share = static_cast<double>(updates[c].sample_count) / total;
    const auto p = updates[c].weights.flatten();
    for (std::size_t i = 0; i < p.size(); ++i) acc[i] += share * (p[i] - base[i]);
  }
  for (std::size_t i = 0; i < base.size(); ++i) base[i] += acc[i];
  HeadWeights out = updates.front().weights;
  out.assign_flat(base);
  return out;
}

OnsetScorer::OnsetScorer(const GlobalModel& model) : model_(model) {
  if (!model.complete())
    throw NotReadyError("onset model not complete: round " + std::to_string(model.round) +
                        " of " + std::to_string(model.rounds_total));
  buffer_.resize(model.head.input_size());
}

double OnsetScorer::probability(std::span<const double> features) {
  per_tree_outputs_into(model_.ensembles, features, buffer_);
  return forward(model_.head, buffer_);
}

double onset_probability(const GlobalModel& model, std::span<const double> features) {
  OnsetScorer scorer(model);
  return scorer.probability(features);
}

Detection detect_onset(const GlobalModel& model, const FeatureRow& row) {
  return onset_probability(model, row.features) > 0.5 ? Detection::attack : Detection::normal;
}

bool confirm_onset(std::span<const OnsetReport> reports, std::uint32_t quorum, double window_s) {
  if (quorum == 0) return true;
  std::vector<OnsetReport> sorted(reports.begin(), reports.end());
  std::ranges::stable_sort(sorted, {}, &OnsetReport::time_s);
  std::size_t lo = 0;
  for (std::size_t hi = 0; hi < sorted.size(); ++hi) {
    while (sorted[hi].time_s - sorted[lo].time_s >= window_s) ++lo;
    std::set<std::uint32_t> distinct;
    for (std::size_t i = lo; i <= hi; ++i) distinct.insert(raw(sorted[i].client));
    if (distinct.size() >= quorum) return true;
  }
  return false;
}

// --- client ------------------------------------------------------------------

OnsetClient::OnsetClient(ClientId id, std::vector<FeatureRow> rows, ClientTraining training)
    : id_(id), rows_(std::move(rows)), training_(std::move(training)) {
  if (rows_.empty()) throw ConfigError("client " + to_string(id_) + " has no rows");
}

Message OnsetClient::upload_trees() {
  std::vector<FeatureRow> local;
  const std::vector<FeatureRow>* train_rows = &rows_;
  if (training_.balance) {
    auto balanced = smote(rows_, *training_.balance, mix_seed(training_.seed, raw(id_)));
    if (balanced.warning) logger()->warn("{}: {}", to_string(id_), *balanced.warning);
    synthetic_ = balanced.synthetic_count;
    local = std::move(balanced.rows);
    train_rows = &local;
  }
  auto ensemble = train(*train_rows, training_.gbdt, id_);
  if (training_.balance) rows_ = std::move(local);
  return Message{MessageType::trees_upload, raw(id_), 0, 0,
                 nlohmann::json{{"ensemble", ensemble}, {"sample_count", rows_.size()}}};
}

std::optional<Message> OnsetClient::on_message(const Message& m) {
  switch (m.type) {
    case MessageType::global_ensemble: {
      ensembles_ = m.payload.at("ensembles").get<std::vector<LocalEnsemble>>();
      batch_.reset();
      return std::nullopt;
    }
    case MessageType::weights_broadcast: {
      if (ensembles_.empty())
        throw ProtocolError(to_string(id_) + ": weights broadcast before global ensemble");
      if (!batch_) batch_ = make_batch(rows_, ensembles_);
      auto cfg = training_.head;
      cfg.rng_seed = mix_seed(mix_seed(training_.head.rng_seed ^ training_.seed, raw(id_)),
                              m.round);
      auto w = train_local(m.payload.at("head").get<HeadWeights>(), *batch_, cfg);
      return Message{MessageType::weights_update, raw(id_), m.round, m.model_version,
                     nlohmann::json{{"head", w}, {"sample_count", rows_.size()}}};
    }
    default:
      throw ProtocolError(to_string(id_) + ": unexpected " + std::string(to_string(m.type)));
  }
}

// --- server ------------------------------------------------------------------

OnsetServer::OnsetServer(FedConfig config, HeadConfig head_config)
    : config_(std::move(config)), head_config_(head_config) {
  config_.validate();
  head_config_.validate();
}

Message OnsetServer::accept_trees(std::span<const Message> uploads) {
  std::vector<std::pair<ClientId, LocalEnsemble>> submissions;
  for (const auto& m : uploads) {
    if (m.type != MessageType::trees_upload)
      throw ProtocolError("round 0: expected TREES_UPLOAD, got " + std::string(to_string(m.type)));
    submissions.emplace_back(ClientId{m.cid}, m.payload.at("ensemble").get<LocalEnsemble>());
  }
  const auto previous = model_version();
  model_ = std::make_shared<GlobalModel>(
      round0_aggregate(std::move(submissions), head_config_, config_.rounds));
  model_->model_version = previous + 1;
  state_ = RetrainState{};
  return server_message(MessageType::global_ensemble, 0, model_->model_version,
                        nlohmann::json{{"ensembles", model_->ensembles}});
}

Message OnsetServer::weights_broadcast(std::uint32_t round) const {
  if (!model_) throw ProtocolError("weights broadcast before round 0");
  return server_message(MessageType::weights_broadcast, round, model_->model_version,
                        nlohmann::json{{"head", model_->head}});
}

void OnsetServer::accept_weights(std::span<const Message> updates) {
  if (!model_) throw ProtocolError("weights update before round 0");
  std::vector<WeightUpdate> batch;
  std::uint32_t round = 0;
  for (const auto& m : updates) {
    if (m.type != MessageType::weights_update)
      throw ProtocolError("expected WEIGHTS_UPDATE, got " + std::string(to_string(m.type)));
    round = m.round;
    batch.push_back(WeightUpdate{ClientId{m.cid}, m.payload.at("head").get<HeadWeights>(),
                                 m.payload.at("sample_count").get<std::uint64_t>()});
  }
  // Copy-on-write so models already handed out stay untouched.
  auto next = std::make_shared<GlobalModel>(*model_);
  next->head = fedavg(std::move(batch));
  next->round = round;
  next->model_version = model_->model_version + 1;
  model_ = std::move(next);
}

ModelHandoff OnsetServer::authenticate(VehicleId vehicle) {
  ++state_.joins_since_training;
  logger()->debug("authenticated {} at model version {}", to_string(vehicle), model_version());
  return ModelHandoff{model_, model_version()};
}

// --- orchestration ------------------------------------------------------------

TrainingOutcome run_training(std::vector<OnsetClient>& clients, OnsetServer& server,
                             const TrainingHooks& hooks) {
  const auto started = std::chrono::steady_clock::now();
  if (clients.empty()) throw ProtocolError("training: no clients");
  const auto& cfg = server.config();
  auto available = [&](const OnsetClient& c, std::uint32_t round) {
    return !hooks.available || hooks.available(c.id(), round);
  };
  auto participants = [&](std::uint32_t round) {
    std::vector<OnsetClient*> out;
    for (auto& c : clients)
      if (available(c, round)) out.push_back(&c);
    if (out.empty()) throw ProtocolError("round " + std::to_string(round) + ": no client answered");
    if (cfg.clients_per_round && out.size() < *cfg.clients_per_round)
      logger()->warn("round {}: only {} of {} clients available", round, out.size(),
                     *cfg.clients_per_round);
    if (cfg.clients_per_round && out.size() > *cfg.clients_per_round)
      out.resize(*cfg.clients_per_round);
    return out;
  };
  auto collect = [](Channel& ch) {
    std::vector<Message> out;
    for (auto& line : ch.drain()) out.push_back(Message::parse(line));
    return out;
  };

  Channel uplink(hooks.transcript);
  Channel downlink(hooks.transcript);

  for (auto* c : participants(0)) uplink.push(c->upload_trees().serialize());
  downlink.push(server.accept_trees(collect(uplink)).serialize());
  // Every client receives the ensemble, including those that sat out round 0.
  for (const auto& m : collect(downlink))
    for (auto& c : clients) c.on_message(m);

  TrainingOutcome outcome;
  for (std::uint32_t round = 1; round < cfg.rounds; ++round) {
    downlink.push(server.weights_broadcast(round).serialize());
    const auto broadcast = collect(downlink);
    for (auto* c : participants(round))
      for (const auto& m : broadcast)
        if (auto reply = c->on_message(m)) uplink.push(reply->serialize());
    server.accept_weights(collect(uplink));
    ++outcome.fedavg_calls;
  }
  outcome.model = server.model();
  outcome.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return outcome;
}

// --- serialization --------------------------------------------------------------

void to_json(nlohmann::json& j, const GlobalModel& m) {
  j = nlohmann::json{{"ensembles", m.ensembles},
                     {"head", m.head},
                     {"round", m.round},
                     {"model_version", m.model_version},
                     {"rounds_total", m.rounds_total}};
}

void from_json(const nlohmann::json& j, GlobalModel& m) {
  m.ensembles = j.at("ensembles").get<std::vector<LocalEnsemble>>();
  m.head = j.at("head").get<HeadWeights>();
  m.round = j.at("round").get<std::uint32_t>();
  m.model_version = j.at("model_version").get<std::uint64_t>();
  m.rounds_total = j.at("rounds_total").get<std::uint32_t>();
  if (!std::ranges::is_sorted(m.ensembles, {}, [](const auto& e) { return raw(e.client); }))
    throw ProtocolError("global model ensembles are not sorted by client id");
}

namespace {

nlohmann::json policy_to_json(const UpdatePolicy& p) {
  return std::visit(
      overloaded{
          [](const StaticInterval& s) {
            return nlohmann::json{{"kind", "static_interval"}, {"seconds", s.seconds}};
          },
          [](const NewNodeThreshold& s) {
            return nlohmann::json{{"kind", "new_node_threshold"}, {"joins", s.joins}};
          },
          [](const AttackCountThreshold& s) {
            return nlohmann::json{{"kind", "attack_count_threshold"}, {"onsets", s.onsets}};
          },
          [](const WeightedTrigger& s) {
            return nlohmann::json{{"kind", "weighted"},
                                  {"join_weight", s.join_weight},
                                  {"attack_weight", s.attack_weight},
                                  {"threshold", s.threshold}};
          },
      },
      p);
}

UpdatePolicy policy_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "static_interval") return StaticInterval{j.at("seconds").get<double>()};
  if (kind == "new_node_threshold") return NewNodeThreshold{j.at("joins").get<std::uint32_t>()};
  if (kind == "attack_count_threshold")
    return AttackCountThreshold{j.at("onsets").get<std::uint32_t>()};
  if (kind == "weighted")
    return WeightedTrigger{j.value("join_weight", 1.0), j.value("attack_weight", 1.0),
                           j.at("threshold").get<double>()};
  throw ConfigError("fed: unknown update policy '" + kind + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const FedConfig& c) {
  j = nlohmann::json{{"rounds", c.rounds},
                     {"update_policy", policy_to_json(c.update_policy)},
                     {"onset_quorum", c.onset_quorum},
                     {"confirmation_window_s", c.confirmation_window_s}};
  j["clients_per_round"] = c.clients_per_round ? nlohmann::json(*c.clients_per_round)
                                               : nlohmann::json("all");
}

void from_json(const nlohmann::json& j, FedConfig& c) {
  static const std::set<std::string> known{"rounds", "clients_per_round", "update_policy",
                                           "onset_quorum", "confirmation_window_s"};
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw ConfigError("fed: unknown key '" + k + "'");
  try {
    if (j.contains("rounds")) c.rounds = j["rounds"].get<std::uint32_t>();
    if (j.contains("clients_per_round")) {
      const auto& v = j["clients_per_round"];
      if (v.is_string() && v.get<std::string>() == "all")
        c.clients_per_round.reset();
      else
        c.clients_per_round = v.get<std::uint32_t>();
    }
    if (j.contains("update_policy")) c.update_policy = policy_from_json(j["update_policy"]);
    if (j.contains("onset_quorum")) c.onset_quorum = j["onset_quorum"].get<std::uint32_t>();
    if (j.contains("confirmation_window_s"))
      c.confirmation_window_s = j["confirmation_window_s"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("fed: ") + e.what());
  }
  c.validate();
}

}  // namespace floodwatch
