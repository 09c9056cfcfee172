#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "floodwatch/balance.hpp"
#include "floodwatch/gbdt.hpp"
#include "floodwatch/head.hpp"
#include "floodwatch/ids.hpp"
#include "floodwatch/preprocess.hpp"
#include "floodwatch/protocol.hpp"

namespace floodwatch {

// --- model-update policies -------------------------------------------------

struct StaticInterval {
  double seconds = 600;
};
struct NewNodeThreshold {
  std::uint32_t joins = 0;
};
struct AttackCountThreshold {
  std::uint32_t onsets = 0;
};
struct WeightedTrigger {
  double join_weight = 1;
  double attack_weight = 1;
  double threshold = 1;
};
using UpdatePolicy =
    std::variant<StaticInterval, NewNodeThreshold, AttackCountThreshold, WeightedTrigger>;

/// Activity accumulated since the model was last (re)built.
struct RetrainState {
  double seconds_since_training = 0;
  std::uint32_t joins_since_training = 0;
  std::uint32_t onsets_since_training = 0;
};

bool should_retrain(const RetrainState& state, const UpdatePolicy& policy);

// --- configuration and model ------------------------------------------------

struct FedConfig {
  std::uint32_t rounds = 10;  // round 0 (trees) + rounds-1 weight rounds
  std::optional<std::uint32_t> clients_per_round;  // nullopt: every available client
  UpdatePolicy update_policy = StaticInterval{600};
  std::uint32_t onset_quorum = 2;
  double confirmation_window_s = 2;

  void validate() const;
};

struct GlobalModel {
  std::vector<LocalEnsemble> ensembles;  // ascending client id
  HeadWeights head;
  std::uint32_t round = 0;
  std::uint64_t model_version = 0;
  std::uint32_t rounds_total = 1;

  bool complete() const { return round + 1 >= rounds_total; }
};

enum class Detection { normal, attack };

struct WeightUpdate {
  ClientId client{};
  HeadWeights weights;
  std::uint64_t sample_count = 0;
};

/// Sorts the submitted ensembles by client id and initialises the head with K = |submissions|.
GlobalModel round0_aggregate(std::vector<std::pair<ClientId, LocalEnsemble>> submissions,
                             const HeadConfig& head_config, std::uint32_t rounds_total);

/// Sample-count weighted element-wise mean. Updates are reduced in client-id
/// order, so the result does not depend on arrival order.
HeadWeights fedavg(std::vector<WeightUpdate> updates);

/// Probability of attack for one feature row under a complete model.
double onset_probability(const GlobalModel& model, std::span<const double> features);
/// attack iff probability > 0.5; exactly 0.5 counts as normal.
Detection detect_onset(const GlobalModel& model, const FeatureRow& row);

/// Reusable scorer that avoids per-call allocation.
class OnsetScorer {
 public:
  explicit OnsetScorer(const GlobalModel& model);
  double probability(std::span<const double> features);
  Detection detect(std::span<const double> features) {
    return probability(features) > 0.5 ? Detection::attack : Detection::normal;
  }

 private:
  const GlobalModel& model_;
  std::vector<double> buffer_;
};

// --- onset confirmation -----------------------------------------------------

struct OnsetReport {
  ClientId client{};
  double time_s = 0;
};

/// True iff at least `quorum` distinct clients report within some window of
/// length `window_s` (half-open).
bool confirm_onset(std::span<const OnsetReport> reports, std::uint32_t quorum,
                   double window_s = 2.0);

// --- protocol participants ---------------------------------------------------

struct ClientTraining {
  GbdtConfig gbdt;
  HeadConfig head;
  std::optional<BalanceConfig> balance;  // SMOTE before local tree training
  std::uint64_t seed = 1;
};

class OnsetClient {
 public:
  OnsetClient(ClientId id, std::vector<FeatureRow> rows, ClientTraining training);

  ClientId id() const { return id_; }
  std::size_t sample_count() const { return rows_.size(); }
  std::size_t synthetic_count() const { return synthetic_; }
  const std::vector<FeatureRow>& rows() const { return rows_; }

  /// Round 0: train the local ensemble and produce the upload.
  Message upload_trees();
  /// Consumes a server broadcast; returns the reply, if the message calls for one.
  std::optional<Message> on_message(const Message& message);

  const std::vector<LocalEnsemble>& global_ensembles() const { return ensembles_; }

 private:
  ClientId id_;
  std::vector<FeatureRow> rows_;
  ClientTraining training_;
  std::size_t synthetic_ = 0;
  std::vector<LocalEnsemble> ensembles_;
  std::optional<HeadBatch> batch_;
};

struct ModelHandoff {
  std::shared_ptr<const GlobalModel> model;  // null before the first training completes
  std::uint64_t model_version = 0;
};

/// Server-side owner of the global model and of the retraining bookkeeping.
class OnsetServer {
 public:
  OnsetServer(FedConfig config, HeadConfig head_config);

  const FedConfig& config() const { return config_; }

  Message accept_trees(std::span<const Message> uploads);
  Message weights_broadcast(std::uint32_t round) const;
  void accept_weights(std::span<const Message> updates);

  std::shared_ptr<const GlobalModel> model() const { return model_; }
  std::uint64_t model_version() const { return model_ ? model_->model_version : 0; }

  /// Cold start: a joining vehicle receives the current model immediately.
  ModelHandoff authenticate(VehicleId vehicle);
  void note_confirmed_onset() { ++state_.onsets_since_training; }
  void advance_time(double seconds) { state_.seconds_since_training += seconds; }
  bool should_retrain() const { return floodwatch::should_retrain(state_, config_.update_policy); }
  const RetrainState& retrain_state() const { return state_; }

 private:
  FedConfig config_;
  HeadConfig head_config_;
  std::shared_ptr<GlobalModel> model_;
  RetrainState state_;
};

struct TrainingHooks {
  // Whether a client answers in a given round; absent means always.
  std::function<bool(ClientId, std::uint32_t)> available;
  // Mirror of every protocol line, for replay.
  std::ostream* transcript = nullptr;
};

struct TrainingOutcome {
  std::shared_ptr<const GlobalModel> model;
  std::uint32_t fedavg_calls = 0;
  double wall_seconds = 0;
};

/// Round 0 tree aggregation, then rounds-1 rounds of head averaging. All
/// traffic passes through a Channel as serialized JSON lines.
TrainingOutcome run_training(std::vector<OnsetClient>& clients, OnsetServer& server,
                             const TrainingHooks& hooks = {});

void to_json(nlohmann::json& j, const GlobalModel& model);
void from_json(const nlohmann::json& j, GlobalModel& model);
void to_json(nlohmann::json& j, const FedConfig& c);
void from_json(const nlohmann::json& j, FedConfig& c);

}  // namespace floodwatch
