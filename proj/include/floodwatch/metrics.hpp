#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "floodwatch/ids.hpp"
#include "floodwatch/scenario.hpp"

namespace floodwatch {

struct Confusion {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  Confusion& operator+=(const Confusion& o) {
    tp += o.tp, tn += o.tn, fp += o.fp, fn += o.fn;
    return *this;
  }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Metrics with a zero denominator are nullopt, never 0 or 1.
struct Scores {
  std::optional<double> dr, far, fnr, precision, recall, f1;
};

Scores score(const Confusion& c);

/// Mean of each metric over the inputs where it is defined.
Scores macro_average(std::span<const Scores> scores);

/// One aggregation round: tp listed attackers, fn unlisted present
/// attackers, fp listed benign, tn unlisted present benign.
Confusion mnd_confusion(const std::set<VehicleId>& listed, const std::set<VehicleId>& attackers,
                        const std::set<VehicleId>& present);

struct ListedRound {
  TimeWindow interval;
  std::set<VehicleId> listed;
  std::set<VehicleId> present;
};

/// Summed over rounds; attackers come from the ground truth.
Confusion mnd_confusion(std::span<const ListedRound> rounds, const GroundTruth* truth);

struct OnsetDecision {
  VehicleId vehicle{};
  std::int64_t t = 0;
  bool attack = false;
};

struct FirstSecond {
  std::size_t flagged = 0;
  std::size_t windows = 0;
  std::optional<double> rate() const;
};

/// A window counts when any vehicle flags attack at its first integer second.
FirstSecond first_second(std::span<const OnsetDecision> decisions, const GroundTruth& truth);
std::optional<double> first_second_rate(std::span<const OnsetDecision> decisions,
                                        const GroundTruth& truth);

struct Timing {
  double preprocess_s = 0;
  double onset_train_s = 0;
  double mnd_s = 0;
};

struct EvalReport {
  std::string scenario;
  std::string method;
  std::string mnd_mode;
  std::uint64_t seed = 0;

  Confusion onset;
  Scores onset_scores;
  FirstSecond first_second;

  Confusion mnd_pooled;
  Scores mnd_pooled_scores;
  Scores mnd_per_node;  // macro average over vehicles
  std::size_t mnd_rounds = 0;

  std::optional<Timing> timing;  // excluded from deterministic outputs
};

void to_json(nlohmann::json& j, const Confusion& c);
void from_json(const nlohmann::json& j, Confusion& c);
void to_json(nlohmann::json& j, const Scores& s);
void from_json(const nlohmann::json& j, Scores& s);
void to_json(nlohmann::json& j, const Timing& t);
void from_json(const nlohmann::json& j, Timing& t);
void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

std::string csv_header();
/// Undefined metrics print as NA.
std::string csv_row(const EvalReport& r);

}  // namespace floodwatch
