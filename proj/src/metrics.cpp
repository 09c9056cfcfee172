#include "floodwatch/metrics.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include <nlohmann/json.hpp>

#include "floodwatch/errors.hpp"

namespace floodwatch {

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "NA";
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), *v);
  return std::string(buf.data(), end);
}

std::string fmt(double v) { return fmt(std::optional<double>(v)); }

}  // namespace

Scores score(const Confusion& c) {
  Scores s;
  s.dr = ratio(c.tp, c.tp + c.fn);
  s.recall = s.dr;
  s.fnr = ratio(c.fn, c.tp + c.fn);
  s.far = ratio(c.fp, c.fp + c.tn);
  s.precision = ratio(c.tp, c.tp + c.fp);
  if (s.precision && s.recall && *s.precision + *s.recall > 0)
    s.f1 = 2 * *s.precision * *s.recall / (*s.precision + *s.recall);
  else if (s.precision && s.recall)
    s.f1 = 0.0;
  return s;
}

Scores macro_average(std::span<const Scores> scores) {
  auto mean = [&](std::optional<double> Scores::*field) -> std::optional<double> {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& s : scores)
      if (s.*field) sum += *(s.*field), ++n;
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  };
  return Scores{mean(&Scores::dr),        mean(&Scores::far),    mean(&Scores::fnr),
                mean(&Scores::precision), mean(&Scores::recall), mean(&Scores::f1)};
}

Confusion mnd_confusion(const std::set<VehicleId>& listed, const std::set<VehicleId>& attackers,
                        const std::set<VehicleId>& present) {
  Confusion c;
  for (auto v : listed) {
    if (attackers.contains(v))
      ++c.tp;
    else
      ++c.fp;
  }
  for (auto v : present) {
    if (listed.contains(v)) continue;
    if (attackers.contains(v))
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

Confusion mnd_confusion(std::span<const ListedRound> rounds, const GroundTruth* truth) {
  if (!truth) throw EvaluationError("malicious-node evaluation needs ground truth");
  Confusion c;
  for (const auto& r : rounds) c += mnd_confusion(r.listed, truth->attackers, r.present);
  return c;
}

std::optional<double> FirstSecond::rate() const { return ratio(flagged, windows); }

FirstSecond first_second(std::span<const OnsetDecision> decisions, const GroundTruth& truth) {
  std::set<std::int64_t> flagged_seconds;
  for (const auto& d : decisions)
    if (d.attack) flagged_seconds.insert(d.t);
  FirstSecond out;
  for (const auto& w : truth.attack_windows) {
    if (!(w.length() > 0)) continue;
    ++out.windows;
    if (flagged_seconds.contains(static_cast<std::int64_t>(std::ceil(w.start_s)))) ++out.flagged;
  }
  return out;
}

std::optional<double> first_second_rate(std::span<const OnsetDecision> decisions,
                                        const GroundTruth& truth) {
  return first_second(decisions, truth).rate();
}

void to_json(nlohmann::json& j, const Confusion& c) {
  j = {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
}

void from_json(const nlohmann::json& j, Confusion& c) {
  c.tp = j.at("tp").get<std::uint64_t>();
  c.tn = j.at("tn").get<std::uint64_t>();
  c.fp = j.at("fp").get<std::uint64_t>();
  c.fn = j.at("fn").get<std::uint64_t>();
}

void to_json(nlohmann::json& j, const Scores& s) {
  j = {{"dr", opt(s.dr)},               {"far", opt(s.far)},       {"fnr", opt(s.fnr)},
       {"precision", opt(s.precision)}, {"recall", opt(s.recall)}, {"f1", opt(s.f1)}};
}

void from_json(const nlohmann::json& j, Scores& s) {
  s = Scores{opt_from(j, "dr"),        opt_from(j, "far"),    opt_from(j, "fnr"),
             opt_from(j, "precision"), opt_from(j, "recall"), opt_from(j, "f1")};
}

void to_json(nlohmann::json& j, const Timing& t) {
  j = {{"preprocess_s", t.preprocess_s}, {"onset_train_s", t.onset_train_s}, {"mnd_s", t.mnd_s}};
}

void from_json(const nlohmann::json& j, Timing& t) {
  t.preprocess_s = j.at("preprocess_s").get<double>();
  t.onset_train_s = j.at("onset_train_s").get<double>();
  t.mnd_s = j.at("mnd_s").get<double>();
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = {{"scenario", r.scenario},
       {"method", r.method},
       {"mnd_mode", r.mnd_mode},
       {"seed", r.seed},
       {"onset",
        {{"confusion", r.onset},
         {"scores", r.onset_scores},
         {"first_second",
          {{"flagged", r.first_second.flagged},
           {"windows", r.first_second.windows},
           {"rate", opt(r.first_second.rate())}}}}},
       {"mnd",
        {{"rounds", r.mnd_rounds},
         {"pooled", {{"confusion", r.mnd_pooled}, {"scores", r.mnd_pooled_scores}}},
         {"per_node", r.mnd_per_node}}}};
  if (r.timing) j["timing"] = *r.timing;
}

void from_json(const nlohmann::json& j, EvalReport& r) {
  r.scenario = j.at("scenario").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.mnd_mode = j.at("mnd_mode").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  const auto& o = j.at("onset");
  r.onset = o.at("confusion").get<Confusion>();
  r.onset_scores = o.at("scores").get<Scores>();
  r.first_second.flagged = o.at("first_second").at("flagged").get<std::size_t>();
  r.first_second.windows = o.at("first_second").at("windows").get<std::size_t>();
  const auto& m = j.at("mnd");
  r.mnd_rounds = m.at("rounds").get<std::size_t>();
  r.mnd_pooled = m.at("pooled").at("confusion").get<Confusion>();
  r.mnd_pooled_scores = m.at("pooled").at("scores").get<Scores>();
  r.mnd_per_node = m.at("per_node").get<Scores>();
  if (j.contains("timing"))
    r.timing = j["timing"].get<Timing>();
  else
    r.timing.reset();
}

std::string csv_header() {
  return "scenario,method,mnd_mode,seed,onset_dr,onset_far,onset_fnr,onset_f1,first_second,"
         "mnd_dr,mnd_far,mnd_fnr,mnd_f1,preprocess_s,onset_train_s,mnd_s";
}

std::string csv_row(const EvalReport& r) {
  std::string row = r.scenario + ',' + r.method + ',' + r.mnd_mode + ',' + std::to_string(r.seed);
  for (const auto& v : {r.onset_scores.dr, r.onset_scores.far, r.onset_scores.fnr,
                        r.onset_scores.f1, r.first_second.rate(), r.mnd_per_node.dr,
                        r.mnd_per_node.far, r.mnd_per_node.fnr, r.mnd_per_node.f1})
    row += ',' + fmt(v);
  if (r.timing)
    row += ',' + fmt(r.timing->preprocess_s) + ',' + fmt(r.timing->onset_train_s) + ',' +
           fmt(r.timing->mnd_s);
  else
    row += ",NA,NA,NA";
  return row;
}

}  // namespace floodwatch
