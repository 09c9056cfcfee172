#include "floodwatch/protocol.hpp"

#include <array>
#include <fstream>

#include "floodwatch/errors.hpp"

namespace floodwatch {

namespace {

constexpr std::array<std::pair<MessageType, std::string_view>, 8> kNames{{
    {MessageType::trees_upload, "TREES_UPLOAD"},
    {MessageType::global_ensemble, "GLOBAL_ENSEMBLE"},
    {MessageType::weights_broadcast, "WEIGHTS_BROADCAST"},
    {MessageType::weights_update, "WEIGHTS_UPDATE"},
    {MessageType::onset_report, "ONSET_REPORT"},
    {MessageType::onset_confirmed, "ONSET_CONFIRMED"},
    {MessageType::suspicion_report, "SUSPICION_REPORT"},
    {MessageType::malicious_list, "MALICIOUS_LIST"},
}};

}  // namespace

std::string_view to_string(MessageType type) {
  for (const auto& [t, name] : kNames)
    if (t == type) return name;
  return "UNKNOWN";
}

MessageType message_type_from(std::string_view name) {
  for (const auto& [t, n] : kNames)
    if (n == name) return t;
  throw ProtocolError("unknown message type '" + std::string(name) + "'");
}

std::string Message::serialize() const {
  nlohmann::json j = {{"type", to_string(type)},
                      {"cid", cid},
                      {"round", round},
                      {"model_version", model_version},
                      {"payload", payload}};
  return j.dump();
}

Message Message::parse(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  }
  try {
    Message m;
    m.type = message_type_from(j.at("type").get<std::string>());
    m.cid = j.at("cid").get<std::uint32_t>();
    m.round = j.at("round").get<std::uint32_t>();
    m.model_version = j.at("model_version").get<std::uint64_t>();
    m.payload = j.value("payload", nlohmann::json());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("message is missing a field: ") + e.what());
  }
}

void Channel::push(std::string line) {
  std::lock_guard lock(mutex_);
  if (transcript_) *transcript_ << line << '\n';
  lines_.push_back(std::move(line));
}

std::optional<std::string> Channel::try_pop() {
  std::lock_guard lock(mutex_);
  if (lines_.empty()) return std::nullopt;
  auto line = std::move(lines_.front());
  lines_.pop_front();
  return line;
}

std::vector<std::string> Channel::drain() {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out(std::make_move_iterator(lines_.begin()),
                               std::make_move_iterator(lines_.end()));
  lines_.clear();
  return out;
}

std::size_t Channel::size() const {
  std::lock_guard lock(mutex_);
  return lines_.size();
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(std::move(line));
  }
  return out;
}

}  // namespace floodwatch
