#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace floodwatch {

enum class MessageType {
  trees_upload,
  global_ensemble,
  weights_broadcast,
  weights_update,
  onset_report,
  onset_confirmed,
  suspicion_report,
  malicious_list,
};

std::string_view to_string(MessageType type);
MessageType message_type_from(std::string_view name);

/// One JSON-lines record: {"type", "cid", "round", "model_version", "payload"}.
/// Broadcasts from the server use cid 0.
struct Message {
  MessageType type = MessageType::onset_report;
  std::uint32_t cid = 0;
  std::uint32_t round = 0;
  std::uint64_t model_version = 0;
  nlohmann::json payload;

  std::string serialize() const;  // single line, no trailing newline
  static Message parse(std::string_view line);

  friend bool operator==(const Message&, const Message&) = default;
};

/// In-process transport carrying serialized lines. Every line pushed is
/// optionally mirrored to a transcript stream so a session can be replayed
/// from a file.
class Channel {
 public:
  explicit Channel(std::ostream* transcript = nullptr) : transcript_(transcript) {}

  void push(std::string line);
  std::optional<std::string> try_pop();
  std::vector<std::string> drain();
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::deque<std::string> lines_;
  std::ostream* transcript_;
};

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace floodwatch
