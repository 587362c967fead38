#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace langsub {

inline constexpr const char* kToolVersion = "0.3.0";

/// Provenance embedded in every output bundle. No wall-clock time is
/// recorded unless SOURCE_DATE_EPOCH is set, so reruns stay byte-identical.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> inputs;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::string tool_version = kToolVersion;
  std::optional<std::string> created;
};

inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::optional<std::string> reproducible_timestamp() {
  const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
  if (!epoch || !*epoch) return std::nullopt;
  const std::time_t t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j = {{"subcommand", m.subcommand},
                      {"inputs", m.inputs},
                      {"seed", m.seed},
                      {"config", m.config},
                      {"config_hash", fnv1a_hex(m.config.dump())},
                      {"tool_version", m.tool_version}};
  if (m.created) j["created"] = *m.created;
  return j;
}

}  // namespace langsub
