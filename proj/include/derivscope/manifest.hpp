#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace derivscope {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Hex SHA-256 of a file's contents. Throws DataError when unreadable.
std::string sha256_file(const std::string& path);
std::string sha256_bytes(std::string_view bytes);

/// Provenance record written beside every run's outputs.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
  std::vector<std::pair<std::string, std::string>> outputs;  // path, digest
  std::map<std::string, std::int64_t> counts;
  std::string started_at;
  std::string finished_at;

  void add_input(const std::string& path) { inputs.emplace_back(path, sha256_file(path)); }
  void add_output(const std::string& path) { outputs.emplace_back(path, sha256_file(path)); }

  nlohmann::json to_json() const;
};

/// UTC, ISO 8601, second resolution.
std::string utc_timestamp();

}  // namespace derivscope
