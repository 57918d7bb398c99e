#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dlcz::cli {

struct RunManifest {
  std::string id;
  std::string command;
  std::string config_text;
  std::optional<std::uint64_t> seed;
  std::string created_at;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

/// Content-derived id: the same command on the same inputs gets the same id.
std::string manifest_id(const std::string& command, const std::string& payload);

/// Appends one JSON line to `<dir>/manifest.jsonl`; earlier lines are never
/// rewritten.
void append_manifest(const std::filesystem::path& dir, RunManifest manifest);

std::string now_utc();

}  // namespace dlcz::cli
