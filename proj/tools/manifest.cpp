#include "manifest.hpp"

#include "dlcz/errors.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>
#include "json.hpp"

#include <chrono>
#include <fstream>

namespace dlcz::cli {

std::string manifest_id(const std::string& command, const std::string& payload) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : command + '\n' + payload) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string now_utc() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", now);
}

void append_manifest(const std::filesystem::path& dir, RunManifest m) {
  nlohmann::ordered_json j;
  j["id"] = m.id;
  j["command"] = m.command;
  if (!m.config_text.empty()) j["config"] = m.config_text;
  if (m.seed) j["seed"] = *m.seed;
  j["created_at"] = m.created_at.empty() ? now_utc() : m.created_at;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;

  std::ofstream out(dir / "manifest.jsonl", std::ios::app);
  out << j.dump() << '\n';
  if (!out) throw DataError(fmt::format("cannot append to {}", (dir / "manifest.jsonl").string()));
}

}  // namespace dlcz::cli
