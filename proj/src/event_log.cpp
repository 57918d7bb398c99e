#include "dlcz/event_log.hpp"

#include "dlcz/errors.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace dlcz {
namespace {

constexpr std::string_view kEventsMarker = "[events]";

template <class Int>
Int parse_int(std::string_view s, int line_no, std::string_view what) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError(fmt::format("line {}: bad {} '{}'", line_no, what, s));
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

void write_event_log(std::ostream& out, const EventLog& log) {
  out << "format_version = " << log.format_version << "\n";
  out << "run_id = " << log.run_id << "\n";
  out << "seed = " << log.seed << "\n";
  out << to_config_text(log.config);
  for (const auto& s : log.segments) {
    out << fmt::format("segment = {} {} {} {} {}\n", s.first_trial, s.trial_count, s.theta1_mdeg,
                       s.theta2_mdeg, s.tau_ns);
  }
  out << kEventsMarker << "\n";
  for (const auto& e : log.events) {
    out << fmt::format("{},{},{},{},{},{}\n", e.trial_index, e.time_ns, to_string(e.detector),
                       e.theta1_mdeg, e.theta2_mdeg, e.tau_ns);
  }
}

std::string to_text(const EventLog& log) {
  std::ostringstream out;
  write_event_log(out, log);
  return out.str();
}

EventLog read_event_log(std::istream& in) {
  EventLog log;
  std::string config_text;
  std::string raw;
  int line_no = 0;
  bool have_version = false;
  bool in_events = false;
  std::int64_t last_time = std::numeric_limits<std::int64_t>::min();

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (!in_events) {
      if (line == kEventsMarker) {
        if (!have_version) throw DataError("missing format_version header");
        try {
          log.config = parse_config(config_text);
        } catch (const ConfigError& e) {
          throw DataError(std::string("log header: ") + e.what());
        }
        in_events = true;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw DataError(fmt::format("line {}: expected 'key = value' in header", line_no));
      }
      const std::string_view key = trim(line.substr(0, eq));
      const std::string_view value = trim(line.substr(eq + 1));
      if (key == "format_version") {
        log.format_version = parse_int<int>(value, line_no, "format_version");
        if (log.format_version != EventLog::kFormatVersion) {
          throw DataError(fmt::format("unsupported format_version {} (this build reads {})",
                                      log.format_version, EventLog::kFormatVersion));
        }
        have_version = true;
      } else if (key == "run_id") {
        log.run_id = std::string(value);
      } else if (key == "seed") {
        log.seed = parse_int<std::uint64_t>(value, line_no, "seed");
      } else if (key == "segment") {
        std::vector<std::string_view> f;
        for (auto part : split(value, ' ')) {
          if (!part.empty()) f.push_back(part);
        }
        if (f.size() != 5) throw DataError(fmt::format("line {}: segment needs 5 fields", line_no));
        log.segments.push_back({parse_int<std::uint64_t>(f[0], line_no, "first_trial"),
                                parse_int<std::uint64_t>(f[1], line_no, "trial_count"),
                                parse_int<std::int32_t>(f[2], line_no, "theta1_mdeg"),
                                parse_int<std::int32_t>(f[3], line_no, "theta2_mdeg"),
                                parse_int<std::int64_t>(f[4], line_no, "tau_ns")});
      } else {
        config_text.append(raw).append("\n");
      }
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 6) {
      throw DataError(fmt::format("line {}: expected 6 comma-separated fields", line_no));
    }
    DetectionEvent e;
    e.trial_index = parse_int<std::uint64_t>(f[0], line_no, "trial_index");
    e.time_ns = parse_int<std::int64_t>(f[1], line_no, "time_ns");
    try {
      e.detector = parse_detector(f[2]);
    } catch (const DataError&) {
      throw DataError(fmt::format("line {}: unknown detector '{}'", line_no, f[2]));
    }
    e.theta1_mdeg = parse_int<std::int32_t>(f[3], line_no, "theta1_mdeg");
    e.theta2_mdeg = parse_int<std::int32_t>(f[4], line_no, "theta2_mdeg");
    e.tau_ns = parse_int<std::int64_t>(f[5], line_no, "tau_ns");
    if (e.time_ns < last_time) {
      throw DataError(fmt::format("line {}: events not sorted by time", line_no));
    }
    last_time = e.time_ns;
    log.events.push_back(e);
  }
  if (!in_events) throw DataError("missing [events] section");
  return log;
}

EventLog load_event_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open event log '" + path + "'");
  return read_event_log(in);
}

void write_file_atomically(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = fs::path(path + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw DataError("write failed for '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, target);
}

}  // namespace dlcz
