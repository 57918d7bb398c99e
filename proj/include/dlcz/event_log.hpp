#pragma once

#include "dlcz/simulator.hpp"

#include <iosfwd>
#include <string>

namespace dlcz {

/// Text form of an EventLog:
///
///   format_version = 1
///   run_id = <16 hex digits>
///   seed = <u64>
///   <every config key = value line>
///   segment = <first_trial> <trial_count> <theta1_mdeg> <theta2_mdeg> <tau_ns>
///   [events]
///   <trial_index>,<time_ns>,<detector>,<theta1_mdeg>,<theta2_mdeg>,<tau_ns>
///
/// Angles are integer millidegrees and times integer nanoseconds, so the text
/// is byte-stable across platforms.
void write_event_log(std::ostream& out, const EventLog& log);
std::string to_text(const EventLog& log);

/// Throws DataError with a line number on corrupt records, on an unsupported
/// format_version, or when events are not sorted by time.
EventLog read_event_log(std::istream& in);
EventLog load_event_log(const std::string& path);

/// Writes to `path` via a temporary file and rename, so a failed write never
/// leaves a partial file behind.
void write_file_atomically(const std::string& path, const std::string& contents);

}  // namespace dlcz
