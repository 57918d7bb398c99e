#include "dlcz/errors.hpp"
#include "dlcz/event_log.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dlcz;

namespace {

EventLog sample_log() {
  ExperimentConfig c;
  c.windows = 5;
  c.optics.p_excitation = 0.05;
  c.optics.eta1 = 0.5;
  c.optics.eta2_base = 0.5;
  return simulate_run(c, 11);
}

std::string header_only() {
  std::string text = to_text(sample_log());
  return text.substr(0, text.find("[events]"));
}

void expect_data_error(const std::string& text, const std::string& fragment) {
  std::istringstream in(text);
  try {
    read_event_log(in);
    FAIL() << "expected DataError containing '" << fragment << "'";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(EventLogText, RoundTripIsExact) {
  const EventLog log = sample_log();
  ASSERT_FALSE(log.events.empty());
  const std::string text = to_text(log);
  std::istringstream in(text);
  const EventLog back = read_event_log(in);
  EXPECT_EQ(back.events, log.events);
  EXPECT_EQ(back.segments, log.segments);
  EXPECT_EQ(back.seed, log.seed);
  EXPECT_EQ(back.run_id, log.run_id);
  EXPECT_EQ(to_config_text(back.config), to_config_text(log.config));
  EXPECT_EQ(to_text(back), text);
}

TEST(EventLogText, RejectsOtherFormatVersions) {
  std::string text = to_text(sample_log());
  text.replace(0, text.find('\n'), "format_version = 2");
  expect_data_error(text, "format_version");
}

TEST(EventLogText, CorruptRecordReportsLine) {
  const std::string head = header_only();
  const int lines = static_cast<int>(std::count(head.begin(), head.end(), '\n'));
  expect_data_error(head + "[events]\n1,100,T1,0,0,0\nnot,a,record\n",
                    "line " + std::to_string(lines + 3));
  expect_data_error(head + "[events]\n1,100,Q7,0,0,0\n", "unknown detector");
  expect_data_error(head + "[events]\n1,10x,T1,0,0,0\n", "time_ns");
}

TEST(EventLogText, RejectsUnsortedEvents) {
  expect_data_error(header_only() + "[events]\n2,200,T1,0,0,0\n1,100,T1,0,0,0\n", "not sorted");
}

TEST(EventLogText, RequiresHeaderAndEventsSection) {
  expect_data_error(header_only(), "missing [events]");
  expect_data_error("[events]\n", "format_version");
  expect_data_error(header_only() + "bogus header line\n[events]\n", "key = value");
}

TEST(EventLogFile, AtomicWriteLeavesNoTemporary) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dlcz_event_log_test";
  fs::remove_all(dir);
  const std::string path = (dir / "sub" / "run.log").string();
  const EventLog log = sample_log();
  write_file_atomically(path, to_text(log));
  EXPECT_TRUE(fs::exists(path));
  EXPECT_FALSE(fs::exists(path + ".tmp"));
  EXPECT_EQ(load_event_log(path).events, log.events);
  EXPECT_THROW(load_event_log((dir / "missing.log").string()), DataError);
  fs::remove_all(dir);
}
