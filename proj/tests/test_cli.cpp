#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include "dlcz/decoherence.hpp"
#include "dlcz/analysis.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

int count(const std::string& text, const std::string& needle) {
  int n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dlcz_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args, const std::string& env = "") {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" DLCZ_CLI_PATH "' " + args +
                            " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    fs::remove(out);
    fs::remove(err);
    return r;
  }

  fs::path config(const std::string& extra = "") {
    const fs::path p = dir_ / "run.conf";
    spit(p, "windows = 5\np_excitation = 0.02\neta1 = 0.5\neta2_base = 0.5\nbg2 = 0.0001\n" + extra);
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateIsDeterministic) {
  const auto cfg = config();
  const Result a = run("simulate --config " + cfg.string() + " --seed 1 --out a.log");
  const Result b = run("--threads 1 simulate --config " + cfg.string() + " --seed 1 --out b.log");
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(slurp(dir_ / "a.log"), slurp(dir_ / "b.log"));
  EXPECT_NE(slurp(dir_ / "a.log").find("[events]"), std::string::npos);
  ASSERT_TRUE(fs::exists(dir_ / "manifest.jsonl"));
  const std::string manifest = slurp(dir_ / "manifest.jsonl");
  EXPECT_EQ(count(manifest, "\n"), 2);
  EXPECT_NE(manifest.find("\"seed\":1"), std::string::npos);
  EXPECT_NE(manifest.find("a.log"), std::string::npos);
  for (const auto& e : fs::directory_iterator(dir_)) {
    EXPECT_NE(e.path().extension(), ".tmp") << e.path();
  }
}

TEST_F(Cli, DefaultOutputDirectoryFromEnvironment) {
  const auto cfg = config();
  const Result r = run("simulate --config " + cfg.string() + " --seed 2", "DLCZ_OUT_DIR=outdir");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string path = r.out.substr(0, r.out.find('\n'));
  EXPECT_TRUE(std::regex_match(path, std::regex("outdir/run_[0-9a-f]{16}\\.log"))) << path;
  EXPECT_TRUE(fs::exists(dir_ / path));
  EXPECT_TRUE(fs::exists(dir_ / "outdir" / "manifest.jsonl"));
}

TEST_F(Cli, AnalyzeChshLog) {
  ASSERT_EQ(run("simulate --config " + config().string() + " --seed 3 --out c.log").code, 0);
  const Result r = run("analyze c.log");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("# source = ", 0), 0u);
  // Four canonical settings plus the (0, 0) reference, one S per tau.
  EXPECT_EQ(count(r.out, "[E]\n"), 5);
  EXPECT_EQ(count(r.out, "[S]\n"), 1);
  EXPECT_EQ(count(r.out, "[g12]\n"), 5);
  for (const char* setting : {"theta1_deg = -22.5\ntheta2_deg = 0\n", "theta1_deg = 22.5\ntheta2_deg = 0\n",
                              "theta1_deg = -22.5\ntheta2_deg = 45\n", "theta1_deg = 22.5\ntheta2_deg = 45\n"}) {
    EXPECT_NE(r.out.find(std::string("[E]\n") + setting), std::string::npos) << setting;
  }
  EXPECT_NE(r.out.find("violation_sigmas = "), std::string::npos);

  const Result t = run("--window 100 analyze c.log --table --out g.tsv");
  ASSERT_EQ(t.code, 0) << t.err;
  const std::string table = slurp(dir_ / "g.tsv");
  EXPECT_NE(table.find("gbar\tsigma_gbar\n"), std::string::npos);
  EXPECT_EQ(count(table, "\n"), 7);
}

TEST_F(Cli, AnalyzeEmptyLogReportsNoGroups) {
  const auto cfg = config("p_excitation = 0\n");
  std::string text = slurp(cfg);
  text.replace(text.find("p_excitation = 0.02\n"), 20, "");
  text.replace(text.find("bg2 = 0.0001\n"), 13, "bg2 = 0\n");
  spit(cfg, text);
  ASSERT_EQ(run("simulate --config run.conf --seed 1 --out empty.log").code, 0);
  const Result r = run("analyze empty.log");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("status = no groups"), std::string::npos) << r.out;
}

TEST_F(Cli, ExitCodes) {
  spit(dir_ / "bad.conf", "tau = 5\n");
  Result r = run("simulate --config bad.conf");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("tau"), std::string::npos) << r.err;
  EXPECT_EQ(run("simulate").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("--window 0 analyze x.log").code, 2);
  EXPECT_EQ(run("sweep --config " + config().string() + " --axis tau=1,2").code, 2);

  EXPECT_EQ(run("analyze missing.log").code, 3);
  spit(dir_ / "v2.log", "format_version = 2\n[events]\n");
  r = run("analyze v2.log");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("format_version"), std::string::npos);
  ASSERT_EQ(run("simulate --config " + config().string() + " --seed 3 --out c.log").code, 0);
  std::string log = slurp(dir_ / "c.log");
  log += "garbage\n";
  spit(dir_ / "c.log", log);
  r = run("analyze c.log");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("line "), std::string::npos) << r.err;

  spit(dir_ / "few.tsv", "gbar\tS\tsigma_S\n3\t1\t0.1\n");
  EXPECT_EQ(run("fit few.tsv --model smax").code, 3);
  EXPECT_EQ(run("fit few.tsv --model nope").code, 2);
}

TEST_F(Cli, FitNoiselessTables) {
  std::string smax = "gbar\tS\tsigma_S\n";
  for (double g : {3.0, 6.0, 12.0, 30.0, 60.0}) {
    smax += std::to_string(g) + "\t" + std::to_string(dlcz::s_from_g12(2.74, g)) + "\t0\n";
  }
  spit(dir_ / "s.tsv", smax);
  Result r = run("fit s.tsv --model smax");
  ASSERT_EQ(r.code, 0) << r.err;
  std::smatch m;
  ASSERT_TRUE(std::regex_search(r.out, m, std::regex("smax = ([0-9.eE+-]+)")));
  EXPECT_NEAR(std::stod(m[1]), 2.74, 1e-5);

  std::ostringstream decay;
  decay.precision(17);
  decay << "tau_us\tg12_a\tsigma_g12_a\tg12_b\tsigma_g12_b\n";
  const auto& table = dlcz::cesium_coherence_table();
  for (double tau : {0.4, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0, 21.0}) {
    decay << tau << '\t' << dlcz::g12_decay_model(tau, {12.0, 40.0}, table, 1.0) << "\t0\t"
          << dlcz::g12_decay_model(tau, {12.0, 70.0}, table, 1.0) << "\t0\n";
  }
  spit(dir_ / "d.tsv", decay.str());
  r = run("fit d.tsv --model decay --out fit.txt");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string fit = slurp(dir_ / "fit.txt");
  ASSERT_TRUE(std::regex_search(fit, m, std::regex("k_khz = ([0-9.eE+-]+)")));
  EXPECT_NEAR(std::stod(m[1]), 12.0, 1e-4);
  ASSERT_TRUE(std::regex_search(fit, m, std::regex("xi_b = ([0-9.eE+-]+)")));
  EXPECT_NEAR(std::stod(m[1]), 70.0, 1e-3);
  EXPECT_TRUE(fs::exists(dir_ / "manifest.jsonl"));
}

TEST_F(Cli, FitFailureExitsFour) {
  // Weights this large overflow every residual.
  std::string decay = "tau_us\tg12_a\tsigma_g12_a\tg12_b\tsigma_g12_b\n";
  for (double tau : {0.4, 3.0, 6.0, 9.0}) {
    decay += std::to_string(tau) + "\t1e308\t1e-308\t1e308\t1e-308\n";
  }
  spit(dir_ / "bad.tsv", decay);
  const Result r = run("fit bad.tsv --model decay");
  EXPECT_EQ(r.code, 4) << r.err;
}

TEST_F(Cli, SweepAndReport) {
  spit(dir_ / "sweep.conf", "windows = 20\np_excitation = 0.03\nanalyzer = chsh\neta1 = 0.5\neta2_base = 0.5\nbg2 = 0.0001\n");
  Result r = run("sweep --config sweep.conf --axis p_excitation=0.01,0.03,0.1 --seed 4 --out t/p.tsv");
  ASSERT_EQ(r.code, 0) << r.err;
  r = run("sweep --config sweep.conf --axis 'tau=0.4,5,10,15,21 us' --seed 4 --out t/tau.tsv");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string p = slurp(dir_ / "t" / "p.tsv");
  EXPECT_EQ(p.rfind("# manifest = ", 0), 0u);
  EXPECT_NE(p.find("# axis = p_excitation"), std::string::npos);

  r = run("report t");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"s_vs_gbar_p.tsv", "s_vs_tau_tau.tsv", "g12_vs_tau_tau.tsv", "model_vs_tau_tau.tsv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "t" / "report" / name)) << name;
  }
  const std::string first = slurp(dir_ / "t" / "report" / "model_vs_tau_tau.tsv");
  EXPECT_EQ(count(first, "\n"), 103);
  ASSERT_EQ(run("report t --out again").code, 0);
  EXPECT_EQ(slurp(dir_ / "again" / "model_vs_tau_tau.tsv"), first);
  EXPECT_EQ(slurp(dir_ / "again" / "s_vs_gbar_p.tsv"), slurp(dir_ / "t" / "report" / "s_vs_gbar_p.tsv"));

  fs::create_directories(dir_ / "empty");
  EXPECT_EQ(run("report empty").code, 3);
}
