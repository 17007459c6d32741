#include <gtest/gtest.h>
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tensorad/dataset_io.hpp"

#ifndef TENSORAD_CLI
#error "TENSORAD_CLI must name the command-line binary"
#endif

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(TENSORAD_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p) != nullptr) r.output += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tensorad_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string at(const std::string& name) const { return (dir_ / name).string(); }

  // Every file of `a` exists in `b` with the same bytes, `skip` aside.
  void expect_same_files(const std::string& a, const std::string& b, const std::set<std::string>& skip = {}) const {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      const auto name = e.path().filename().string();
      if (skip.count(name)) continue;
      ++n;
      EXPECT_EQ(slurp(e.path()), slurp(fs::path(b) / name)) << name << " differs between runs";
    }
    EXPECT_GT(n, 0u);
  }

  fs::path dir_;
};

TEST_F(Cli, TinyDatasetParsesWithExpectedRowCount) {
  const auto r = run("generate --out " + at("gen") + " --users 2 --days 2 --q 0.5");
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"traffic.csv", "attacks.csv", "infected.csv", "labels.csv", "config.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "gen" / f)) << f;
  }
  std::ifstream a(at("gen/attacks.csv")), i(at("gen/infected.csv")), t(at("gen/traffic.csv"));
  const auto gt = tensorad::io::read_ground_truth(a, i);
  const auto days = tensorad::io::read_traffic(t, gt);
  EXPECT_EQ(days.size(), 4u);
  std::ifstream t2(at("gen/traffic.csv"));
  std::size_t lines = 0;
  for (std::string s; std::getline(t2, s);) ++lines;
  EXPECT_EQ(lines - 1, 2u * 2u * 1440u * 4u);
}

TEST_F(Cli, GenerateIsByteIdenticalOnRerun) {
  for (const char* kind : {"traffic", "qos"}) {
    const std::string args = std::string(" --kind ") + kind + " --users 6 --days 2 --q 0.2 --seed 7";
    ASSERT_EQ(run("generate --out " + at(std::string(kind) + "1") + args).code, 0);
    ASSERT_EQ(run("generate --out " + at(std::string(kind) + "2") + args).code, 0);
    expect_same_files(at(std::string(kind) + "1"), at(std::string(kind) + "2"));
  }
}

TEST_F(Cli, ConfigFileReplaysRun) {
  ASSERT_EQ(run("generate --out " + at("a") + " --users 3 --days 2 --q 0.4 --seed 3").code, 0);
  const auto r = run("generate --out " + at("b") + " --config " + at("a/config.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  expect_same_files(at("a"), at("b"));
}

TEST_F(Cli, HelpListsAllFlags) {
  const std::map<std::string, std::vector<std::string>> flags = {
      {"generate", {"--out", "--config", "--kind", "--users", "--days", "--seed", "--q", "--mu", "--sd-duration",
                    "--attacks-per-day", "--pkt-rate", "--regions", "--aggs", "--events", "--no-background"}},
      {"fit", {"--data", "--rank", "--days", "--max-iters", "--tol", "--seed"}},
      {"validate-rank", {"--data", "--ranks", "--days", "--threshold", "--starts", "--repetitions"}},
      {"stream", {"--data", "--mode", "--window", "--rank", "--start-day", "--steps", "--users"}},
      {"detect", {"--data", "--mode", "--tr1-days", "--tr2-days", "--rank", "--window", "--trees", "--min-leaf",
                  "--max-negatives", "--threads", "--q", "--p-d", "--p-fp", "--p-rc", "--sync-model"}},
      {"cluster", {"--data", "--rank", "--k", "--k-min", "--k-max", "--n-init", "--theta", "--eta"}},
      {"report", {"--detect", "--cluster", "--out"}},
  };
  const auto top = run("--help");
  EXPECT_EQ(top.code, 0);
  for (const auto& [sub, fl] : flags) {
    EXPECT_NE(top.output.find(sub), std::string::npos) << sub;
    const auto r = run(sub + " --help");
    EXPECT_EQ(r.code, 0) << sub;
    for (const auto& f : fl) EXPECT_NE(r.output.find(f), std::string::npos) << sub << " " << f;
  }
}

TEST_F(Cli, InvalidConfigNamesTheField) {
  auto r = run("generate --out " + at("x") + " --q 1.5");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("'q'"), std::string::npos) << r.output;

  std::ofstream(at("bad.json")) << R"({"days": 2, "attack-rate": 3})";
  r = run("generate --out " + at("y") + " --config " + at("bad.json"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("'attack-rate'"), std::string::npos) << r.output;

  std::ofstream(at("bad2.json")) << R"({"days": "many"})";
  r = run("generate --out " + at("z") + " --config " + at("bad2.json"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("'days'"), std::string::npos) << r.output;

  r = run("detect --out " + at("w") + " --data " + at("nowhere"));
  EXPECT_EQ(r.code, 2) << r.output;
  ASSERT_EQ(run("generate --out " + at("g") + " --users 4 --days 3 --q 0.25").code, 0);
  r = run("detect --out " + at("v") + " --data " + at("g") + " --tr1-days 1 --tr2-days 1");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("'q'"), std::string::npos) << r.output;
  r = run("frobnicate");
  EXPECT_EQ(r.code, 1);
}

TEST_F(Cli, SchemaViolationIsDataError) {
  ASSERT_EQ(run("generate --out " + at("g") + " --users 2 --days 2 --q 0.5").code, 0);
  std::ofstream(at("g/traffic.csv"), std::ios::app) << "u0000,down_bytes,5,-3\n";
  const auto r = run("fit --out " + at("f") + " --data " + at("g") + " --days 1");
  EXPECT_EQ(r.code, 2) << r.output;
}

TEST_F(Cli, TinyPipelineEndToEndUnderOneMinute) {
  const auto t0 = std::chrono::steady_clock::now();
  auto ok = [&](const std::string& args) {
    const auto r = run(args);
    EXPECT_EQ(r.code, 0) << args << "\n" << r.output;
  };
  const std::string gen = at("gen"), data = " --data " + gen;
  ok("generate --out " + gen + " --users 8 --days 5 --q 0.25 --attacks-per-day 3");
  ok("fit --out " + at("fit") + data + " --days 1");
  ok("validate-rank --out " + at("rank") + data + " --days 1 --ranks 1,2");
  ok("stream --out " + at("st") + data + " --mode both --window 60 --steps 20 --start-day 1");
  ok("detect --out " + at("det") + data + " --tr1-days 1 --tr2-days 2 --trees 10 --q 0.25");
  ok("detect --out " + at("det2") + data + " --tr1-days 1 --tr2-days 2 --trees 10 --q 0.25");
  ok("generate --kind qos --out " + at("q") + " --users 12 --days 3");
  ok("cluster --out " + at("cl") + " --data " + at("q") + " --k 0 --k-max 6");
  ok("report --out " + at("rep") + " --detect " + at("det") + " --cluster " + at("cl"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 60.0);

  for (const char* f : {"model.json", "factor_A.csv", "factor_B.csv", "factor_C.csv", "fit_history.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "fit" / f)) << f;
  }
  EXPECT_TRUE(fs::exists(dir_ / "rank" / "rank_validation.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "st" / "timing.csv"));
  for (const char* f : {"predictions.csv", "importance.csv", "gmm.json", "report.json", "sync.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "det" / f)) << f;
  }
  for (const char* f : {"assignments.csv", "clusters.csv", "regions.csv", "inertia.csv", "cluster_series.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "cl" / f)) << f;
  }
  for (const char* f : {"detection_metrics.csv", "importance_ranked.csv", "region_fractions.csv", "report.md"}) {
    EXPECT_TRUE(fs::exists(dir_ / "rep" / f)) << f;
  }
  // Identical resolved configs give identical data files; only timings may differ.
  expect_same_files(at("det"), at("det2"), {"timing.csv"});

  // Each output directory records its inputs.
  const std::string cfg = slurp(dir_ / "det" / "config.json");
  EXPECT_NE(cfg.find("\"traffic.csv\""), std::string::npos);
  EXPECT_NE(cfg.find("\"versions\""), std::string::npos);
}

}  // namespace
