// Copyright 2026 The chunkflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

#include <gtest/gtest.h>

#include "chunkflow/errors.h"
#include "chunkflow/harness.h"

namespace chunkflow {
namespace fs = std::filesystem;
namespace {

// Fresh scratch directory named after the running test.
fs::path ScratchDir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path dir = fs::temp_directory_path() / "chunkflow_tests" /
                       (std::string(info->test_suite_name()) + "." + info->name());
  fs::remove_all(dir);
  return dir;
}

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ResultRow Row(GuidanceMethod m, int delay, std::string suite, uint64_t seed,
              EpisodeMetrics metrics) {
  return ResultRow{m, delay, std::move(suite), seed, metrics};
}

TEST(Config, BetaFollowsStepCountUnlessOverridden) {
  ExperimentConfig c;
  EXPECT_EQ(CellGuidance(c, GuidanceMethod::kPotr).beta, 10.0);
  c.guidance.n = 20;
  EXPECT_EQ(CellGuidance(c, GuidanceMethod::kRtc).beta, 20.0);
  c.beta_override = 5.0;
  EXPECT_EQ(CellGuidance(c, GuidanceMethod::kPc).beta, 5.0);
  EXPECT_EQ(CellGuidance(c, GuidanceMethod::kPc).method, GuidanceMethod::kPc);
}

TEST(Config, Defaults) {
  const ExperimentConfig c;
  EXPECT_EQ(c.delays, (std::vector<int>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(c.episodes_per_cell, 50);
  EXPECT_EQ(c.guidance.sigma_d, 0.4);
  EXPECT_EQ(c.guidance.rho, 0.5);
  EXPECT_EQ(c.guidance.n, 10);
  EXPECT_EQ(c.guidance.epsilon, 1e-8);
  EXPECT_EQ(c.variants.size(), 2u);
}

TEST(Config, Validation) {
  const auto invalid = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    EXPECT_THROW(ValidateExperimentConfig(c), StructuralError);
  };
  invalid([](ExperimentConfig& c) { c.methods.clear(); });
  invalid([](ExperimentConfig& c) {
    c.methods = {GuidanceMethod::kPc, GuidanceMethod::kPc};
  });
  invalid([](ExperimentConfig& c) { c.delays = {10}; });
  invalid([](ExperimentConfig& c) { c.delays = {-1}; });
  invalid([](ExperimentConfig& c) { c.episodes_per_cell = 0; });
  invalid([](ExperimentConfig& c) { c.guidance.sigma_d = 0; });
  invalid([](ExperimentConfig& c) { c.mask_decay = 0; });
  invalid([](ExperimentConfig& c) { c.replan_override = 11; });
  invalid([](ExperimentConfig& c) { c.variants[1].id = "unimodal"; });
  invalid([](ExperimentConfig& c) { c.variants[0].weight = 0; });
}

TEST(Seeds, MethodIndependentAndDistinct) {
  std::set<uint64_t> seen;
  for (int d = 0; d < 6; ++d) {
    for (int v = 0; v < 2; ++v) {
      for (int e = 0; e < 50; ++e) {
        EXPECT_TRUE(seen.insert(EpisodeSeed(0, d, v, e)).second);
      }
    }
  }
  EXPECT_NE(EpisodeSeed(0, 1, 0, 0), EpisodeSeed(1, 1, 0, 0));
}

TEST(Sweep, SingleUndelayedEpisode) {
  ExperimentConfig c;
  c.methods = {GuidanceMethod::kNaive};
  c.delays = {0};
  c.variants = {UnimodalVariant()};
  c.episodes_per_cell = 1;
  const SweepResult r = RunSweep(c);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.rows[0].metrics.l2_mean));
  const auto summary = EmitSummary(r.rows, SuiteWeights(c));
  EXPECT_TRUE(
      summary["per_delay"]["naive"]["0"]["excluded_from_aggregate"].get<bool>());
  EXPECT_EQ(summary["excluded_delays"], nlohmann::json::array({0}));
}

ExperimentConfig SmallConfig() {
  ExperimentConfig c;
  c.variants = {BimodalVariant()};
  c.episodes_per_cell = 10;
  return c;
}

TEST(Sweep, CardinalityOrderAndPairing) {
  const ExperimentConfig c = SmallConfig();
  const SweepResult r = RunSweep(c);
  ASSERT_EQ(r.rows.size(), 240u);
  EXPECT_EQ(r.schedule_overruns, 0);
  std::set<std::tuple<GuidanceMethod, int, std::string, uint64_t>> keys;
  for (const auto& row : r.rows) {
    EXPECT_TRUE(keys.insert({row.method, row.delay, row.suite, row.seed}).second);
  }
  for (size_t i = 1; i < r.rows.size(); ++i) {
    const auto& a = r.rows[i - 1];
    const auto& b = r.rows[i];
    EXPECT_LE(std::make_tuple(a.method, a.delay), std::make_tuple(b.method, b.delay));
  }
  // Every method sees the same seed list at each delay.
  for (size_t i = 0; i < 60; ++i) {
    for (size_t m = 1; m < 4; ++m) {
      EXPECT_EQ(r.rows[i].seed, r.rows[i + 60 * m].seed);
      EXPECT_EQ(r.rows[i].delay, r.rows[i + 60 * m].delay);
    }
  }
}

TEST(Sweep, ThreadCountDoesNotChangeRows) {
  ExperimentConfig c = SmallConfig();
  c.delays = {2, 4};
  c.episodes_per_cell = 4;
  c.threads = 1;
  const auto serial = RunSweep(c).rows;
  c.threads = 3;
  EXPECT_EQ(RunSweep(c).rows, serial);
}

TEST(Sweep, RerunWritesByteIdenticalFiles) {
  const fs::path dir = ScratchDir();
  ExperimentConfig c = SmallConfig();
  c.episodes_per_cell = 3;
  c.output_dir = dir / "a";
  SaveSweep(c, RunSweep(c));
  c.output_dir = dir / "b";
  SaveSweep(c, RunSweep(c));
  const std::string rows = Slurp(dir / "a" / "rows.csv");
  EXPECT_FALSE(rows.empty());
  EXPECT_EQ(rows, Slurp(dir / "b" / "rows.csv"));
  EXPECT_EQ(Slurp(dir / "a" / "summary.json"), Slurp(dir / "b" / "summary.json"));
  EXPECT_EQ(rows.substr(0, rows.find('\n')), kRowsHeader);
}

TEST(Sweep, FullHorizonReplanWithoutDelayMatchesAcrossMethods) {
  ExperimentConfig c;
  c.delays = {0};
  c.episodes_per_cell = 5;
  c.replan_override = 10;
  const auto rows = RunSweep(c).rows;
  const size_t per_method = rows.size() / 4;
  for (size_t i = 0; i < per_method; ++i) {
    for (size_t m = 1; m < 4; ++m) {
      EXPECT_EQ(rows[i].metrics, rows[i + m * per_method].metrics);
    }
  }
}

TEST(Sweep, OverrunsAreCountedNotThrown) {
  ExperimentConfig c = SmallConfig();
  c.methods = {GuidanceMethod::kNaive};
  c.delays = {3};
  c.episodes_per_cell = 2;
  c.replan_override = 10;
  const SweepResult r = RunSweep(c);
  EXPECT_EQ(r.schedule_overruns, 2);
  for (const auto& row : r.rows) EXPECT_FALSE(row.metrics.success);
}

TEST(Output, UnwritableDirectoryIsIoError) {
  EXPECT_THROW(PrepareOutputDir("/proc/chunkflow_cannot_exist"), IoError);
  const fs::path dir = ScratchDir();
  fs::create_directories(dir);
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(PrepareOutputDir(dir / "file"), IoError);
  EXPECT_NO_THROW(PrepareOutputDir(dir / "nested" / "ok"));
}

TEST(RowsCsv, RoundTripIsExact) {
  const ExperimentConfig c = SmallConfig();
  ExperimentConfig small = c;
  small.episodes_per_cell = 2;
  const auto rows = RunSweep(small).rows;
  std::stringstream s;
  WriteRowsCsv(s, rows);
  EXPECT_EQ(ReadRowsCsv(s), rows);

  std::vector<ResultRow> awkward = {
      Row(GuidanceMethod::kPotr, 5, "suite_a", ~0ULL,
          {true, 17, 0.1 + 0.2, 1.0 / 3.0, 1e-300, 123456.789}),
      Row(GuidanceMethod::kRtc, 0, "b", 0,
          {false, 60, 0.0, 0.0, 0.0, 0.0})};
  std::stringstream t;
  WriteRowsCsv(t, awkward);
  EXPECT_EQ(ReadRowsCsv(t), awkward);
}

TEST(RowsCsv, RejectsMalformedInput) {
  std::stringstream bad_header("method,delay\n");
  EXPECT_THROW(ReadRowsCsv(bad_header), IoError);
  std::stringstream bad_line(std::string(kRowsHeader) +
                             "\npotr,1,unimodal,3,1,20,0.1,0.2\n");
  EXPECT_THROW(ReadRowsCsv(bad_line), IoError);
  std::stringstream bad_method(std::string(kRowsHeader) +
                               "\nfoo,1,unimodal,3,1,20,0.1,0.2,0.3,0.4\n");
  EXPECT_THROW(ReadRowsCsv(bad_method), IoError);
}

std::vector<ResultRow> SyntheticCell(GuidanceMethod m, double l2_max) {
  std::vector<ResultRow> rows;
  for (int d = 1; d <= 5; ++d) {
    rows.push_back(Row(m, d, "s", static_cast<uint64_t>(d),
                       {true, 30, 0.5, l2_max, 1.0, 2.0}));
  }
  return rows;
}

TEST(Summary, RelativeChangeVsRtc) {
  auto rows = SyntheticCell(GuidanceMethod::kRtc, 1.446);
  const auto potr = SyntheticCell(GuidanceMethod::kPotr, 1.120);
  rows.insert(rows.end(), potr.begin(), potr.end());
  const auto doc = EmitSummary(rows, {{"s", 1}});
  const double delta = doc["vs_rtc"]["potr"]["l2_max"].get<double>();
  EXPECT_NEAR(delta, -22.5, 0.05);
  EXPECT_EQ(doc["vs_rtc"]["potr"]["l2_mean"].get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(RelativeChangePercent(1.120, 1.446),
                   (1.120 - 1.446) / 1.446 * 100);
}

TEST(Summary, IdenticalMethodsGiveZeroDeltas) {
  auto rows = SyntheticCell(GuidanceMethod::kRtc, 0.8);
  const auto potr = SyntheticCell(GuidanceMethod::kPotr, 0.8);
  rows.insert(rows.end(), potr.begin(), potr.end());
  const auto doc = EmitSummary(rows, {{"s", 1}});
  for (const auto& [key, value] : doc["vs_rtc"]["potr"].items()) {
    EXPECT_EQ(value.get<double>(), 0.0) << key;
  }
}

TEST(Summary, MissingRtcOmitsDeltaWithWarning) {
  const auto rows = SyntheticCell(GuidanceMethod::kPotr, 0.8);
  std::vector<std::string> warnings;
  const auto doc = EmitSummary(rows, {{"s", 1}}, &warnings);
  EXPECT_FALSE(doc.contains("vs_rtc"));
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("RTC"), std::string::npos);
  EXPECT_TRUE(doc.contains("methods"));
}

TEST(Summary, SuitesAreEpisodeWeighted) {
  std::vector<ResultRow> rows;
  for (int d = 1; d <= 5; ++d) {
    rows.push_back(Row(GuidanceMethod::kRtc, d, "big", 1, {true, 10, 1, 1, 1, 1}));
    rows.push_back(Row(GuidanceMethod::kRtc, d, "small", 1, {false, 0, 3, 3, 3, 3}));
  }
  const auto doc = EmitSummary(rows, {{"big", 90}, {"small", 10}});
  EXPECT_NEAR(doc["methods"]["rtc"]["success"].get<double>(), 0.9, 1e-12);
  EXPECT_NEAR(doc["methods"]["rtc"]["l2_mean"].get<double>(), 1.2, 1e-12);
  EXPECT_NEAR(doc["worst_case"]["rtc"]["l2_mean"].get<double>(), 3.0, 1e-12);
  // env_steps averages successful episodes only.
  EXPECT_NEAR(doc["methods"]["rtc"]["env_steps"].get<double>(), 10.0, 1e-12);
}

TEST(Grid, SigmaOneReproducesRtcPerSeed) {
  ExperimentConfig c = SmallConfig();
  c.episodes_per_cell = 6;
  std::vector<ResultRow> grid_rows;
  const std::vector<double> grid = {1.0};
  const auto table = GridSearchSigma(c, grid, &grid_rows);
  ASSERT_EQ(table.size(), 1u);
  c.methods = {GuidanceMethod::kRtc};
  c.delays = {c.grid_delay};
  const auto rtc = RunSweep(c).rows;
  ASSERT_EQ(grid_rows.size(), rtc.size());
  for (size_t i = 0; i < rtc.size(); ++i) {
    EXPECT_EQ(grid_rows[i].seed, rtc[i].seed);
    EXPECT_EQ(grid_rows[i].metrics, rtc[i].metrics);
  }
}

TEST(Grid, UnboundedRhoReproducesPcPerSeed) {
  ExperimentConfig c = SmallConfig();
  c.episodes_per_cell = 6;
  std::vector<ResultRow> grid_rows;
  const std::vector<double> grid = {kUnboundedRadius};
  GridSearchRho(c, grid, &grid_rows);
  c.methods = {GuidanceMethod::kPc};
  c.delays = {c.grid_delay};
  const auto pc = RunSweep(c).rows;
  ASSERT_EQ(grid_rows.size(), pc.size());
  for (size_t i = 0; i < pc.size(); ++i) {
    EXPECT_EQ(grid_rows[i].metrics, pc[i].metrics);
  }
}

int CountLines(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

TEST(Grid, TableSchemas) {
  ExperimentConfig c = SmallConfig();
  c.episodes_per_cell = 1;
  std::ostringstream sigma, rho, single;
  WriteGridTable(sigma, kSigmaGridColumn, GridSearchSigma(c, kSigmaGrid));
  WriteGridTable(rho, kRhoGridColumn, GridSearchRho(c, kRhoGrid));
  const std::vector<double> one = {0.4};
  WriteGridTable(single, kSigmaGridColumn, GridSearchSigma(c, one));
  EXPECT_EQ(sigma.str().substr(0, sigma.str().find('\n')),
            "sigma_d,success,steps,l2_m,l2_M,acc,jerk");
  EXPECT_EQ(rho.str().substr(0, rho.str().find('\n')),
            "rho,success,steps,l2_m,l2_M,acc,jerk");
  EXPECT_EQ(CountLines(sigma.str()), 7);
  EXPECT_EQ(CountLines(rho.str()), 6);
  EXPECT_EQ(CountLines(single.str()), 2);
  EXPECT_NE(sigma.str().find("\n0.10,"), std::string::npos);
  EXPECT_NE(rho.str().find("\n0.75,"), std::string::npos);
}

TEST(Grid, EmptyGridRejected) {
  const ExperimentConfig c = SmallConfig();
  EXPECT_THROW(GridSearchSigma(c, std::vector<double>{}), StructuralError);
  EXPECT_THROW(GridSearchRho(c, std::vector<double>{}), StructuralError);
  EXPECT_THROW(GridSearchRho(c, std::vector<double>{-1.0}), StructuralError);
}

}  // namespace
}  // namespace chunkflow
