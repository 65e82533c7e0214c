// Copyright 2026 The ARL Lab Authors.
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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "arl/checkpoint.hpp"
#include "arl/commands.hpp"
#include "arl/config.hpp"

using namespace arl;
using namespace arl::cli;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("arl_cli_test_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv(kOutputRootEnv);
  }
  void TearDown() override {
    unsetenv(kOutputRootEnv);
    fs::remove_all(dir_);
  }

  fs::path write_config(const std::string& name, const std::string& body) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << body << "run.output = " << (dir_ / "out").string() << "\n";
    return p;
  }

  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  int run(const std::string& command, const fs::path& cfg, std::vector<std::string> overrides = {}) {
    std::vector<std::string> args{command, cfg.string()};
    args.insert(args.end(), overrides.begin(), overrides.end());
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

const char* kSmall =
    "synth.classes = 3\n"
    "synth.samples_per_class = 20\n"
    "synth.dims = 4, 3\n"
    "synth.noise = 0.5, 1.5\n"
    "model.hidden = 8\n"
    "model.rep_dim = 4\n"
    "optim.lr = 0.01\n"
    "optim.epochs = 2\n"
    "optim.batch_size = 16\n";

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

std::size_t line_count(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST(ConfigTest, ParsesKeysCommentsAndLists) {
  const RunConfig cfg = parse_config(
      "# comment\n"
      "synth.dims = 5, 7   # trailing comment\n"
      "synth.noise = 0.1, 0.2\n"
      "model.rep_dim = 6, 4\n"
      "strategy.kind = balanced\n"
      "strategy.gr = off\n"
      "run.seeds = 3, 1\n"
      "theory.variance_pairs = 1:4, 2:3\n");
  ASSERT_TRUE(cfg.synth.has_value());
  EXPECT_EQ(cfg.synth->dims, (std::vector<std::size_t>{5, 7}));
  EXPECT_EQ(cfg.model_config().rep_dims, (std::vector<std::size_t>{6, 4}));
  EXPECT_EQ(cfg.strategy.kind, StrategyKind::balanced);
  EXPECT_FALSE(cfg.strategy.arl.use_gr);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 1}));
  EXPECT_EQ(cfg.theory.variance_pairs, (std::vector<ValuePair>{{1, 4}, {2, 3}}));
}

TEST(ConfigTest, DefaultsToSyntheticDataAndSharedRepWidth) {
  const RunConfig cfg = parse_config("");
  ASSERT_TRUE(cfg.synth.has_value());
  EXPECT_FALSE(cfg.csv.has_value());
  EXPECT_EQ(cfg.model_config().rep_dims, (std::vector<std::size_t>{16, 16}));
  EXPECT_EQ(cfg.strategy.arl.gamma, 4.0);
  EXPECT_EQ(cfg.optim.momentum, 0.9);
}

TEST(ConfigTest, DiagnosticsNameTheLine) {
  try {
    parse_config("optim.lr = 0.1\nstrategy.gama = 3\noptim.epochs = many\njunk\n", "my.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    ASSERT_EQ(e.diagnostics().size(), 3u) << e.what();
    EXPECT_TRUE(contains(e.diagnostics()[0], "my.cfg:2")) << e.what();
    EXPECT_TRUE(contains(e.diagnostics()[0], "strategy.gama"));
    EXPECT_TRUE(contains(e.diagnostics()[1], "my.cfg:3"));
    EXPECT_TRUE(contains(e.diagnostics()[2], "my.cfg:4"));
  }
}

TEST(ConfigTest, RangeViolationsPointAtTheKey) {
  try {
    parse_config("optim.epochs = 3\noptim.lr = -1\n", "c");
    FAIL();
  } catch (const ConfigError& e) {
    ASSERT_EQ(e.diagnostics().size(), 1u);
    EXPECT_TRUE(contains(e.diagnostics()[0], "c:2 (optim.lr)")) << e.what();
  }
  EXPECT_THROW(parse_config("synth.dims = 4, 4\nsynth.noise = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("model.fusion = gated\nmodel.rep_dim = 4, 5\n"), ConfigError);
  EXPECT_THROW(parse_config("run.seeds =\n"), ConfigError);
}

TEST(ConfigTest, BothDataSourcesConflict) {
  try {
    parse_config("synth.seed = 1\ncsv.train = a.csv\ncsv.test = b.csv\n", "c");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(contains(e.what(), "conflicting data sources")) << e.what();
    EXPECT_TRUE(contains(e.what(), "c:1 (synth.seed)"));
    EXPECT_TRUE(contains(e.what(), "c:2 (csv.train)"));
  }
}

TEST(ConfigTest, OverridesWinLastOneWins) {
  const std::vector<std::string> overrides{"strategy.gamma=0", "optim.epochs = 7", "optim.epochs=9"};
  const RunConfig cfg = parse_config("strategy.gamma = 4\noptim.epochs = 2\n", "c", overrides);
  EXPECT_EQ(cfg.strategy.arl.gamma, 0.0);
  EXPECT_EQ(cfg.optim.epochs, 9u);
  const std::vector<std::string> bad{"optim.epochs"};
  try {
    parse_config("", "c", bad);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(contains(e.what(), "override 1")) << e.what();
  }
}

TEST(ConfigTest, SweepAxes) {
  const RunConfig cfg = parse_config("sweep.T = 1, 2, 4\nsweep.gamma = 0, 4\nsweep.model.fusion = concat, gated\n",
                                     "c", std::vector<std::string>{"sweep.T=8"});
  ASSERT_EQ(cfg.sweep.size(), 3u);
  EXPECT_EQ(cfg.sweep[0].name, "T");
  EXPECT_EQ(cfg.sweep[0].key, "strategy.temperature");
  EXPECT_EQ(cfg.sweep[0].values, (std::vector<std::string>{"8"}));
  EXPECT_EQ(cfg.sweep[1].key, "strategy.gamma");
  EXPECT_EQ(cfg.sweep[2].key, "model.fusion");
  EXPECT_THROW(parse_config("sweep.T = 1, x\n"), ConfigError);
  EXPECT_THROW(parse_config("sweep.nothing = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("sweep.run.seeds = 1\n"), ConfigError);
}

TEST(ConfigTest, EchoRoundTrips) {
  const std::vector<std::string> sources{
      "",
      kSmall,
      "csv.train = tr.csv\ncsv.test = te.csv\ncsv.dims = 3, 2\ncsv.classes = 2\nmodel.hidden =\n",
      "strategy.kind = vanilla\nstrategy.temperature = 0.1\noptim.lr = 3e-4\nsweep.gamma = 0, 0.5\n"
      "theory.bias_pairs = -1:2, 0.1:0.30000000000000004\nstrategy.ema = yes\n",
  };
  for (const std::string& src : sources) {
    const RunConfig cfg = parse_config(src);
    const std::string echo = echo_config(cfg);
    const RunConfig again = parse_config(echo, "echo");
    EXPECT_EQ(again, cfg) << echo;
    EXPECT_EQ(echo_config(again), echo);
  }
}

TEST(ConfigTest, EchoListsEveryDefault) {
  const std::string echo = echo_config(parse_config(""));
  for (const char* key : {"synth.classes", "synth.samples_per_class", "synth.dims", "synth.noise",
                          "synth.separation", "synth.seed", "model.hidden", "model.rep_dim", "model.fusion",
                          "strategy.kind", "strategy.gamma", "strategy.temperature", "strategy.entropy_floor",
                          "strategy.ur", "strategy.al", "strategy.gr", "strategy.ema", "strategy.ema_decay",
                          "optim.lr", "optim.momentum", "optim.weight_decay", "optim.epochs", "optim.batch_size",
                          "run.seeds", "run.output", "theory.cases", "theory.samples", "theory.grid_step",
                          "theory.variance_min", "theory.variance_max", "theory.seed"}) {
    EXPECT_TRUE(contains(echo, std::string(key) + " = ")) << key;
  }
}

TEST_F(CliTest, TrainWritesReportsAndCheckpoints) {
  const fs::path cfg = write_config("train.cfg", kSmall);
  ASSERT_EQ(run("train", cfg), kExitOk) << err_.str();
  const fs::path out = dir_ / "out";
  for (const char* f : {"effective.cfg", "summary.json", "seed-0/epochs.jsonl", "seed-0/steps.jsonl",
                        "seed-0/summary.json", "seed-0/checkpoint.bin"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const std::string epochs = read(out / "seed-0/epochs.jsonl");
  EXPECT_EQ(line_count(epochs), 2u);
  const auto epoch = nlohmann::json::parse(epochs.substr(0, epochs.find('\n')));
  EXPECT_EQ(epoch["epoch"], 1);
  EXPECT_TRUE(epoch.contains("d_ratio") && epoch.contains("q_ratio") && epoch.contains("a"));

  const RunConfig effective = load_config(out / "effective.cfg");
  EXPECT_EQ(effective, resolve_config(cfg, {}));
  const ModelParams params = load_model(out / "seed-0/checkpoint.bin", effective.model_config());
  EXPECT_EQ(params.config, effective.model_config());
}

TEST_F(CliTest, CrossSeedSummary) {
  const fs::path cfg = write_config("train.cfg", std::string(kSmall) + "run.seeds = 1, 2\n");
  ASSERT_EQ(run("train", cfg, {"strategy.gamma=0"}), kExitOk) << err_.str();
  const auto summary = nlohmann::json::parse(read(dir_ / "out/summary.json"));
  EXPECT_EQ(summary["config"]["strategy.gamma"], "0");
  ASSERT_EQ(summary["runs"].size(), 2u);
  const double a1 = summary["runs"][0]["test_accuracy"];
  const double a2 = summary["runs"][1]["test_accuracy"];
  EXPECT_NEAR(summary["test_accuracy"]["mean"].get<double>(), (a1 + a2) / 2, 1e-12);
  EXPECT_NEAR(summary["test_accuracy"]["std"].get<double>(), std::abs(a1 - a2) / std::sqrt(2.0), 1e-12);
  EXPECT_TRUE(fs::exists(dir_ / "out/seed-2/checkpoint.bin"));
}

TEST_F(CliTest, ConflictingSourcesExitTwo) {
  const fs::path cfg = write_config("bad.cfg", std::string(kSmall) + "csv.train = x.csv\n");
  EXPECT_EQ(run("train", cfg), kExitBadConfig);
  EXPECT_TRUE(contains(err_.str(), "conflicting data sources")) << err_.str();
}

TEST_F(CliTest, NanAbortExitsThree) {
  const fs::path cfg = write_config("nan.cfg", kSmall);
  EXPECT_EQ(run("train", cfg, {"optim.lr=1e12", "optim.epochs=20"}), kExitNanAbort);
  EXPECT_TRUE(contains(err_.str(), "iteration")) << err_.str();
}

TEST_F(CliTest, OutputRootFromEnvironment) {
  const fs::path cfg = write_config("train.cfg", kSmall);
  const fs::path root = dir_ / "elsewhere";
  setenv(kOutputRootEnv, root.c_str(), 1);
  ASSERT_EQ(run("train", cfg), kExitOk) << err_.str();
  EXPECT_TRUE(fs::exists(root / "seed-0/epochs.jsonl"));
  EXPECT_FALSE(fs::exists(dir_ / "out"));
  EXPECT_EQ(load_config(root / "effective.cfg").output, root.string());
}

TEST_F(CliTest, TrainFromCsv) {
  SynthSpec spec;
  spec.num_classes = 2;
  spec.samples_per_class = 20;
  spec.dims = {3, 2};
  spec.noise = {0.5, 1.0};
  const SplitDataset data = generate_synthetic(spec);
  write_csv(dir_ / "train.csv", data.train);
  write_csv(dir_ / "test.csv", data.test);
  const fs::path cfg = write_config("csv.cfg", "csv.train = " + (dir_ / "train.csv").string() +
                                                   "\ncsv.test = " + (dir_ / "test.csv").string() +
                                                   "\ncsv.dims = 3, 2\ncsv.classes = 2\noptim.epochs = 1\n");
  EXPECT_EQ(run("train", cfg), kExitOk) << err_.str();
  EXPECT_EQ(run("train", cfg, {"csv.test=" + (dir_ / "missing.csv").string()}), kExitFailure);
}

TEST_F(CliTest, TheoryReport) {
  const fs::path cfg = write_config(
      "theory.cfg", "theory.samples = 20000\ntheory.variance_pairs = 1:4\ntheory.bias_pairs = -1:2, 1:1, 2:3\n");
  ASSERT_EQ(run("theory", cfg), kExitOk) << err_.str();
  const auto report = nlohmann::json::parse(read(dir_ / "out/theory.json"));
  ASSERT_EQ(report["variance_cases"].size(), 21u);
  const auto& first = report["variance_cases"][0];
  EXPECT_NEAR(first["closed_form"][0].get<double>(), 0.8, 1e-12);
  EXPECT_NEAR(first["closed_form"][1].get<double>(), 0.2, 1e-12);
  for (const auto& c : report["variance_cases"]) {
    EXPECT_LE(c["delta"].get<double>(), c["tolerance"].get<double>());
  }
  EXPECT_EQ(report["bias_cases"][0]["feasible"], true);
  EXPECT_EQ(report["bias_cases"][1]["status"], "skipped");
  EXPECT_TRUE(report["bias_cases"][1].contains("reason"));
  EXPECT_EQ(report["bias_cases"][2]["feasible"], false);
  EXPECT_EQ(report["all_agree"], true);
}

TEST_F(CliTest, SweepCountsColumnsAndDeterminism) {
  const fs::path cfg = write_config("sweep.cfg", std::string(kSmall) +
                                                     "optim.epochs = 1\nrun.seeds = 0, 1, 2\n"
                                                     "sweep.T = 1, 2, 4, 8\nsweep.gamma = 0, 4\n");
  ASSERT_EQ(run("sweep", cfg), kExitOk) << err_.str();
  const std::string results = read(dir_ / "out/sweep_results.csv");
  const std::string summary = read(dir_ / "out/sweep_summary.csv");
  EXPECT_EQ(line_count(results), 1u + 24u);
  EXPECT_EQ(line_count(summary), 1u + 8u);
  EXPECT_EQ(results.substr(0, results.find('\n')), "T,gamma,seed,status,acc,macro_f1,final_d_ratio,final_q_ratio");
  EXPECT_TRUE(contains(results, "\n8,4,2,ok,"));

  ASSERT_EQ(run("sweep", cfg), kExitOk);
  EXPECT_EQ(read(dir_ / "out/sweep_results.csv"), results);
  EXPECT_EQ(read(dir_ / "out/sweep_summary.csv"), summary);
}

TEST_F(CliTest, SweepRecordsFailedCellsAndContinues) {
  const fs::path cfg =
      write_config("sweep.cfg", std::string(kSmall) + "optim.epochs = 1\nsweep.T = -1, 2\n");
  EXPECT_EQ(run("sweep", cfg), kExitFailure);
  const std::string results = read(dir_ / "out/sweep_results.csv");
  EXPECT_TRUE(contains(results, "\n-1,0,error,")) << results;
  EXPECT_TRUE(contains(results, "\n2,0,ok,")) << results;
}

TEST_F(CliTest, Usage) {
  std::ostringstream out, err;
  EXPECT_EQ(run_cli(std::vector<std::string>{}, out, err), kExitBadConfig);
  EXPECT_EQ(run_cli(std::vector<std::string>{"--help"}, out, err), kExitOk);
  EXPECT_EQ(run("evaluate", dir_ / "x.cfg"), kExitBadConfig);
  EXPECT_EQ(run("train", dir_ / "missing.cfg"), kExitBadConfig);
}
