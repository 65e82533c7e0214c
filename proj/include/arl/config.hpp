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

#pragma once

// Run configuration for the command-line tool. The file format is one
// `key = value` per line with dotted section names; `#` starts a comment and
// lists are comma separated:
//
//   synth.noise = 0.3, 2.0
//   strategy.temperature = 4   # softmax temperature
//   sweep.T = 1, 2, 4, 8
//
// Trailing `key=value` arguments override file entries, last one wins.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "arl/data.hpp"
#include "arl/error.hpp"
#include "arl/model.hpp"
#include "arl/train.hpp"

namespace arl::cli {

// Raised for unparsable or invalid configurations; carries one diagnostic per
// problem, each prefixed with its origin (`file:line` or `override N`).
class ConfigError : public FormatError {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

struct CsvSource {
  std::string train;
  std::string test;
  std::vector<std::size_t> dims;
  std::size_t classes = 2;

  bool operator==(const CsvSource&) const = default;
};

using ValuePair = std::pair<double, double>;

struct TheoryConfig {
  std::size_t cases = 20;        // random variance pairs
  std::size_t samples = 100000;  // Monte Carlo draws per case
  double grid_step = 0.01;
  double variance_min = 0.25;
  double variance_max = 9.0;
  std::uint64_t seed = 0;
  std::vector<ValuePair> variance_pairs;  // explicit cases, run before the random ones
  std::vector<ValuePair> bias_pairs;

  bool operator==(const TheoryConfig&) const = default;
};

struct SweepAxis {
  std::string name;  // as written after `sweep.`; also the CSV column name
  std::string key;   // the configuration key it sets
  std::vector<std::string> values;

  bool operator==(const SweepAxis&) const = default;
};

struct RunConfig {
  // Exactly one data source; synthetic data is the default.
  std::optional<SynthSpec> synth;
  std::optional<CsvSource> csv;
  std::vector<std::size_t> hidden{32};
  std::vector<std::size_t> rep_dims{16};  // one entry shared by all modalities, or one each
  Fusion fusion = Fusion::concat;
  Strategy strategy;
  OptimizerConfig optim;
  std::vector<std::uint64_t> seeds{0};
  std::string output = "runs";
  TheoryConfig theory;
  std::vector<SweepAxis> sweep;

  ModelConfig model_config() const;
  // Training and test data for one run seed. Synthetic data uses
  // synth.seed + run_seed so every seed sees a fresh draw.
  SplitDataset load_data(std::uint64_t run_seed) const;

  bool operator==(const RunConfig&) const = default;
};

// Parses configuration text. `origin` names the source in diagnostics.
RunConfig parse_config(std::string_view text, std::string_view origin = "config",
                       std::span<const std::string> overrides = {});
RunConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides = {});

// Every key with its effective value, defaults included, in file order.
std::vector<std::pair<std::string, std::string>> effective_entries(const RunConfig& cfg);
// The effective configuration as parseable text.
std::string echo_config(const RunConfig& cfg);

// Applies a single key to a configuration; throws ValueError on a bad key or value.
void set_key(RunConfig& cfg, std::string_view key, std::string_view value);

std::string format_double(double v);

}  // namespace arl::cli
