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

// The `arl` subcommands. Each returns a process exit status:
//   0  success
//   1  any other failure (I/O, unreadable data, ...)
//   2  bad configuration or usage
//   3  training aborted on a non-finite loss
//   4  theory check disagreement

#include <filesystem>
#include <ostream>
#include <span>
#include <string>

#include "arl/config.hpp"

namespace arl::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitBadConfig = 2,
  kExitNanAbort = 3,
  kExitDisagreement = 4,
};

// Environment variable that, when set, replaces run.output.
inline constexpr const char* kOutputRootEnv = "ARL_OUTPUT_ROOT";

// Parses the file and overrides and applies the output-root environment override.
RunConfig resolve_config(const std::filesystem::path& path, std::span<const std::string> overrides);

// Writes effective.cfg, then per seed seed-<s>/{epochs.jsonl, steps.jsonl,
// summary.json, checkpoint.bin}, then a cross-seed summary.json.
int cmd_train(const std::filesystem::path& path, std::span<const std::string> overrides, std::ostream& out,
              std::ostream& err);

// Closed-form versus grid-search weights per variance case, bias feasibility
// per bias pair; writes theory.json.
int cmd_theory(const std::filesystem::path& path, std::span<const std::string> overrides, std::ostream& out,
               std::ostream& err);

// Full-factorial sweep over the sweep.* axes and run seeds; writes
// sweep_results.csv (one row per cell and seed) and sweep_summary.csv.
int cmd_sweep(const std::filesystem::path& path, std::span<const std::string> overrides, std::ostream& out,
              std::ostream& err);

// Dispatches `<command> <config> [key=value ...]`.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace arl::cli
