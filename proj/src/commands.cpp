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

#include "arl/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>

#include <json.hpp>

#include "arl/checkpoint.hpp"
#include "arl/theory.hpp"

namespace arl::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

fs::path prepare_output(const RunConfig& cfg) {
  const fs::path dir = cfg.output;
  fs::create_directories(dir);
  write_text(dir / "effective.cfg", echo_config(cfg));
  return dir;
}

Json metrics_json(const Metrics& m) {
  return Json{{"accuracy", m.accuracy}, {"macro_f1", m.macro_f1}, {"per_class_f1", m.per_class_f1}};
}

Json config_json(const RunConfig& cfg) {
  Json j = Json::object();
  for (const auto& [key, value] : effective_entries(cfg)) j[key] = value;
  return j;
}

double log_gap(const EpochRecord& e) { return std::fabs(std::log(e.d_ratio / e.q_ratio)); }

Json epoch_json(const EpochRecord& e) {
  Json j;
  j["epoch"] = e.epoch;
  j["loss_fused"] = e.loss_fused;
  j["loss_total"] = e.loss_total;
  j["u"] = e.u;
  j["train"] = metrics_json(e.train);
  j["test"] = metrics_json(e.test);
  j["q_ratio"] = e.q_ratio;
  j["d_ratio"] = e.d_ratio;
  j["log_gap"] = log_gap(e);
  j["a"] = e.a;
  j["min_grad_ratio"] = e.min_grad_ratio;
  j["max_grad_ratio"] = e.max_grad_ratio;
  return j;
}

struct MeanStd {
  double mean = kNaN;
  double std = kNaN;  // sample standard deviation; 0 for a single value
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  double sum = 0.0;
  for (double x : v) sum += x;
  out.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return out;
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  TrainReport report;
};

SeedOutcome train_seed(const RunConfig& cfg, std::uint64_t seed, const fs::path& dir) {
  fs::create_directories(dir);
  OptimizerConfig opt = cfg.optim;
  opt.seed = seed;
  std::ofstream steps(dir / "steps.jsonl", std::ios::binary | std::ios::trunc);
  TrainResult result = train(cfg.model_config(), cfg.load_data(seed), cfg.strategy, opt, [&](const StepRecord& s) {
    Json j = Json::parse(arl_state_jsonl(s.state, s.step, s.epoch));
    j["grad_norm_ratio"] = s.grad_norm_ratio;
    steps << j.dump() << '\n';
  });
  if (!steps) throw Error("cannot write " + (dir / "steps.jsonl").string());

  std::string epochs;
  for (const EpochRecord& e : result.report.epochs) epochs += epoch_json(e).dump() + "\n";
  write_text(dir / "epochs.jsonl", epochs);

  result.report.checkpoint_path = (dir / "checkpoint.bin").string();
  save_model(result.report.checkpoint_path, result.params);

  Json summary;
  summary["seed"] = seed;
  summary["strategy"] = strategy_name(cfg.strategy.kind);
  summary["epochs"] = result.report.epochs.size();
  summary["initial_test"] = metrics_json(result.report.initial_test);
  summary["final_test"] = metrics_json(result.report.final_test);
  if (!result.report.epochs.empty()) {
    summary["final_d_ratio"] = result.report.epochs.back().d_ratio;
    summary["final_q_ratio"] = result.report.epochs.back().q_ratio;
  }
  summary["checkpoint"] = result.report.checkpoint_path;
  summary["wall_seconds"] = result.report.wall_seconds;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return {seed, std::move(result.report)};
}

// Reports a failure and maps it onto an exit status.
int failure(std::ostream& err, const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) {
    err << e.what() << "\n";
    return kExitBadConfig;
  }
  if (dynamic_cast<const NanLossError*>(&e)) {
    err << "training aborted: " << e.what() << "\n";
    return kExitNanAbort;
  }
  err << "error: " << e.what() << "\n";
  return kExitFailure;
}

std::vector<std::pair<double, double>> random_variance_pairs(const TheoryConfig& t) {
  std::mt19937_64 rng(t.seed);
  std::uniform_real_distribution<double> dist(t.variance_min, t.variance_max);
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < t.cases; ++i) {
    const double v0 = dist(rng);
    out.emplace_back(v0, dist(rng));
  }
  return out;
}

// Steps the axis indices like an odometer, last axis fastest; false once
// every combination has been visited.
bool advance(std::vector<std::size_t>& index, const std::vector<SweepAxis>& axes) {
  for (std::size_t a = axes.size(); a-- > 0;) {
    if (++index[a] < axes[a].values.size()) return true;
    index[a] = 0;
  }
  return false;
}

std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : "nan"; }

}  // namespace

RunConfig resolve_config(const fs::path& path, std::span<const std::string> overrides) {
  RunConfig cfg = load_config(path, overrides);
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) cfg.output = root;
  return cfg;
}

int cmd_train(const fs::path& path, std::span<const std::string> overrides, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = resolve_config(path, overrides);
    const fs::path dir = prepare_output(cfg);
    std::vector<double> acc, f1;
    Json runs = Json::array();
    for (std::uint64_t seed : cfg.seeds) {
      const SeedOutcome o = train_seed(cfg, seed, dir / ("seed-" + std::to_string(seed)));
      acc.push_back(o.report.final_test.accuracy);
      f1.push_back(o.report.final_test.macro_f1);
      Json run{{"seed", seed},
               {"test_accuracy", o.report.final_test.accuracy},
               {"test_macro_f1", o.report.final_test.macro_f1}};
      if (!o.report.epochs.empty()) {
        run["final_d_ratio"] = o.report.epochs.back().d_ratio;
        run["final_q_ratio"] = o.report.epochs.back().q_ratio;
      }
      runs.push_back(run);
      out << "seed " << seed << ": test accuracy " << o.report.final_test.accuracy << ", macro-F1 "
          << o.report.final_test.macro_f1 << "\n";
    }
    const MeanStd a = mean_std(acc);
    const MeanStd f = mean_std(f1);
    Json summary;
    summary["config"] = config_json(cfg);
    summary["runs"] = runs;
    summary["test_accuracy"] = Json{{"mean", a.mean}, {"std", a.std}};
    summary["test_macro_f1"] = Json{{"mean", f.mean}, {"std", f.std}};
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    out << "test accuracy " << a.mean << " +- " << a.std << ", macro-F1 " << f.mean << " +- " << f.std
        << " over " << cfg.seeds.size() << " seed(s); results in " << dir.string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    return failure(err, e);
  }
}

int cmd_theory(const fs::path& path, std::span<const std::string> overrides, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = resolve_config(path, overrides);
    const TheoryConfig& t = cfg.theory;
    const fs::path dir = prepare_output(cfg);

    std::vector<std::pair<double, double>> pairs = t.variance_pairs;
    const auto random = random_variance_pairs(t);
    pairs.insert(pairs.end(), random.begin(), random.end());

    Json cases = Json::array();
    std::vector<std::string> failing;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto [v0, v1] = pairs[i];
      const theory::AgreementCase c =
          theory::compare_closed_form_to_oracle(v0, v1, t.samples, t.grid_step, t.seed + 1 + i);
      cases.push_back(Json{{"variances", c.variances},
                           {"closed_form", c.closed_form},
                           {"oracle", c.oracle},
                           {"standard_error", c.standard_error},
                           {"delta", c.delta},
                           {"tolerance", c.tolerance},
                           {"agrees", c.agrees}});
      out << "variances (" << v0 << ", " << v1 << "): closed-form w0 " << c.closed_form[0] << ", oracle w0 "
          << c.oracle[0] << ", delta " << c.delta << " (tolerance " << c.tolerance << ")"
          << (c.agrees ? "" : "  DISAGREES") << "\n";
      if (!c.agrees) failing.push_back("variance case " + std::to_string(i));
    }

    Json bias = Json::array();
    for (std::size_t i = 0; i < t.bias_pairs.size(); ++i) {
      const auto [b0, b1] = t.bias_pairs[i];
      Json j{{"biases", {b0, b1}}};
      if (b0 == b1) {
        j["status"] = "skipped";
        j["reason"] = "equal biases admit no bias-cancelling weights";
      } else {
        const theory::WeightSolution s = theory::bias_weight_solution(b0, b1);
        const double combined = s.weights[0] * b0 + s.weights[1] * b1;
        const bool consistent =
            s.feasible == theory::opposite_signs(b0, b1) && (!s.feasible || std::fabs(combined) < 1e-12);
        j["status"] = "ok";
        j["weights"] = s.weights;
        j["feasible"] = s.feasible;
        j["opposite_signs"] = theory::opposite_signs(b0, b1);
        j["combined_bias"] = combined;
        j["consistent"] = consistent;
        if (!consistent) failing.push_back("bias case " + std::to_string(i));
      }
      bias.push_back(j);
    }

    Json report;
    report["samples"] = t.samples;
    report["grid_step"] = t.grid_step;
    report["variance_cases"] = cases;
    report["bias_cases"] = bias;
    report["all_agree"] = failing.empty();
    report["failing"] = failing;
    write_text(dir / "theory.json", report.dump(2) + "\n");
    if (!failing.empty()) {
      err << "theory check failed for:";
      for (const auto& f : failing) err << " " << f;
      err << "\n";
      return kExitDisagreement;
    }
    out << pairs.size() << " variance case(s) agree; report in " << (dir / "theory.json").string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    return failure(err, e);
  }
}

int cmd_sweep(const fs::path& path, std::span<const std::string> overrides, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = resolve_config(path, overrides);
    const fs::path dir = prepare_output(cfg);

    std::string header;
    for (const SweepAxis& axis : cfg.sweep) header += axis.name + ",";
    std::string results = header + "seed,status,acc,macro_f1,final_d_ratio,final_q_ratio\n";
    std::string summary = header + "runs,failed,acc_mean,acc_std,macro_f1_mean,final_d_ratio_mean,final_q_ratio_mean\n";

    int status = kExitOk;
    std::vector<std::size_t> index(cfg.sweep.size(), 0);
    while (true) {
      RunConfig cell = cfg;
      cell.sweep.clear();
      std::string prefix;
      for (std::size_t a = 0; a < cfg.sweep.size(); ++a) {
        const std::string& value = cfg.sweep[a].values[index[a]];
        set_key(cell, cfg.sweep[a].key, value);
        prefix += value + ",";
      }
      std::vector<double> acc, f1, dr, qr;
      std::size_t failed = 0;
      for (std::uint64_t seed : cfg.seeds) {
        std::string row = prefix + std::to_string(seed) + ",";
        try {
          OptimizerConfig opt = cell.optim;
          opt.seed = seed;
          const TrainReport r = train(cell.model_config(), cell.load_data(seed), cell.strategy, opt).report;
          const double d = r.epochs.empty() ? kNaN : r.epochs.back().d_ratio;
          const double q = r.epochs.empty() ? kNaN : r.epochs.back().q_ratio;
          acc.push_back(r.final_test.accuracy);
          f1.push_back(r.final_test.macro_f1);
          dr.push_back(d);
          qr.push_back(q);
          row += "ok," + csv_number(r.final_test.accuracy) + "," + csv_number(r.final_test.macro_f1) + "," +
                 csv_number(d) + "," + csv_number(q);
        } catch (const Error& e) {
          ++failed;
          const bool nan = dynamic_cast<const NanLossError*>(&e) != nullptr;
          row += std::string(nan ? "nan_abort" : "error") + ",,,,";
          err << "cell " << prefix << "seed " << seed << " failed: " << e.what() << "\n";
          if (status == kExitOk) status = nan ? kExitNanAbort : kExitFailure;
        }
        results += row + "\n";
      }
      const MeanStd a = mean_std(acc);
      summary += prefix + std::to_string(cfg.seeds.size()) + "," + std::to_string(failed) + "," +
                 csv_number(a.mean) + "," + csv_number(a.std) + "," + csv_number(mean_std(f1).mean) + "," +
                 csv_number(mean_std(dr).mean) + "," + csv_number(mean_std(qr).mean) + "\n";
      out << "cell " << (prefix.empty() ? "(base)" : prefix) << " mean accuracy " << a.mean << "\n";

      if (!advance(index, cfg.sweep)) break;
    }
    write_text(dir / "sweep_results.csv", results);
    write_text(dir / "sweep_summary.csv", summary);
    out << "results in " << (dir / "sweep_results.csv").string() << "\n";
    return status;
  } catch (const std::exception& e) {
    return failure(err, e);
  }
}

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  static constexpr const char* kUsage =
      "usage: arl train <config> [key=value ...]\n"
      "       arl theory <config> [key=value ...]\n"
      "       arl sweep <config> [key=value ...]\n";
  if (!args.empty() && (args[0] == "-h" || args[0] == "--help" || args[0] == "help")) {
    out << kUsage;
    return kExitOk;
  }
  if (args.size() < 2) {
    err << kUsage;
    return kExitBadConfig;
  }
  const std::string& command = args[0];
  const fs::path path = args[1];
  const auto overrides = args.subspan(2);
  if (command == "train") return cmd_train(path, overrides, out, err);
  if (command == "theory") return cmd_theory(path, overrides, out, err);
  if (command == "sweep") return cmd_sweep(path, overrides, out, err);
  err << "unknown command '" << command << "'\n" << kUsage;
  return kExitBadConfig;
}

}  // namespace arl::cli
