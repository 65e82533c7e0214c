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

#include "arl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace arl::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  s = trim(s);
  if (s.empty()) return out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  return out;
}

double to_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ValueError("expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t to_uint(std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValueError("expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

bool to_bool(std::string_view s) {
  s = trim(s);
  if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "off" || s == "no" || s == "0") return false;
  throw ValueError("expected true or false, got '" + std::string(s) + "'");
}

template <typename T, typename F>
std::vector<T> to_list(std::string_view s, F convert) {
  std::vector<T> out;
  for (std::string_view item : split_list(s)) out.push_back(static_cast<T>(convert(item)));
  return out;
}

std::vector<ValuePair> to_pairs(std::string_view s) {
  std::vector<ValuePair> out;
  for (std::string_view item : split_list(s)) {
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      throw ValueError("expected pairs written a:b, got '" + std::string(item) + "'");
    }
    out.emplace_back(to_double(item.substr(0, colon)), to_double(item.substr(colon + 1)));
  }
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& values, F format) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + format(values[i]);
  return out;
}

std::string uint_string(std::uint64_t v) { return std::to_string(v); }
std::string bool_string(bool b) { return b ? "true" : "false"; }
std::string pair_string(const ValuePair& p) { return format_double(p.first) + ":" + format_double(p.second); }

SynthSpec& synth(RunConfig& c) { return c.synth ? *c.synth : c.synth.emplace(); }
CsvSource& csv(RunConfig& c) { return c.csv ? *c.csv : c.csv.emplace(); }

struct Field {
  std::string_view key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"synth.classes", [](RunConfig& c, std::string_view v) { synth(c).num_classes = to_uint(v); },
       [](const RunConfig& c) { return uint_string(c.synth->num_classes); }},
      {"synth.samples_per_class",
       [](RunConfig& c, std::string_view v) { synth(c).samples_per_class = to_uint(v); },
       [](const RunConfig& c) { return uint_string(c.synth->samples_per_class); }},
      {"synth.dims", [](RunConfig& c, std::string_view v) { synth(c).dims = to_list<std::size_t>(v, to_uint); },
       [](const RunConfig& c) { return join(c.synth->dims, uint_string); }},
      {"synth.noise", [](RunConfig& c, std::string_view v) { synth(c).noise = to_list<double>(v, to_double); },
       [](const RunConfig& c) { return join(c.synth->noise, format_double); }},
      {"synth.separation", [](RunConfig& c, std::string_view v) { synth(c).separation = to_double(v); },
       [](const RunConfig& c) { return format_double(c.synth->separation); }},
      {"synth.seed", [](RunConfig& c, std::string_view v) { synth(c).seed = to_uint(v); },
       [](const RunConfig& c) { return uint_string(c.synth->seed); }},

      {"csv.train", [](RunConfig& c, std::string_view v) { csv(c).train = std::string(trim(v)); },
       [](const RunConfig& c) { return c.csv->train; }},
      {"csv.test", [](RunConfig& c, std::string_view v) { csv(c).test = std::string(trim(v)); },
       [](const RunConfig& c) { return c.csv->test; }},
      {"csv.dims", [](RunConfig& c, std::string_view v) { csv(c).dims = to_list<std::size_t>(v, to_uint); },
       [](const RunConfig& c) { return join(c.csv->dims, uint_string); }},
      {"csv.classes", [](RunConfig& c, std::string_view v) { csv(c).classes = to_uint(v); },
       [](const RunConfig& c) { return uint_string(c.csv->classes); }},

      {"model.hidden", [](RunConfig& c, std::string_view v) { c.hidden = to_list<std::size_t>(v, to_uint); },
       [](const RunConfig& c) { return join(c.hidden, uint_string); }},
      {"model.rep_dim", [](RunConfig& c, std::string_view v) { c.rep_dims = to_list<std::size_t>(v, to_uint); },
       [](const RunConfig& c) { return join(c.rep_dims, uint_string); }},
      {"model.fusion", [](RunConfig& c, std::string_view v) { c.fusion = parse_fusion(trim(v)); },
       [](const RunConfig& c) { return std::string(fusion_name(c.fusion)); }},

      {"strategy.kind", [](RunConfig& c, std::string_view v) { c.strategy.kind = parse_strategy(trim(v)); },
       [](const RunConfig& c) { return std::string(strategy_name(c.strategy.kind)); }},
      {"strategy.gamma", [](RunConfig& c, std::string_view v) { c.strategy.arl.gamma = to_double(v); },
       [](const RunConfig& c) { return format_double(c.strategy.arl.gamma); }},
      {"strategy.temperature",
       [](RunConfig& c, std::string_view v) { c.strategy.arl.temperature = to_double(v); },
       [](const RunConfig& c) { return format_double(c.strategy.arl.temperature); }},
      {"strategy.entropy_floor",
       [](RunConfig& c, std::string_view v) { c.strategy.arl.entropy_floor = to_double(v); },
       [](const RunConfig& c) { return format_double(c.strategy.arl.entropy_floor); }},
      {"strategy.ur", [](RunConfig& c, std::string_view v) { c.strategy.arl.use_ur = to_bool(v); },
       [](const RunConfig& c) { return bool_string(c.strategy.arl.use_ur); }},
      {"strategy.al", [](RunConfig& c, std::string_view v) { c.strategy.arl.use_al = to_bool(v); },
       [](const RunConfig& c) { return bool_string(c.strategy.arl.use_al); }},
      {"strategy.gr", [](RunConfig& c, std::string_view v) { c.strategy.arl.use_gr = to_bool(v); },
       [](const RunConfig& c) { return bool_string(c.strategy.arl.use_gr); }},
      {"strategy.ema", [](RunConfig& c, std::string_view v) { c.strategy.arl.smoothing = to_bool(v); },
       [](const RunConfig& c) { return bool_string(c.strategy.arl.smoothing); }},
      {"strategy.ema_decay",
       [](RunConfig& c, std::string_view v) { c.strategy.arl.smoothing_decay = to_double(v); },
       [](const RunConfig& c) { return format_double(c.strategy.arl.smoothing_decay); }},

      {"optim.lr", [](RunConfig& c, std::string_view v) { c.optim.lr = to_double(v); },
       [](const RunConfig& c) { return format_double(c.optim.lr); }},
      {"optim.momentum", [](RunConfig& c, std::string_view v) { c.optim.momentum = to_double(v); },
       [](const RunConfig& c) { return format_double(c.optim.momentum); }},
      {"optim.weight_decay", [](RunConfig& c, std::string_view v) { c.optim.weight_decay = to_double(v); },
       [](const RunConfig& c) { return format_double(c.optim.weight_decay); }},
      {"optim.epochs", [](RunConfig& c, std::string_view v) { c.optim.epochs = to_uint(v); },
       [](const RunConfig& c) { return uint_string(c.optim.epochs); }},
      {"optim.batch_size", [](RunConfig& c, std::string_view v) { c.optim.batch_size = to_uint(v); },
       [](const RunConfig& c) { return uint_string(c.optim.batch_size); }},

      {"run.seeds", [](RunConfig& c, std::string_view v) { c.seeds = to_list<std::uint64_t>(v, to_uint); },
       [](const RunConfig& c) { return join(c.seeds, uint_string); }},
      {"run.output", [](RunConfig& c, std::string_view v) { c.output = std::string(trim(v)); },
       [](const RunConfig& c) { return c.output; }},

      {"theory.cases", [](RunConfig& c, std::string_view v) { c.theory.cases = to_uint(v); },
       [](const RunConfig& c) { return uint_string(c.theory.cases); }},
      {"theory.samples", [](RunConfig& c, std::string_view v) { c.theory.samples = to_uint(v); },
       [](const RunConfig& c) { return uint_string(c.theory.samples); }},
      {"theory.grid_step", [](RunConfig& c, std::string_view v) { c.theory.grid_step = to_double(v); },
       [](const RunConfig& c) { return format_double(c.theory.grid_step); }},
      {"theory.variance_min", [](RunConfig& c, std::string_view v) { c.theory.variance_min = to_double(v); },
       [](const RunConfig& c) { return format_double(c.theory.variance_min); }},
      {"theory.variance_max", [](RunConfig& c, std::string_view v) { c.theory.variance_max = to_double(v); },
       [](const RunConfig& c) { return format_double(c.theory.variance_max); }},
      {"theory.seed", [](RunConfig& c, std::string_view v) { c.theory.seed = to_uint(v); },
       [](const RunConfig& c) { return uint_string(c.theory.seed); }},
      {"theory.variance_pairs", [](RunConfig& c, std::string_view v) { c.theory.variance_pairs = to_pairs(v); },
       [](const RunConfig& c) { return join(c.theory.variance_pairs, pair_string); }},
      {"theory.bias_pairs", [](RunConfig& c, std::string_view v) { c.theory.bias_pairs = to_pairs(v); },
       [](const RunConfig& c) { return join(c.theory.bias_pairs, pair_string); }},
  };
  return table;
}

const Field* find_field(std::string_view key) {
  for (const Field& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

std::string axis_key(std::string_view name) {
  if (name == "T") return "strategy.temperature";
  if (name == "gamma") return "strategy.gamma";
  return std::string(name);
}

struct Entry {
  std::string key;
  std::string value;
  std::string origin;
};

// Maps a validation message onto the key most likely responsible for it.
struct Hint {
  std::string_view prefix;
  std::string_view key;
};

class Builder {
 public:
  void apply(const Entry& e) {
    if (e.key.starts_with("sweep.")) {
      set_axis(e);
      return;
    }
    const Field* f = find_field(e.key);
    if (!f) {
      error(e.origin, "unknown key '" + e.key + "'");
      return;
    }
    try {
      f->set(cfg_, e.value);
      origins_[e.key] = e.origin;
      if (e.key.starts_with("synth.") && synth_origin_.empty()) synth_origin_ = e.origin + " (" + e.key + ")";
      if (e.key.starts_with("csv.") && csv_origin_.empty()) csv_origin_ = e.origin + " (" + e.key + ")";
    } catch (const Error& ex) {
      error(e.origin, e.key + ": " + ex.what());
    }
  }

  RunConfig finish() {
    if (cfg_.synth && cfg_.csv) {
      error(csv_origin_, "conflicting data sources: synthetic data set at " + synth_origin_ +
                             " and CSV data set here; use either synth.* or csv.* keys");
    } else if (!cfg_.synth && !cfg_.csv) {
      cfg_.synth.emplace();
    }
    if (diagnostics_.empty()) validate();
    if (diagnostics_.empty()) check_axes();
    if (!diagnostics_.empty()) throw ConfigError(std::move(diagnostics_));
    return std::move(cfg_);
  }

  void error(const std::string& origin, const std::string& msg) { diagnostics_.push_back(origin + ": " + msg); }

 private:
  void set_axis(const Entry& e) {
    const std::string name = e.key.substr(6);
    SweepAxis axis{name, axis_key(name), {}};
    const Field* f = find_field(axis.key);
    if (name.empty() || !f || axis.key == "run.seeds" || axis.key == "run.output" ||
        axis.key.starts_with("theory.")) {
      error(e.origin, "'" + e.key + "' does not name a sweepable key");
      return;
    }
    for (std::string_view v : split_list(e.value)) axis.values.emplace_back(v);
    if (axis.values.empty()) {
      error(e.origin, e.key + ": at least one value required");
      return;
    }
    axis_origins_[name] = e.origin;
    for (SweepAxis& existing : cfg_.sweep) {
      if (existing.name == name) {
        existing = std::move(axis);
        return;
      }
    }
    cfg_.sweep.push_back(std::move(axis));
  }

  void report(const std::vector<std::string>& violations, std::span<const Hint> hints,
              std::string_view section) {
    for (const std::string& v : violations) {
      std::string origin(section);
      for (const Hint& h : hints) {
        if (!v.starts_with(h.prefix)) continue;
        const auto it = origins_.find(std::string(h.key));
        origin = it != origins_.end() ? it->second + " (" + std::string(h.key) + ")"
                                      : "default " + std::string(h.key);
        break;
      }
      error(origin, v);
    }
  }

  void validate() {
    static constexpr Hint synth_hints[] = {{"num_classes", "synth.classes"},
                                           {"samples_per_class", "synth.samples_per_class"},
                                           {"at least one", "synth.dims"},
                                           {"dim", "synth.dims"},
                                           {"noise", "synth.noise"},
                                           {"separation", "synth.separation"}};
    static constexpr Hint model_hints[] = {{"at least 2", "synth.dims"},
                                           {"rep", "model.rep_dim"},
                                           {"input dim", "synth.dims"},
                                           {"hidden", "model.hidden"},
                                           {"num_classes", "synth.classes"},
                                           {"gated", "model.fusion"}};
    static constexpr Hint csv_model_hints[] = {{"at least 2", "csv.dims"},       {"rep", "model.rep_dim"},
                                               {"input dim", "csv.dims"},        {"hidden", "model.hidden"},
                                               {"num_classes", "csv.classes"},   {"gated", "model.fusion"}};
    static constexpr Hint arl_hints[] = {{"temperature", "strategy.temperature"},
                                         {"gamma", "strategy.gamma"},
                                         {"entropy_floor", "strategy.entropy_floor"},
                                         {"smoothing_decay", "strategy.ema_decay"}};
    static constexpr Hint optim_hints[] = {{"lr", "optim.lr"},
                                           {"momentum", "optim.momentum"},
                                           {"weight_decay", "optim.weight_decay"},
                                           {"batch_size", "optim.batch_size"}};

    if (cfg_.synth) {
      report(cfg_.synth->violations(), synth_hints, "synth");
    } else {
      std::vector<std::string> v;
      if (cfg_.csv->train.empty()) v.emplace_back("csv.train must name a file");
      if (cfg_.csv->test.empty()) v.emplace_back("csv.test must name a file");
      report(v, {}, "csv");
    }
    if (!diagnostics_.empty()) return;
    if (cfg_.rep_dims.size() != 1 && cfg_.rep_dims.size() != cfg_.model_config().num_modalities()) {
      error(origin_or_default("model.rep_dim"),
            "model.rep_dim needs 1 or " + std::to_string(cfg_.model_config().num_modalities()) + " entries");
      return;
    }
    report(cfg_.model_config().violations(), cfg_.synth ? std::span<const Hint>(model_hints) : csv_model_hints,
           "model");
    report(cfg_.strategy.arl.violations(), arl_hints, "strategy");
    report(cfg_.optim.violations(), optim_hints, "optim");
    if (cfg_.seeds.empty()) error(origin_or_default("run.seeds"), "run.seeds must list at least one seed");
    if (cfg_.output.empty()) error(origin_or_default("run.output"), "run.output must not be empty");

    const TheoryConfig& t = cfg_.theory;
    if (t.samples < 2) error(origin_or_default("theory.samples"), "theory.samples must be >= 2");
    if (!(t.grid_step > 0.0 && t.grid_step <= 0.1)) {
      error(origin_or_default("theory.grid_step"), "theory.grid_step must be in (0, 0.1]");
    }
    if (!(t.variance_min > 0.0 && t.variance_min <= t.variance_max)) {
      error(origin_or_default("theory.variance_min"), "need 0 < theory.variance_min <= theory.variance_max");
    }
    for (const auto& [v0, v1] : t.variance_pairs) {
      if (!(v0 > 0.0 && v1 > 0.0)) error(origin_or_default("theory.variance_pairs"), "variances must be > 0");
    }
  }

  // Every sweep value must be a valid setting on its own.
  void check_axes() {
    for (const SweepAxis& axis : cfg_.sweep) {
      for (const std::string& v : axis.values) {
        RunConfig copy = cfg_;
        try {
          set_key(copy, axis.key, v);
        } catch (const Error& ex) {
          error(axis_origins_[axis.name], "sweep." + axis.name + ": " + ex.what());
        }
      }
    }
  }

  std::string origin_or_default(const std::string& key) const {
    const auto it = origins_.find(key);
    return it != origins_.end() ? it->second : "default " + key;
  }

  RunConfig cfg_;
  std::map<std::string, std::string> origins_;
  std::map<std::string, std::string> axis_origins_;
  std::string synth_origin_;
  std::string csv_origin_;
  std::vector<std::string> diagnostics_;
};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : FormatError([&] {
        std::string msg = "invalid configuration:";
        for (const auto& d : diagnostics) msg += "\n  " + d;
        return msg;
      }()),
      diagnostics_(std::move(diagnostics)) {}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  if (synth) {
    m.input_dims = synth->dims;
    m.num_classes = synth->num_classes;
  } else if (csv) {
    m.input_dims = csv->dims;
    m.num_classes = csv->classes;
  }
  m.hidden = hidden;
  m.rep_dims = rep_dims.size() == 1 ? std::vector<std::size_t>(m.input_dims.size(), rep_dims[0]) : rep_dims;
  m.fusion = fusion;
  return m;
}

SplitDataset RunConfig::load_data(std::uint64_t run_seed) const {
  if (synth) {
    SynthSpec spec = *synth;
    spec.seed += run_seed;
    return generate_synthetic(spec);
  }
  if (!csv) throw ValueError("no data source configured");
  const CsvSchema schema = CsvSchema::contiguous(csv->dims, csv->classes);
  return {load_csv(csv->train, schema, Split::train), load_csv(csv->test, schema, Split::test)};
}

void set_key(RunConfig& cfg, std::string_view key, std::string_view value) {
  const Field* f = find_field(key);
  if (!f) throw ValueError("unknown key '" + std::string(key) + "'");
  f->set(cfg, value);
}

RunConfig parse_config(std::string_view text, std::string_view origin, std::span<const std::string> overrides) {
  Builder builder;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    std::string_view line = raw;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || trim(line.substr(0, eq)).empty()) {
      builder.error(where, "expected 'key = value', got '" + std::string(line) + "'");
      continue;
    }
    builder.apply({std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), where});
  }
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    const std::string where = "override " + std::to_string(i + 1) + " '" + overrides[i] + "'";
    const auto eq = overrides[i].find('=');
    if (eq == std::string::npos || trim(std::string_view(overrides[i]).substr(0, eq)).empty()) {
      builder.error(where, "expected key=value");
      continue;
    }
    const std::string_view o = overrides[i];
    builder.apply({std::string(trim(o.substr(0, eq))), std::string(trim(o.substr(eq + 1))), where});
  }
  return builder.finish();
}

RunConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({path.string() + ": cannot open configuration file"});
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string(), overrides);
}

std::vector<std::pair<std::string, std::string>> effective_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) {
    if (f.key.starts_with("synth.") && !cfg.synth) continue;
    if (f.key.starts_with("csv.") && !cfg.csv) continue;
    out.emplace_back(std::string(f.key), f.get(cfg));
  }
  for (const SweepAxis& axis : cfg.sweep) {
    out.emplace_back("sweep." + axis.name, join(axis.values, [](const std::string& s) { return s; }));
  }
  return out;
}

std::string echo_config(const RunConfig& cfg) {
  std::string out = "# Effective configuration, defaults included.\n";
  std::string section;
  for (const auto& [key, value] : effective_entries(cfg)) {
    const std::string s = key.substr(0, key.find('.'));
    if (s != section) {
      out += "\n";
      section = s;
    }
    out += key + " = " + value + "\n";
  }
  return out;
}

}  // namespace arl::cli
