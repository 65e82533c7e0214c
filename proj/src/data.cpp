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

#include "arl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "arl/error.hpp"

namespace arl {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

Batch gather(const Dataset& data, std::span<const std::size_t> rows) {
  Batch b;
  b.indices.assign(rows.begin(), rows.end());
  for (const auto& f : data.features) {
    Matrix m(rows.size(), f.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy_n(f.row(rows[i]).begin(), f.cols, m.row(i).begin());
    }
    b.features.push_back(std::move(m));
  }
  for (std::size_t r : rows) b.labels.push_back(data.labels[r]);
  return b;
}

}  // namespace

std::string_view split_name(Split s) { return s == Split::train ? "train" : "test"; }

std::vector<std::size_t> Dataset::dims() const {
  std::vector<std::size_t> out;
  for (const auto& f : features) out.push_back(f.cols);
  return out;
}

void Dataset::validate() const {
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k].rows != labels.size()) {
      throw ShapeError("dataset: modality " + std::to_string(k) + " has " +
                       std::to_string(features[k].rows) + " rows for " +
                       std::to_string(labels.size()) + " labels");
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw ValueError("dataset: label " + std::to_string(labels[i]) + " at row " +
                       std::to_string(i) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

std::vector<std::string> SynthSpec::violations() const {
  std::vector<std::string> out;
  if (num_classes < 1) out.emplace_back("num_classes must be >= 1");
  if (samples_per_class < 1) out.emplace_back("samples_per_class must be >= 1");
  if (dims.empty()) out.emplace_back("at least one modality required");
  if (noise.size() != dims.size()) {
    out.push_back("noise has " + std::to_string(noise.size()) + " entries for " +
                  std::to_string(dims.size()) + " modalities");
  }
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (dims[k] < 1) out.push_back("dim of modality " + std::to_string(k) + " must be >= 1");
  }
  for (std::size_t k = 0; k < noise.size(); ++k) {
    if (!(noise[k] > 0.0) || !std::isfinite(noise[k])) {
      out.push_back("noise of modality " + std::to_string(k) + " must be > 0");
    }
  }
  if (!(separation >= 0.0) || !std::isfinite(separation)) out.emplace_back("separation must be >= 0");
  return out;
}

void SynthSpec::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid synthetic spec:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw ValueError(msg);
}

SplitDataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const std::size_t k_count = spec.num_modalities();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  // centers[c][k]
  std::vector<std::vector<std::vector<double>>> centers(spec.num_classes);
  for (auto& per_class : centers) {
    for (std::size_t k = 0; k < k_count; ++k) {
      std::vector<double> mu(spec.dims[k]);
      double norm = 0.0;
      do {
        for (auto& v : mu) v = unit(rng);
        norm = std::sqrt(std::inner_product(mu.begin(), mu.end(), mu.begin(), 0.0));
      } while (norm == 0.0);
      for (auto& v : mu) v = v / norm * spec.separation;
      per_class.push_back(std::move(mu));
    }
  }

  const auto train_per_class = static_cast<std::size_t>(
      std::llround(0.8 * static_cast<double>(spec.samples_per_class)));
  const std::size_t test_per_class = spec.samples_per_class - train_per_class;
  SplitDataset out;
  for (auto* d : {&out.train, &out.test}) {
    d->num_classes = spec.num_classes;
    const std::size_t rows = (d == &out.train ? train_per_class : test_per_class) * spec.num_classes;
    for (std::size_t k = 0; k < k_count; ++k) d->features.emplace_back(rows, spec.dims[k]);
  }
  out.test.split = Split::test;

  std::size_t train_row = 0;
  std::size_t test_row = 0;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      const bool to_train = i < train_per_class;
      Dataset& d = to_train ? out.train : out.test;
      const std::size_t row = to_train ? train_row++ : test_row++;
      for (std::size_t k = 0; k < k_count; ++k) {
        auto dst = d.features[k].row(row);
        for (std::size_t j = 0; j < spec.dims[k]; ++j) {
          dst[j] = centers[c][k][j] + spec.noise[k] * unit(rng);
        }
      }
      d.labels.push_back(static_cast<int>(c));
    }
  }
  return out;
}

CsvSchema CsvSchema::contiguous(std::span<const std::size_t> dims, std::size_t num_classes) {
  CsvSchema s;
  std::size_t col = 0;
  for (std::size_t d : dims) {
    s.modalities.push_back({col, col + d});
    col += d;
  }
  s.label_column = col;
  s.num_classes = num_classes;
  return s;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema, Split split) {
  std::ifstream in(path);
  if (!in) throw FormatError("csv: cannot open " + path.string());
  const std::string where = "csv " + path.string();

  std::string line;
  if (!std::getline(in, line)) throw FormatError(where + ": missing header row");
  const auto header = split_fields(line);
  std::vector<std::string> expected(header.size());
  std::size_t width = schema.label_column + 1;
  for (const auto& r : schema.modalities) width = std::max(width, r.end);
  if (header.size() != width) {
    throw FormatError(where + ": header has " + std::to_string(header.size()) +
                      " columns, schema expects " + std::to_string(width));
  }
  for (std::size_t k = 0; k < schema.modalities.size(); ++k) {
    const auto& r = schema.modalities[k];
    for (std::size_t c = r.begin; c < r.end; ++c) {
      expected[c] = "m" + std::to_string(k) + "_" + std::to_string(c - r.begin);
    }
  }
  expected[schema.label_column] = "label";
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!expected[c].empty() && trim(header[c]) != expected[c]) {
      throw FormatError(where + ": header column " + std::to_string(c + 1) + " is '" +
                        std::string(trim(header[c])) + "', expected '" + expected[c] + "'");
    }
  }

  std::vector<std::vector<double>> columns(schema.modalities.size());
  Dataset data;
  data.split = split;
  data.num_classes = schema.num_classes;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw FormatError(where + ": row " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    }
    auto parse = [&](std::size_t c) {
      const auto cell = trim(fields[c]);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw FormatError(where + ": row " + std::to_string(line_no) + ", column " +
                          std::to_string(c + 1) + " ('" + std::string(trim(header[c])) +
                          "'): not a number: '" + std::string(cell) + "'");
      }
      return v;
    };
    for (std::size_t k = 0; k < schema.modalities.size(); ++k) {
      for (std::size_t c = schema.modalities[k].begin; c < schema.modalities[k].end; ++c) {
        columns[k].push_back(parse(c));
      }
    }
    const double label = parse(schema.label_column);
    if (label != std::floor(label) || label < 0.0 ||
        label >= static_cast<double>(schema.num_classes)) {
      throw FormatError(where + ": row " + std::to_string(line_no) + ": label " +
                        std::string(trim(fields[schema.label_column])) + " outside [0, " +
                        std::to_string(schema.num_classes) + ")");
    }
    data.labels.push_back(static_cast<int>(label));
  }
  for (std::size_t k = 0; k < schema.modalities.size(); ++k) {
    const std::size_t dim = schema.modalities[k].end - schema.modalities[k].begin;
    data.features.emplace_back(data.labels.size(), dim, std::move(columns[k]));
  }
  return data;
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  data.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("csv: cannot open " + path.string() + " for writing");
  for (std::size_t k = 0; k < data.num_modalities(); ++k) {
    for (std::size_t j = 0; j < data.features[k].cols; ++j) out << 'm' << k << '_' << j << ',';
  }
  out << "label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (const auto& f : data.features) {
      for (double v : f.row(i)) out << format_double(v) << ',';
    }
    out << data.labels[i] << '\n';
  }
  if (!out) throw FormatError("csv: write failed for " + path.string());
}

std::vector<Batch> batches(const Dataset& data, std::size_t batch_size, std::uint64_t epoch_seed) {
  if (batch_size == 0) throw ValueError("batches: batch_size must be >= 1");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(epoch_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.push_back(gather(data, std::span(order).subspan(start, end - start)));
  }
  return out;
}

Batch full_batch(const Dataset& data) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return gather(data, order);
}

}  // namespace arl
