/*
 * Copyright 2026 The QGE Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "qge/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "qge/error.h"
#include "qge/random.h"

namespace qge {
namespace {

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> SplitLine(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, delimiter)) cells.push_back(Trim(cell));
  if (!line.empty() && line.back() == delimiter) cells.emplace_back();
  return cells;
}

std::optional<double> ParseNumber(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Labels sort numerically when every label is a number.
std::vector<std::string> SortLabels(const std::set<std::string>& labels) {
  std::vector<std::string> out(labels.begin(), labels.end());
  const bool numeric = std::all_of(out.begin(), out.end(), [](const std::string& s) {
    return ParseNumber(s).has_value();
  });
  if (numeric) {
    std::stable_sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
      return *ParseNumber(a) < *ParseNumber(b);
    });
  }
  return out;
}

void ComputeStats(TabularDataset& data) {
  const int d = data.dim();
  data.mean = FeatureMeans(data.instances);
  data.std = FeatureStds(data.instances);
  data.constant_columns.clear();
  for (int i = 0; i < d; ++i) {
    if (data.std[i] <= 0.0) {
      data.std[i] = 1.0;
      data.constant_columns.push_back(i);
    }
  }
}

void NormalizeInPlace(TabularDataset& data) {
  ComputeStats(data);
  for (Instance& inst : data.instances) inst.features = Normalize(data, inst.features);
  data.normalized = true;
}

std::vector<std::string> DefaultNames(int d) {
  std::vector<std::string> names(d);
  for (int i = 0; i < d; ++i) names[i] = "f" + std::to_string(i);
  return names;
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<double> FeatureMeans(std::span<const Instance> data) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "no instances");
  const std::size_t d = data[0].features.size();
  std::vector<double> mean(d, 0.0);
  for (const Instance& inst : data) {
    for (std::size_t i = 0; i < d; ++i) mean[i] += inst.features[i];
  }
  for (double& m : mean) m /= static_cast<double>(data.size());
  return mean;
}

std::vector<double> FeatureStds(std::span<const Instance> data) {
  const std::vector<double> mean = FeatureMeans(data);
  std::vector<double> var(mean.size(), 0.0);
  for (const Instance& inst : data) {
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double delta = inst.features[i] - mean[i];
      var[i] += delta * delta;
    }
  }
  for (double& v : var) v = std::sqrt(v / static_cast<double>(data.size()));
  return var;
}

std::vector<double> Normalize(const TabularDataset& data,
                              std::span<const double> raw) {
  if (static_cast<int>(raw.size()) != data.dim()) {
    throw Error(ErrorCode::kShapeError, "feature count mismatch");
  }
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - data.mean[i]) / data.std[i];
  return out;
}

std::vector<double> Denormalize(const TabularDataset& data,
                                std::span<const double> normalized) {
  if (static_cast<int>(normalized.size()) != data.dim()) {
    throw Error(ErrorCode::kShapeError, "feature count mismatch");
  }
  std::vector<double> out(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    out[i] = normalized[i] * data.std[i] + data.mean[i];
  }
  return out;
}

TabularDataset ParseCsv(std::istream& in, const CsvSchema& schema,
                        const std::string& source) {
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;
  std::vector<std::string> header;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    std::vector<std::string> cells = SplitLine(line, schema.delimiter);
    if (schema.header && header.empty()) {
      header = std::move(cells);
      continue;
    }
    rows.push_back(std::move(cells));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw Error(ErrorCode::kEmptyDataset, source + ": no data rows");

  const int width = static_cast<int>(rows[0].size());
  if (!header.empty() && static_cast<int>(header.size()) != width) {
    throw Error(ErrorCode::kLoadError, source + ": header has " +
                                           std::to_string(header.size()) +
                                           " columns, data has " + std::to_string(width));
  }
  const int label_col = schema.label_column < 0 ? width + schema.label_column
                                                : schema.label_column;
  if (label_col < 0 || label_col >= width) {
    throw Error(ErrorCode::kLoadError, source + ": label column out of range");
  }
  if (schema.id_column && (*schema.id_column < 0 || *schema.id_column >= width ||
                           *schema.id_column == label_col)) {
    throw Error(ErrorCode::kLoadError, source + ": invalid id column");
  }
  std::vector<int> feature_cols;
  for (int c = 0; c < width; ++c) {
    if (c != label_col && !(schema.id_column && c == *schema.id_column)) {
      feature_cols.push_back(c);
    }
  }
  if (feature_cols.empty()) throw Error(ErrorCode::kLoadError, source + ": no feature columns");

  TabularDataset data;
  for (int c : feature_cols) {
    data.feature_names.push_back(header.empty() ? "f" + std::to_string(data.feature_names.size())
                                                : header[c]);
  }

  std::set<std::string> allowed(schema.class_labels.begin(), schema.class_labels.end());
  std::set<std::string> seen;
  std::vector<std::pair<std::vector<double>, std::string>> parsed;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    const std::string where = source + ":" + std::to_string(line_numbers[r]);
    if (static_cast<int>(cells.size()) != width) {
      throw Error(ErrorCode::kLoadError, where + ": expected " + std::to_string(width) +
                                             " cells, found " + std::to_string(cells.size()));
    }
    std::vector<double> features;
    bool ok = true;
    for (int c : feature_cols) {
      auto v = ParseNumber(cells[c]);
      if (!v) {
        data.diagnostics.push_back(where + ": unparseable cell '" + cells[c] +
                                   "' in column " + std::to_string(c));
        ok = false;
        break;
      }
      features.push_back(*v);
    }
    if (!ok) continue;
    const std::string& label = cells[label_col];
    if (!allowed.empty() && !allowed.count(label)) {
      throw Error(ErrorCode::kLoadError, where + ": unknown label '" + label + "'");
    }
    seen.insert(label);
    parsed.emplace_back(std::move(features), label);
  }
  if (parsed.empty()) throw Error(ErrorCode::kEmptyDataset, source + ": every row was rejected");

  data.class_labels = schema.class_labels.empty() ? SortLabels(seen) : schema.class_labels;
  std::map<std::string, int> label_ids;
  for (std::size_t i = 0; i < data.class_labels.size(); ++i) {
    label_ids[data.class_labels[i]] = static_cast<int>(i);
  }
  data.class_count = static_cast<int>(data.class_labels.size());
  for (auto& [features, label] : parsed) {
    data.instances.push_back({std::move(features), label_ids.at(label)});
  }
  if (schema.normalize) {
    NormalizeInPlace(data);
  } else {
    ComputeStats(data);
  }
  return data;
}

TabularDataset LoadCsv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kLoadError, "cannot open " + path);
  return ParseCsv(in, schema, path);
}

void WriteCsv(const TabularDataset& data, std::ostream& out) {
  for (const std::string& name : data.feature_names) out << name << ",";
  out << "label\n";
  for (const Instance& inst : data.instances) {
    for (double v : inst.features) out << FormatDouble(v) << ",";
    out << (inst.label ? std::to_string(*inst.label) : "") << "\n";
  }
}

TabularDataset GenBlobs(int d, int c, int n, double separation,
                        std::uint64_t seed) {
  if (d < 1 || c < 1 || n < 1) {
    throw Error(ErrorCode::kInvalidArgument, "gen_blobs needs D, C, n >= 1");
  }
  if (!(separation >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative separation");
  Rng rng(seed);
  const double half_width = std::max(1.0, separation) * c;
  std::uniform_real_distribution<double> coord(-half_width, half_width);
  std::vector<std::vector<double>> centers;
  constexpr int kMaxAttempts = 10000;
  for (int k = 0; k < c; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      std::vector<double> center(d);
      for (double& v : center) v = coord(rng);
      placed = std::all_of(centers.begin(), centers.end(), [&](const auto& other) {
        double dist2 = 0.0;
        for (int i = 0; i < d; ++i) dist2 += (center[i] - other[i]) * (center[i] - other[i]);
        return std::sqrt(dist2) >= separation;
      });
      if (placed) centers.push_back(std::move(center));
    }
    if (!placed) {
      throw Error(ErrorCode::kGenerationFailed,
                  "could not place center " + std::to_string(k) + " at separation " +
                      std::to_string(separation));
    }
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  TabularDataset data;
  data.feature_names = DefaultNames(d);
  data.class_count = c;
  for (int k = 0; k < c; ++k) data.class_labels.push_back(std::to_string(k));
  for (int i = 0; i < n; ++i) {
    const int label = i % c;
    std::vector<double> x(d);
    for (int j = 0; j < d; ++j) x[j] = centers[label][j] + noise(rng);
    data.instances.push_back({std::move(x), label});
  }
  NormalizeInPlace(data);
  return data;
}

LocalizationDataset GenLocalization(int height, int width, int n, int patch,
                                    std::uint64_t seed) {
  if (height < 1 || width < 1 || n < 1) {
    throw Error(ErrorCode::kInvalidArgument, "gen_localization needs H, W, n >= 1");
  }
  if (patch < 1 || 2 * patch > std::min(height, width)) {
    throw Error(ErrorCode::kInvalidPatch,
                "patch " + std::to_string(patch) + " does not fit twice into a " +
                    std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  constexpr int kCorners = 4;
  const int d = height * width;
  std::vector<std::vector<std::uint8_t>> corner_masks(kCorners,
                                                      std::vector<std::uint8_t>(d, 0));
  for (int k = 0; k < kCorners; ++k) {
    const int top = (k / 2) ? height - patch : 0;
    const int left = (k % 2) ? width - patch : 0;
    for (int r = top; r < top + patch; ++r) {
      for (int col = left; col < left + patch; ++col) corner_masks[k][r * width + col] = 1;
    }
  }

  Rng rng(seed);
  std::normal_distribution<double> background(0.0, 0.5);
  std::normal_distribution<double> signal(2.0, 0.5);
  LocalizationDataset out;
  out.height = height;
  out.width = width;
  out.patch = patch;
  out.data.feature_names = DefaultNames(d);
  out.data.class_count = kCorners;
  for (int k = 0; k < kCorners; ++k) out.data.class_labels.push_back(std::to_string(k));
  for (int i = 0; i < n; ++i) {
    const int label = i % kCorners;
    std::vector<double> x(d);
    for (int j = 0; j < d; ++j) {
      x[j] = corner_masks[label][j] ? signal(rng) : background(rng);
    }
    out.data.instances.push_back({std::move(x), label});
    out.masks.emplace_back(corner_masks[label]);
  }
  ComputeStats(out.data);
  return out;
}

Split SplitIndices(std::size_t n, double holdout_fraction, std::uint64_t seed) {
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "holdout_fraction must be in [0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto holdout = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(n)));
  Split split;
  split.holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(holdout), order.end());
  std::sort(split.holdout.begin(), split.holdout.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

std::vector<Instance> Select(std::span<const Instance> data,
                             std::span<const std::size_t> indices) {
  std::vector<Instance> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(data[i]);
  return out;
}

nlohmann::json DatasetManifest(const TabularDataset& data, const std::string& source,
                               std::uint64_t seed) {
  return {{"source", source},
          {"seed", seed},
          {"rows", data.size()},
          {"dim", data.dim()},
          {"class_count", data.class_count},
          {"class_labels", data.class_labels},
          {"feature_names", data.feature_names},
          {"normalized", data.normalized},
          {"mean", data.mean},
          {"std", data.std},
          {"constant_columns", data.constant_columns},
          {"rejected_rows", data.diagnostics}};
}

}  // namespace qge
