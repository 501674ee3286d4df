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

#ifndef QGE_DATA_H_
#define QGE_DATA_H_

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qge/core.h"

namespace qge {

struct TabularDataset {
  std::vector<Instance> instances;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_labels;  // label id -> original label text
  int class_count = 0;
  // Per-feature statistics of the raw data. When `normalized` is set the
  // stored features are z-scores: (raw - mean) / std.
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<int> constant_columns;  // std clamped to 1
  bool normalized = false;
  std::vector<std::string> diagnostics;  // rejected rows

  int dim() const { return static_cast<int>(feature_names.size()); }
  std::size_t size() const { return instances.size(); }
};

struct CsvSchema {
  char delimiter = ',';
  bool header = true;
  int label_column = -1;               // negative counts from the end
  std::optional<int> id_column;        // ignored column
  std::vector<std::string> class_labels;  // allowed labels; empty = infer
  bool normalize = true;
};

// Parses a delimited file. Rows with an unparseable numeric cell are skipped
// and reported in `diagnostics`; ragged rows, unknown labels or an empty file
// throw.
TabularDataset ParseCsv(std::istream& in, const CsvSchema& schema,
                        const std::string& source = "<stream>");
TabularDataset LoadCsv(const std::string& path, const CsvSchema& schema);

void WriteCsv(const TabularDataset& data, std::ostream& out);

std::vector<double> Normalize(const TabularDataset& data,
                              std::span<const double> raw);
std::vector<double> Denormalize(const TabularDataset& data,
                                std::span<const double> normalized);

// Gaussian clusters (unit variance) around C random centers that are pairwise
// at least `separation` apart, z-score normalized. Labels cycle 0..C-1.
TabularDataset GenBlobs(int d, int c, int n, double separation,
                        std::uint64_t seed);

struct LocalizationDataset {
  TabularDataset data;  // not normalized; features are pixel intensities
  std::vector<GroundTruthMask> masks;
  int height = 0;
  int width = 0;
  int patch = 0;
};

// Grids of background noise with one bright patch x patch square placed in
// one of four corners; the corner is the class and the mask marks the patch.
// Requires 1 <= patch and 2 * patch <= min(height, width) so the corners do
// not overlap.
LocalizationDataset GenLocalization(int height, int width, int n, int patch,
                                    std::uint64_t seed);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};

// Deterministic shuffled split; holdout gets round(fraction * n) items.
Split SplitIndices(std::size_t n, double holdout_fraction, std::uint64_t seed);

std::vector<Instance> Select(std::span<const Instance> data,
                             std::span<const std::size_t> indices);

std::vector<double> FeatureMeans(std::span<const Instance> data);
std::vector<double> FeatureStds(std::span<const Instance> data);

nlohmann::json DatasetManifest(const TabularDataset& data, const std::string& source,
                               std::uint64_t seed);

}  // namespace qge

#endif  // QGE_DATA_H_
