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

#ifndef QGE_CORE_H_
#define QGE_CORE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace qge {

// Per-feature importance scores. Length equals the feature count of the
// instance being explained; every entry must be finite.
using Attribution = std::vector<double>;

// A permutation of feature indices. Unless stated otherwise, a ranking lists
// features by ascending attribution (what argsort returns).
using Ranking = std::vector<int>;

struct Instance {
  std::vector<double> features;
  std::optional<int> label;
};

// Scalar output of a quality measure. `degenerate` is set by correlation-style
// metrics whose inputs had zero variance; `value` is then 0.
struct QualityScore {
  double value = 0.0;
  bool degenerate = false;
};

// Binary ground-truth region over the features of one instance. Must contain
// at least one feature inside and one outside.
class GroundTruthMask {
 public:
  explicit GroundTruthMask(std::vector<std::uint8_t> inside);

  std::size_t size() const { return inside_.size(); }
  std::size_t count() const { return count_; }
  bool contains(std::size_t feature) const { return inside_[feature] != 0; }
  const std::vector<std::uint8_t>& inside() const { return inside_; }

 private:
  std::vector<std::uint8_t> inside_;
  std::size_t count_ = 0;
};

// Maps raw features onto G groups (superpixels). Every group id in [0, G)
// must be used by at least one raw feature.
class FeatureGrouping {
 public:
  FeatureGrouping(std::vector<int> group_of, int group_count);

  // Square `block`x`block` tiles over a row-major height x width grid. Edge
  // tiles are truncated when the block does not divide the grid.
  static FeatureGrouping Grid(int height, int width, int block);

  int group_count() const { return group_count_; }
  std::size_t raw_size() const { return group_of_.size(); }
  int group_of(std::size_t feature) const { return group_of_[feature]; }
  const std::vector<std::vector<int>>& members() const { return members_; }

  // Sums raw attributions into one value per group.
  Attribution Aggregate(std::span<const double> raw) const;

 private:
  std::vector<int> group_of_;
  int group_count_ = 0;
  std::vector<std::vector<int>> members_;
};

// Throws kInvalidAttribution if `values` is empty or has a non-finite entry.
void ValidateAttribution(std::span<const double> values);

// Indices sorted by ascending value; ties keep ascending index order.
Ranking ArgsortStable(std::span<const double> values);

// Reverse of ArgsortStable: element 0 is the most attributed feature.
Ranking RankingDescending(std::span<const double> values);

// Permutes the values of `e` so that features are ranked in reverse order:
// with o = ArgsortStable(e), result[o[i]] = e[o[D-1-i]]. The multiset of
// values is preserved. Tied blocks stay tied, so exact reversal of the
// ranking is only guaranteed for tie-free input.
Attribution InvertExplanation(std::span<const double> e);

// Elementwise negation. Reverses the ranking of tie-free input but does not
// preserve magnitudes or bounds of the attribution values.
Attribution NegateExplanation(std::span<const double> e);

bool HasTies(std::span<const double> values);

// Attribution whose ascending ranking equals `ranking`: feature ranking[i]
// receives the value i.
Attribution RankingToAttribution(std::span<const int> ranking);

bool IsPermutation(std::span<const int> ranking);

nlohmann::json AttributionToJson(std::span<const double> e);
Attribution AttributionFromJson(const nlohmann::json& j);
nlohmann::json RankingToJson(std::span<const int> r);
Ranking RankingFromJson(const nlohmann::json& j);

}  // namespace qge

#endif  // QGE_CORE_H_
