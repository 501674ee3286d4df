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

#include "qge/core.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qge/error.h"

namespace qge {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidAttribution: return "InvalidAttribution";
    case ErrorCode::kShapeError: return "ShapeError";
    case ErrorCode::kInvalidMask: return "InvalidMask";
    case ErrorCode::kInvalidGrouping: return "InvalidGrouping";
    case ErrorCode::kUnsupportedExplainer: return "UnsupportedExplainer";
    case ErrorCode::kRefuseExhaustive: return "RefuseExhaustive";
    case ErrorCode::kInvalidM: return "InvalidM";
    case ErrorCode::kInvalidK: return "InvalidK";
    case ErrorCode::kDegenerateCorrelation: return "DegenerateCorrelation";
    case ErrorCode::kAllNonPositive: return "AllNonPositive";
    case ErrorCode::kDegenerateMask: return "DegenerateMask";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kNeedTwoMethods: return "NeedTwoMethods";
    case ErrorCode::kInvalidComponent: return "InvalidComponent";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kDivergedTraining: return "DivergedTraining";
    case ErrorCode::kGenerationFailed: return "GenerationFailed";
    case ErrorCode::kInvalidPatch: return "InvalidPatch";
    case ErrorCode::kLoadError: return "LoadError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

GroundTruthMask::GroundTruthMask(std::vector<std::uint8_t> inside)
    : inside_(std::move(inside)) {
  for (auto& v : inside_) {
    if (v > 1) throw Error(ErrorCode::kInvalidMask, "mask entries must be 0/1");
    count_ += v;
  }
  if (count_ == 0 || count_ == inside_.size()) {
    throw Error(ErrorCode::kDegenerateMask,
                "mask needs at least one feature inside and one outside");
  }
}

FeatureGrouping::FeatureGrouping(std::vector<int> group_of, int group_count)
    : group_of_(std::move(group_of)), group_count_(group_count) {
  if (group_count_ < 1 || group_of_.empty()) {
    throw Error(ErrorCode::kInvalidGrouping, "empty grouping");
  }
  members_.resize(group_count_);
  for (std::size_t i = 0; i < group_of_.size(); ++i) {
    const int g = group_of_[i];
    if (g < 0 || g >= group_count_) {
      throw Error(ErrorCode::kInvalidGrouping,
                  "group id " + std::to_string(g) + " out of range");
    }
    members_[g].push_back(static_cast<int>(i));
  }
  for (int g = 0; g < group_count_; ++g) {
    if (members_[g].empty()) {
      throw Error(ErrorCode::kInvalidGrouping,
                  "group " + std::to_string(g) + " has no members");
    }
  }
}

FeatureGrouping FeatureGrouping::Grid(int height, int width, int block) {
  if (height < 1 || width < 1 || block < 1) {
    throw Error(ErrorCode::kInvalidGrouping, "grid dimensions must be positive");
  }
  const int tiles_x = (width + block - 1) / block;
  const int tiles_y = (height + block - 1) / block;
  std::vector<int> group_of(static_cast<std::size_t>(height) * width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      group_of[r * width + c] = (r / block) * tiles_x + c / block;
    }
  }
  return FeatureGrouping(std::move(group_of), tiles_x * tiles_y);
}

Attribution FeatureGrouping::Aggregate(std::span<const double> raw) const {
  if (raw.size() != group_of_.size()) {
    throw Error(ErrorCode::kShapeError, "raw attribution length mismatch");
  }
  Attribution out(group_count_, 0.0);
  for (std::size_t i = 0; i < raw.size(); ++i) out[group_of_[i]] += raw[i];
  return out;
}

void ValidateAttribution(std::span<const double> values) {
  if (values.empty()) {
    throw Error(ErrorCode::kInvalidAttribution, "empty attribution");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::kInvalidAttribution,
                  "non-finite entry at index " + std::to_string(i));
    }
  }
}

Ranking ArgsortStable(std::span<const double> values) {
  ValidateAttribution(values);
  Ranking order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[a] < values[b]; });
  return order;
}

Ranking RankingDescending(std::span<const double> values) {
  Ranking order = ArgsortStable(values);
  std::reverse(order.begin(), order.end());
  return order;
}

Attribution InvertExplanation(std::span<const double> e) {
  const Ranking o = ArgsortStable(e);
  const std::size_t d = e.size();
  Attribution inv(d);
  for (std::size_t i = 0; i < d; ++i) inv[o[i]] = e[o[d - 1 - i]];
  return inv;
}

Attribution NegateExplanation(std::span<const double> e) {
  ValidateAttribution(e);
  Attribution out(e.size());
  std::transform(e.begin(), e.end(), out.begin(),
                 [](double v) { return -v; });
  return out;
}

bool HasTies(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

Attribution RankingToAttribution(std::span<const int> ranking) {
  Attribution e(ranking.size());
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    e[ranking[i]] = static_cast<double>(i);
  }
  return e;
}

bool IsPermutation(std::span<const int> ranking) {
  std::vector<bool> seen(ranking.size(), false);
  for (int v : ranking) {
    if (v < 0 || static_cast<std::size_t>(v) >= ranking.size() || seen[v]) {
      return false;
    }
    seen[v] = true;
  }
  return true;
}

nlohmann::json AttributionToJson(std::span<const double> e) {
  return nlohmann::json(std::vector<double>(e.begin(), e.end()));
}

Attribution AttributionFromJson(const nlohmann::json& j) {
  if (!j.is_array()) {
    throw Error(ErrorCode::kInvalidAttribution, "expected a JSON array");
  }
  Attribution e;
  e.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) {
      throw Error(ErrorCode::kInvalidAttribution, "non-numeric entry");
    }
    e.push_back(v.get<double>());
  }
  ValidateAttribution(e);
  return e;
}

nlohmann::json RankingToJson(std::span<const int> r) {
  return nlohmann::json(std::vector<int>(r.begin(), r.end()));
}

Ranking RankingFromJson(const nlohmann::json& j) {
  if (!j.is_array()) {
    throw Error(ErrorCode::kInvalidArgument, "expected a JSON array");
  }
  Ranking r;
  for (const auto& v : j) {
    if (!v.is_number_integer()) {
      throw Error(ErrorCode::kInvalidArgument, "ranking entries must be integers");
    }
    r.push_back(v.get<int>());
  }
  if (!IsPermutation(r)) {
    throw Error(ErrorCode::kInvalidArgument, "ranking is not a permutation");
  }
  return r;
}

}  // namespace qge
