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

#include "qge/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qge/error.h"
#include "qge/random.h"
#include "qge/stats.h"

namespace qge {
namespace {

void CheckModelInput(const Model& model, std::span<const double> x, int y) {
  if (static_cast<int>(x.size()) != model.input_dim()) {
    throw Error(ErrorCode::kShapeError, "input dimension does not match model");
  }
  if (y < 0 || y >= model.class_count()) {
    throw Error(ErrorCode::kShapeError, "class index out of range");
  }
}

void CheckBaseline(const Baseline& baseline, std::size_t d) {
  if (baseline.is_mean() && baseline.mean().size() != d) {
    throw Error(ErrorCode::kShapeError, "baseline mean length does not match input");
  }
}

void CheckSameLength(std::span<const double> e, std::size_t d) {
  ValidateAttribution(e);
  if (e.size() != d) {
    throw Error(ErrorCode::kShapeError, "attribution has " + std::to_string(e.size()) +
                                            " entries, expected " + std::to_string(d));
  }
}

// Group-level attribution when a grouping is present.
Attribution UnitAttribution(std::span<const double> x, std::span<const double> e,
                            const FeatureGrouping* grouping) {
  if (grouping == nullptr) {
    CheckSameLength(e, x.size());
    return Attribution(e.begin(), e.end());
  }
  if (grouping->raw_size() != x.size()) {
    throw Error(ErrorCode::kShapeError, "grouping does not match input dimension");
  }
  ValidateAttribution(e);
  if (static_cast<int>(e.size()) == grouping->group_count()) {
    return Attribution(e.begin(), e.end());
  }
  if (e.size() == x.size()) return grouping->Aggregate(e);
  throw Error(ErrorCode::kShapeError,
              "attribution length matches neither groups nor raw features");
}

void Restore(std::vector<double>& out, std::span<const double> x, int unit,
             const FeatureGrouping* grouping) {
  if (grouping == nullptr) {
    out[unit] = x[unit];
  } else {
    for (int i : grouping->members()[unit]) out[i] = x[i];
  }
}

std::vector<double> AllBaseline(std::size_t d, const Baseline& baseline) {
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = baseline.value(i);
  return out;
}

QualityScore CorrelationScore(std::span<const double> a, std::span<const double> b,
                              bool spearman) {
  try {
    return {spearman ? SpearmanRho(a, b) : PearsonR(a, b), false};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateCorrelation) throw;
    return {0.0, true};
  }
}

// f_y(x) - f_y(x with feature i baselined), for every i.
std::vector<double> SingleFeatureDrops(const Model& model, std::span<const double> x,
                                       int y, const Baseline& baseline) {
  const double full = model.Output(x, y);
  std::vector<double> drops(x.size());
  std::vector<double> probe(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = baseline.value(i);
    drops[i] = full - model.Output(probe, y);
    probe[i] = x[i];
  }
  return drops;
}

std::size_t TopKHits(std::span<const double> e, const GroundTruthMask& mask,
                     std::size_t k) {
  const Ranking desc = RankingDescending(e);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) hits += mask.contains(desc[i]) ? 1 : 0;
  return hits;
}

void CheckMaskLength(std::span<const double> e, const GroundTruthMask& mask) {
  CheckSameLength(e, mask.size());
}

}  // namespace

Baseline Baseline::FeatureMean(std::vector<double> mean) {
  if (mean.empty()) throw Error(ErrorCode::kInvalidArgument, "empty baseline mean");
  for (double v : mean) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite baseline");
  }
  return Baseline(std::move(mean));
}

std::string_view MetricName(MetricKind kind) {
  switch (kind) {
    case MetricKind::kPixelFlipping: return "pixel_flipping";
    case MetricKind::kFaithfulnessCorrelation: return "faithfulness_correlation";
    case MetricKind::kFaithfulnessEstimate: return "faithfulness_estimate";
    case MetricKind::kMonotonicityCorrelation: return "monotonicity_correlation";
    case MetricKind::kAttributionLocalisation: return "attribution_localisation";
    case MetricKind::kTopKIntersection: return "top_k_intersection";
    case MetricKind::kRelevanceRankAccuracy: return "relevance_rank_accuracy";
    case MetricKind::kRelevanceMassAccuracy: return "relevance_mass_accuracy";
    case MetricKind::kAuc: return "auc";
  }
  return "unknown";
}

MetricKind ParseMetric(std::string_view name) {
  for (MetricKind k :
       {MetricKind::kPixelFlipping, MetricKind::kFaithfulnessCorrelation,
        MetricKind::kFaithfulnessEstimate, MetricKind::kMonotonicityCorrelation,
        MetricKind::kAttributionLocalisation, MetricKind::kTopKIntersection,
        MetricKind::kRelevanceRankAccuracy, MetricKind::kRelevanceMassAccuracy,
        MetricKind::kAuc}) {
    if (MetricName(k) == name) return k;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown metric '" + std::string(name) + "'");
}

bool NeedsModel(MetricKind kind) {
  switch (kind) {
    case MetricKind::kPixelFlipping:
    case MetricKind::kFaithfulnessCorrelation:
    case MetricKind::kFaithfulnessEstimate:
    case MetricKind::kMonotonicityCorrelation:
      return true;
    default:
      return false;
  }
}

bool NeedsMask(MetricKind kind) { return !NeedsModel(kind); }

bool IsRankOnly(MetricKind kind) {
  return kind == MetricKind::kPixelFlipping ||
         kind == MetricKind::kTopKIntersection ||
         kind == MetricKind::kRelevanceRankAccuracy;
}

std::vector<double> MaskFeatures(std::span<const double> x,
                                 std::span<const double> e, int m,
                                 const Baseline& baseline,
                                 const FeatureGrouping* grouping) {
  CheckBaseline(baseline, x.size());
  const Attribution units = UnitAttribution(x, e, grouping);
  if (m < 0 || m > static_cast<int>(units.size())) {
    throw Error(ErrorCode::kInvalidM, "M=" + std::to_string(m) + " outside [0, " +
                                          std::to_string(units.size()) + "]");
  }
  const Ranking desc = RankingDescending(units);
  std::vector<double> out = AllBaseline(x.size(), baseline);
  for (int i = 0; i < m; ++i) Restore(out, x, desc[i], grouping);
  return out;
}

QualityScore PixelFlipping(const Model& model, std::span<const double> x, int y,
                           std::span<const double> e, const Baseline& baseline,
                           const FeatureGrouping* grouping) {
  CheckModelInput(model, x, y);
  CheckBaseline(baseline, x.size());
  const Attribution units = UnitAttribution(x, e, grouping);
  const Ranking desc = RankingDescending(units);
  std::vector<double> probe = AllBaseline(x.size(), baseline);
  double total = model.Output(probe, y);
  for (int unit : desc) {
    Restore(probe, x, unit, grouping);
    total += model.Output(probe, y);
  }
  return {total / static_cast<double>(units.size()), false};
}

QualityScore FaithfulnessCorrelation(const Model& model, std::span<const double> x,
                                     int y, std::span<const double> e, int runs,
                                     int subset_size, const Baseline& baseline,
                                     std::uint64_t seed) {
  CheckModelInput(model, x, y);
  CheckSameLength(e, x.size());
  CheckBaseline(baseline, x.size());
  const int d = static_cast<int>(x.size());
  if (subset_size < 1 || subset_size > d) {
    throw Error(ErrorCode::kInvalidArgument, "subset_size must be in [1, D]");
  }
  if (runs < 2) throw Error(ErrorCode::kInvalidArgument, "runs must be >= 2");

  const double full = model.Output(x, y);
  Rng rng(seed);
  std::vector<int> ids(d);
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> attribution_sums(runs), drops(runs);
  for (int r = 0; r < runs; ++r) {
    std::iota(ids.begin(), ids.end(), 0);
    // Partial Fisher-Yates: the first subset_size ids form the subset.
    for (int i = 0; i < subset_size; ++i) {
      std::uniform_int_distribution<int> pick(i, d - 1);
      std::swap(ids[i], ids[pick(rng)]);
    }
    double sum = 0.0;
    for (int i = 0; i < subset_size; ++i) {
      sum += e[ids[i]];
      probe[ids[i]] = baseline.value(ids[i]);
    }
    attribution_sums[r] = sum;
    drops[r] = full - model.Output(probe, y);
    for (int i = 0; i < subset_size; ++i) probe[ids[i]] = x[ids[i]];
  }
  return CorrelationScore(attribution_sums, drops, false);
}

QualityScore FaithfulnessEstimate(const Model& model, std::span<const double> x,
                                  int y, std::span<const double> e,
                                  const Baseline& baseline) {
  CheckModelInput(model, x, y);
  CheckSameLength(e, x.size());
  CheckBaseline(baseline, x.size());
  if (x.size() < 2) throw Error(ErrorCode::kInvalidArgument, "needs D >= 2");
  const std::vector<double> drops = SingleFeatureDrops(model, x, y, baseline);
  return CorrelationScore(e, drops, false);
}

QualityScore MonotonicityCorrelation(const Model& model, std::span<const double> x,
                                     int y, std::span<const double> e,
                                     const Baseline& baseline) {
  CheckModelInput(model, x, y);
  CheckSameLength(e, x.size());
  CheckBaseline(baseline, x.size());
  if (x.size() < 2) throw Error(ErrorCode::kInvalidArgument, "needs D >= 2");
  std::vector<double> drops = SingleFeatureDrops(model, x, y, baseline);
  for (double& v : drops) v *= v;
  std::vector<double> magnitude(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) magnitude[i] = std::abs(e[i]);
  return CorrelationScore(magnitude, drops, true);
}

QualityScore AttributionLocalisation(std::span<const double> e,
                                     const GroundTruthMask& mask) {
  CheckMaskLength(e, mask);
  double inside = 0.0, total = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double v = std::max(e[i], 0.0);
    total += v;
    if (mask.contains(i)) inside += v;
  }
  if (total <= 0.0) {
    throw Error(ErrorCode::kAllNonPositive, "attribution has no positive mass");
  }
  return {inside / total, false};
}

QualityScore RelevanceMassAccuracy(std::span<const double> e,
                                   const GroundTruthMask& mask) {
  return AttributionLocalisation(e, mask);
}

QualityScore TopKIntersection(std::span<const double> e,
                              const GroundTruthMask& mask, int k) {
  CheckMaskLength(e, mask);
  if (k < 1 || k > static_cast<int>(e.size())) {
    throw Error(ErrorCode::kInvalidK, "k=" + std::to_string(k) + " outside [1, D]");
  }
  return {static_cast<double>(TopKHits(e, mask, k)) / k, false};
}

QualityScore RelevanceRankAccuracy(std::span<const double> e,
                                   const GroundTruthMask& mask) {
  CheckMaskLength(e, mask);
  const std::size_t k = mask.count();
  return {static_cast<double>(TopKHits(e, mask, k)) / static_cast<double>(k), false};
}

QualityScore Auc(std::span<const double> e, const GroundTruthMask& mask) {
  CheckMaskLength(e, mask);
  const std::vector<double> ranks = AverageRanks(e);
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (mask.contains(i)) positive_rank_sum += ranks[i];
  }
  const double n_pos = static_cast<double>(mask.count());
  const double n_neg = static_cast<double>(mask.size() - mask.count());
  return {(positive_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg), false};
}

QualityScore EvaluateMetric(MetricKind kind, const MetricParams& params,
                            const MetricContext& context,
                            std::span<const double> e) {
  if (NeedsModel(kind) && context.model == nullptr) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(MetricName(kind)) + " needs a model");
  }
  if (NeedsMask(kind) && context.mask == nullptr) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(MetricName(kind)) + " needs a ground-truth mask");
  }
  const auto& x = context.x;
  switch (kind) {
    case MetricKind::kPixelFlipping:
      return PixelFlipping(*context.model, x, context.y, e, context.baseline,
                           context.grouping);
    case MetricKind::kFaithfulnessCorrelation: {
      const int d = static_cast<int>(x.size());
      const int subset = params.subset_size > 0
                             ? params.subset_size
                             : std::max(1, static_cast<int>(std::ceil(0.1 * d)));
      return FaithfulnessCorrelation(*context.model, x, context.y, e, params.runs,
                                     subset, context.baseline, params.seed);
    }
    case MetricKind::kFaithfulnessEstimate:
      return FaithfulnessEstimate(*context.model, x, context.y, e, context.baseline);
    case MetricKind::kMonotonicityCorrelation:
      return MonotonicityCorrelation(*context.model, x, context.y, e,
                                     context.baseline);
    case MetricKind::kAttributionLocalisation:
      return AttributionLocalisation(e, *context.mask);
    case MetricKind::kTopKIntersection: {
      const int k = params.top_k > 0 ? params.top_k
                                     : static_cast<int>(context.mask->count());
      return TopKIntersection(e, *context.mask, k);
    }
    case MetricKind::kRelevanceRankAccuracy:
      return RelevanceRankAccuracy(e, *context.mask);
    case MetricKind::kRelevanceMassAccuracy:
      return RelevanceMassAccuracy(e, *context.mask);
    case MetricKind::kAuc:
      return Auc(e, *context.mask);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown metric");
}

QualityFunction BindMetric(MetricKind kind, MetricParams params,
                           MetricContext context) {
  return [kind, params, context = std::move(context)](std::span<const double> e) {
    return EvaluateMetric(kind, params, context, e).value;
  };
}

}  // namespace qge
