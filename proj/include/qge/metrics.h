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

#ifndef QGE_METRICS_H_
#define QGE_METRICS_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "qge/core.h"
#include "qge/model.h"

namespace qge {

// Value that replaces a removed feature.
class Baseline {
 public:
  static Baseline Zeros() { return Baseline({}); }
  static Baseline FeatureMean(std::vector<double> mean);

  bool is_mean() const { return !mean_.empty(); }
  double value(std::size_t feature) const {
    return mean_.empty() ? 0.0 : mean_[feature];
  }
  const std::vector<double>& mean() const { return mean_; }

 private:
  explicit Baseline(std::vector<double> mean) : mean_(std::move(mean)) {}
  std::vector<double> mean_;
};

enum class MetricKind {
  kPixelFlipping,
  kFaithfulnessCorrelation,
  kFaithfulnessEstimate,
  kMonotonicityCorrelation,
  kAttributionLocalisation,
  kTopKIntersection,
  kRelevanceRankAccuracy,
  kRelevanceMassAccuracy,
  kAuc,
};

std::string_view MetricName(MetricKind kind);
MetricKind ParseMetric(std::string_view name);

// Every metric here scores better explanations higher.
constexpr bool HigherIsBetter(MetricKind) { return true; }
bool NeedsModel(MetricKind kind);
bool NeedsMask(MetricKind kind);
// Metrics whose value depends on the attribution only through its ranking.
bool IsRankOnly(MetricKind kind);

struct MetricParams {
  int runs = 100;          // faithfulness_correlation
  int subset_size = 0;     // 0: max(1, ceil(0.1 * D))
  int top_k = 0;           // 0: |mask|
  std::uint64_t seed = 0;  // faithfulness_correlation subsets
};

// Keeps the M most attributed features (RankingDescending order) and replaces
// the rest with the baseline. With a grouping, `e` holds one value per group
// (or one per raw feature, summed per group) and whole groups are kept.
std::vector<double> MaskFeatures(std::span<const double> x,
                                 std::span<const double> e, int m,
                                 const Baseline& baseline,
                                 const FeatureGrouping* grouping = nullptr);

// q = (1/D) * sum_{m=0..D} f_y(MaskFeatures(x, e, m)). The sum has D+1 terms
// over a divisor of D; the constant factor does not affect any ranking. With
// a grouping, D is the number of groups.
QualityScore PixelFlipping(const Model& model, std::span<const double> x, int y,
                           std::span<const double> e, const Baseline& baseline,
                           const FeatureGrouping* grouping = nullptr);

// Pearson correlation over `runs` random subsets S (|S| = subset_size) between
// sum_{i in S} e_i and f_y(x) - f_y(x with S baselined).
QualityScore FaithfulnessCorrelation(const Model& model, std::span<const double> x,
                                     int y, std::span<const double> e, int runs,
                                     int subset_size, const Baseline& baseline,
                                     std::uint64_t seed);

// Pearson correlation across features between e_i and the output drop when
// only feature i is baselined.
QualityScore FaithfulnessEstimate(const Model& model, std::span<const double> x,
                                  int y, std::span<const double> e,
                                  const Baseline& baseline);

// Spearman correlation between |e_i| and the squared single-feature drop.
QualityScore MonotonicityCorrelation(const Model& model, std::span<const double> x,
                                     int y, std::span<const double> e,
                                     const Baseline& baseline);

// Share of positive attribution mass inside the mask. Negative values are
// clamped to zero; throws kAllNonPositive when no mass is positive.
QualityScore AttributionLocalisation(std::span<const double> e,
                                     const GroundTruthMask& mask);

// Same formula as AttributionLocalisation (unweighted variant), kept as a
// separate metric id.
QualityScore RelevanceMassAccuracy(std::span<const double> e,
                                   const GroundTruthMask& mask);

// |top-k(e) intersect mask| / k.
QualityScore TopKIntersection(std::span<const double> e,
                              const GroundTruthMask& mask, int k);

// |top-|mask|(e) intersect mask| / |mask|.
QualityScore RelevanceRankAccuracy(std::span<const double> e,
                                   const GroundTruthMask& mask);

// ROC-AUC with mask as labels and e as scores (Mann-Whitney, average ranks).
QualityScore Auc(std::span<const double> e, const GroundTruthMask& mask);

// Everything a metric may need besides the explanation itself.
struct MetricContext {
  const Model* model = nullptr;
  std::vector<double> x;
  int y = 0;
  Baseline baseline = Baseline::Zeros();
  const GroundTruthMask* mask = nullptr;
  const FeatureGrouping* grouping = nullptr;
};

QualityScore EvaluateMetric(MetricKind kind, const MetricParams& params,
                            const MetricContext& context,
                            std::span<const double> e);

// q(e) for a fixed (metric, model, input, label).
using QualityFunction = std::function<double(std::span<const double>)>;

QualityFunction BindMetric(MetricKind kind, MetricParams params,
                           MetricContext context);

}  // namespace qge

#endif  // QGE_METRICS_H_
