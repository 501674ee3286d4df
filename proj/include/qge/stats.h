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

#ifndef QGE_STATS_H_
#define QGE_STATS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace qge {

// Kendall's tau-b in O(n log n) (merge-sort inversion counting with tie
// corrections). Throws kDegenerateCorrelation if either series is constant.
double KendallTau(std::span<const double> a, std::span<const double> b);

// Pearson correlation of average ranks.
double SpearmanRho(std::span<const double> a, std::span<const double> b);

double PearsonR(std::span<const double> a, std::span<const double> b);

// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> AverageRanks(std::span<const double> values);

// Two-sided p-value of the Wilcoxon signed-rank test for paired samples.
// Zero differences are dropped; the statistic uses the normal approximation
// with tie and continuity corrections. Throws kInsufficientData with fewer
// than five non-zero differences.
double WilcoxonSignedRank(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kWilcoxonMinSamples = 5;

struct StratumTau {
  double quantile = 1.0;
  std::size_t size = 0;
  std::optional<double> tau;  // empty when the stratum was skipped
};

inline const std::vector<double> kDefaultQuantiles = {1.0, 0.5, 0.25,
                                                      0.1, 0.05, 0.01};

// Kendall tau between q and qt restricted to the items whose q lies in the
// top `quantile` fraction (ceil(quantile * n) items, ties at the cut broken
// by index). Strata with fewer than two items or a constant series are
// skipped.
std::vector<StratumTau> StratifiedTau(std::span<const double> q,
                                      std::span<const double> qt,
                                      std::span<const double> quantiles);

// Indices of the top `quantile` fraction of `q` (descending, stable).
std::vector<std::size_t> TopFraction(std::span<const double> q, double quantile);

struct DeltaCorrelations {
  double delta_tau = 0.0;
  double delta_rho = 0.0;
};

// tau(q, qt_a) - tau(q, qt_b) and the same for Spearman's rho.
DeltaCorrelations DeltaCorrelation(std::span<const double> q,
                                   std::span<const double> qt_a,
                                   std::span<const double> qt_b);

double Mean(std::span<const double> v);
double StdDev(std::span<const double> v);  // population

}  // namespace qge

#endif  // QGE_STATS_H_
