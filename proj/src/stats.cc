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

#include "qge/stats.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "qge/error.h"

namespace qge {
namespace {

void CheckPaired(std::span<const double> a, std::span<const double> b,
                 std::size_t min_size) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kShapeError, "series lengths differ");
  }
  if (a.size() < min_size) {
    throw Error(ErrorCode::kInsufficientData,
                "need at least " + std::to_string(min_size) + " observations");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite observation");
    }
  }
}

// Number of tied pairs among consecutive equal runs of a sorted sequence.
template <typename Eq>
std::int64_t TiedPairs(std::size_t n, Eq equal) {
  std::int64_t ties = 0;
  std::int64_t run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (equal(i - 1, i)) {
      ++run;
    } else {
      ties += run * (run - 1) / 2;
      run = 1;
    }
  }
  return ties + run * (run - 1) / 2;
}

// Sorts `v` in place, returning the number of strict inversions.
std::int64_t MergeSortInversions(std::vector<double>& v, std::vector<double>& tmp,
                                 std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = MergeSortInversions(v, tmp, lo, mid) +
                       MergeSortInversions(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
  return swaps;
}

double NormalSurvival(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

double Mean(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::kInsufficientData, "mean of empty series");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double StdDev(std::span<const double> v) {
  const double m = Mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

double KendallTau(std::span<const double> a, std::span<const double> b) {
  CheckPaired(a, b, 2);
  const std::size_t n = a.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
  });

  const std::int64_t total = static_cast<std::int64_t>(n) * (static_cast<std::int64_t>(n) - 1) / 2;
  const std::int64_t ties_a = TiedPairs(n, [&](std::size_t i, std::size_t j) {
    return a[order[i]] == a[order[j]];
  });
  const std::int64_t ties_ab = TiedPairs(n, [&](std::size_t i, std::size_t j) {
    return a[order[i]] == a[order[j]] && b[order[i]] == b[order[j]];
  });

  std::vector<double> bs(n);
  for (std::size_t i = 0; i < n; ++i) bs[i] = b[order[i]];
  std::vector<double> tmp(n);
  const std::int64_t discordant = MergeSortInversions(bs, tmp, 0, n);
  const std::int64_t ties_b = TiedPairs(n, [&](std::size_t i, std::size_t j) {
    return bs[i] == bs[j];
  });

  if (ties_a == total || ties_b == total) {
    throw Error(ErrorCode::kDegenerateCorrelation, "constant series in kendall_tau");
  }
  // concordant - discordant = total - ties_a - ties_b + ties_ab - 2*discordant
  const double numerator = static_cast<double>(total - ties_a - ties_b + ties_ab) -
                           2.0 * static_cast<double>(discordant);
  const double denominator = std::sqrt(static_cast<double>(total - ties_a) *
                                       static_cast<double>(total - ties_b));
  return std::clamp(numerator / denominator, -1.0, 1.0);
}

std::vector<double> AverageRanks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1..j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

double PearsonR(std::span<const double> a, std::span<const double> b) {
  CheckPaired(a, b, 2);
  const double ma = Mean(a);
  const double mb = Mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw Error(ErrorCode::kDegenerateCorrelation, "constant series in correlation");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double SpearmanRho(std::span<const double> a, std::span<const double> b) {
  CheckPaired(a, b, 2);
  const std::vector<double> ra = AverageRanks(a);
  const std::vector<double> rb = AverageRanks(b);
  return PearsonR(ra, rb);
}

double WilcoxonSignedRank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShapeError, "series lengths differ");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (!std::isfinite(d)) throw Error(ErrorCode::kInvalidArgument, "non-finite observation");
    if (d != 0.0) diffs.push_back(d);
  }
  const std::size_t n = diffs.size();
  if (n < kWilcoxonMinSamples) {
    throw Error(ErrorCode::kInsufficientData,
                "only " + std::to_string(n) + " non-zero differences");
  }
  std::vector<double> magnitudes(n);
  for (std::size_t i = 0; i < n; ++i) magnitudes[i] = std::abs(diffs[i]);
  const std::vector<double> ranks = AverageRanks(magnitudes);
  double r_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0.0) r_plus += ranks[i];
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  double variance = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  std::vector<double> sorted = magnitudes;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    variance -= (t * t * t - t) / 48.0;
    i = j;
  }
  const double deviation = std::max(std::abs(r_plus - mean) - 0.5, 0.0);
  const double z = deviation / std::sqrt(variance);
  return std::clamp(2.0 * NormalSurvival(z), 0.0, 1.0);
}

std::vector<std::size_t> TopFraction(std::span<const double> q, double quantile) {
  if (!(quantile > 0.0 && quantile <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "quantile must be in (0, 1]");
  }
  std::vector<std::size_t> order(q.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return q[i] > q[j]; });
  const auto keep = static_cast<std::size_t>(
      std::ceil(quantile * static_cast<double>(q.size()) - 1e-9));
  order.resize(std::min(keep, q.size()));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<StratumTau> StratifiedTau(std::span<const double> q,
                                      std::span<const double> qt,
                                      std::span<const double> quantiles) {
  if (q.size() != qt.size()) throw Error(ErrorCode::kShapeError, "series lengths differ");
  std::vector<StratumTau> out;
  for (double p : quantiles) {
    StratumTau stratum;
    stratum.quantile = p;
    const std::vector<std::size_t> idx = TopFraction(q, p);
    stratum.size = idx.size();
    if (idx.size() >= 2) {
      std::vector<double> sq, sqt;
      for (std::size_t i : idx) {
        sq.push_back(q[i]);
        sqt.push_back(qt[i]);
      }
      try {
        stratum.tau = KendallTau(sq, sqt);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateCorrelation) throw;
      }
    }
    out.push_back(stratum);
  }
  return out;
}

DeltaCorrelations DeltaCorrelation(std::span<const double> q,
                                   std::span<const double> qt_a,
                                   std::span<const double> qt_b) {
  DeltaCorrelations d;
  d.delta_tau = KendallTau(q, qt_a) - KendallTau(q, qt_b);
  d.delta_rho = SpearmanRho(q, qt_a) - SpearmanRho(q, qt_b);
  return d;
}

}  // namespace qge
