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

#ifndef QGE_EXPLORE_H_
#define QGE_EXPLORE_H_

#include <cstdint>
#include <span>
#include <vector>

#include "qge/core.h"
#include "qge/metrics.h"
#include "qge/transform.h"

namespace qge {

// Batch evaluation kernels. Each comes as an OpenMP-parallel version and a
// plain serial reference; both produce identical results because every item
// derives its random stream from (seed, item index) alone.

struct ScoreSeries {
  std::vector<double> q;
  std::vector<double> qt;
};

// Aligned (q, qt) for every explanation. `threads` <= 0 uses the OpenMP
// default.
ScoreSeries TransformSeries(const TransformSpec& spec, const QualityFunction& q,
                            std::span<const Attribution> explanations,
                            int threads = 0);
ScoreSeries TransformSeriesSerial(const TransformSpec& spec,
                                  const QualityFunction& q,
                                  std::span<const Attribution> explanations);

struct ExploreOptions {
  int qrand_kmax = 10;
  std::uint64_t seed = 0;
  int threads = 0;
  int chunks = 0;  // permutation chunks; 0 picks 8 per thread
};

// q, QGE and QRAND_1..QRAND_kmax for a set of explanations. qrand[k-1][i] is
// QrandK(q, e_i, k, DeriveSeed(seed, i)).
struct Exploration {
  std::vector<double> q;
  std::vector<double> qge;
  std::vector<std::vector<double>> qrand;

  std::size_t size() const { return q.size(); }
};

// Every ranking of D features, in lexicographic order (item i is permutation
// number i). Throws kRefuseExhaustive for D > 10.
Exploration ExploreExhaustive(const QualityFunction& q, int d,
                              const ExploreOptions& options);
Exploration ExploreExhaustiveSerial(const QualityFunction& q, int d,
                                    const ExploreOptions& options);

Exploration ExploreExplanations(const QualityFunction& q,
                                std::span<const Attribution> explanations,
                                const ExploreOptions& options);
Exploration ExploreExplanationsSerial(const QualityFunction& q,
                                      std::span<const Attribution> explanations,
                                      const ExploreOptions& options);

}  // namespace qge

#endif  // QGE_EXPLORE_H_
