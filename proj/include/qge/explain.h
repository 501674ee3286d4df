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

#ifndef QGE_EXPLAIN_H_
#define QGE_EXPLAIN_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qge/core.h"
#include "qge/model.h"

namespace qge {

enum class ExplainerKind {
  kRandom,
  kSaliency,
  kInputXGradient,
  kIntegratedGradients,
  kOracleLinear,
};

std::string_view ExplainerName(ExplainerKind kind);
ExplainerKind ParseExplainer(std::string_view name);

inline constexpr int kIntegratedGradientSteps = 20;

// random: i.i.d. uniform(0,1) values from `seed`.
// saliency: |df_y/dx|.
// input_x_gradient: x * df_y/dx.
// integrated_gradients: x * mean of df_y/dx at x*s/S for s = 1..S (zero
//   baseline, right-endpoint Riemann sum).
// oracle_linear: row y of the weight matrix of a single-layer model; throws
//   kUnsupportedExplainer for anything else.
Attribution Explain(ExplainerKind kind, const Model& model,
                    std::span<const double> x, int y, std::uint64_t seed = 0);

Attribution IntegratedGradients(const Model& model, std::span<const double> x,
                                int y, int steps,
                                std::span<const double> baseline = {});

inline constexpr int kMaxExhaustiveFeatures = 10;

std::uint64_t Factorial(int n);

// The permutation with lexicographic index `index` (factorial number system).
Ranking NthPermutation(int d, std::uint64_t index);

// Lexicographic permutations of 0..D-1 restricted to indices [begin, end).
// Disjoint chunks covering [0, D!) together yield every permutation exactly
// once, which is how exhaustive exploration is split across workers.
class PermutationStream {
 public:
  explicit PermutationStream(int d);
  PermutationStream(int d, std::uint64_t begin, std::uint64_t end);

  // Writes the next permutation into `out`; false when the range is done.
  bool Next(Ranking& out);

  std::uint64_t position() const { return next_index_; }
  std::uint64_t end() const { return end_; }
  int feature_count() const { return d_; }

 private:
  int d_;
  std::uint64_t next_index_;
  std::uint64_t end_;
  Ranking current_;
};

// Splits [0, total) into `chunks` contiguous near-equal ranges.
std::vector<std::pair<std::uint64_t, std::uint64_t>> ChunkRanges(
    std::uint64_t total, std::uint64_t chunks);

// Every ranking of D features as an attribution (value = ascending rank).
// Throws kRefuseExhaustive above kMaxExhaustiveFeatures.
std::vector<Attribution> EnumerateRankings(int d);

// n vectors of D i.i.d. uniform(0,1) draws. Generated sequentially, so the
// first k vectors for a seed do not depend on n.
std::vector<Attribution> SampleExplanations(int d, int n, std::uint64_t seed);

struct ExplanationRecord {
  std::string input_id;
  std::string explainer;
  std::uint64_t seed = 0;
  Attribution values;
};

// One JSON object per line: {input_id, explainer, seed, values}.
void WriteExplanationsJsonl(std::ostream& out,
                            std::span<const ExplanationRecord> records);
std::vector<ExplanationRecord> ReadExplanationsJsonl(std::istream& in);

}  // namespace qge

#endif  // QGE_EXPLAIN_H_
