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

#ifndef QGE_TRANSFORM_H_
#define QGE_TRANSFORM_H_

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qge/core.h"
#include "qge/metrics.h"

namespace qge {

enum class TransformKind { kNone, kQge, kQrand };

struct TransformSpec {
  TransformKind kind = TransformKind::kNone;
  int k = 1;               // qrand only
  std::uint64_t seed = 0;  // qrand only; mixed with the item index
};

// "none", "qge", "qrand_<K>".
std::string TransformLabel(const TransformSpec& spec);
TransformSpec ParseTransform(const std::string& label, std::uint64_t seed = 0);

// q(e) - q(InvertExplanation(e)). Evaluates q exactly twice.
double Qge(const QualityFunction& q, std::span<const double> e);

// q(e) minus the mean quality of k random explanations drawn with
// SampleExplanations(D, k, seed). Evaluates q exactly k + 1 times.
double QrandK(const QualityFunction& q, std::span<const double> e, int k,
              std::uint64_t seed);

// QRAND_1 .. QRAND_kmax for one explanation, sharing the random samples: entry
// k-1 equals QrandK(q, e, k, seed). Evaluates q kmax + 1 times.
std::vector<double> QrandSweep(const QualityFunction& q, std::span<const double> e,
                               int kmax, std::uint64_t seed);

// Evaluates `spec` for the explanation at position `item` of a batch; the
// qrand seed is DeriveSeed(spec.seed, item). Returns {q, qt}.
std::pair<double, double> ApplyTransform(const TransformSpec& spec,
                                         const QualityFunction& q,
                                         std::span<const double> e,
                                         std::uint64_t item);

// Wraps a quality function and counts its evaluations.
class CountingQuality {
 public:
  explicit CountingQuality(QualityFunction inner) : inner_(std::move(inner)) {}

  QualityFunction function() {
    return [this](std::span<const double> e) {
      calls_.fetch_add(1, std::memory_order_relaxed);
      return inner_(e);
    };
  }
  std::int64_t calls() const { return calls_.load(); }
  void reset() { calls_.store(0); }

 private:
  QualityFunction inner_;
  std::atomic<std::int64_t> calls_{0};
};

}  // namespace qge

#endif  // QGE_TRANSFORM_H_
