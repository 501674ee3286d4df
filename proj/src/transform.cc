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

#include "qge/transform.h"

#include <charconv>

#include "qge/error.h"
#include "qge/explain.h"
#include "qge/random.h"

namespace qge {

std::string TransformLabel(const TransformSpec& spec) {
  switch (spec.kind) {
    case TransformKind::kNone: return "none";
    case TransformKind::kQge: return "qge";
    case TransformKind::kQrand: return "qrand_" + std::to_string(spec.k);
  }
  return "unknown";
}

TransformSpec ParseTransform(const std::string& label, std::uint64_t seed) {
  if (label == "none") return {TransformKind::kNone, 1, seed};
  if (label == "qge") return {TransformKind::kQge, 1, seed};
  const std::string prefix = "qrand_";
  if (label.rfind(prefix, 0) == 0) {
    int k = 0;
    const char* first = label.data() + prefix.size();
    const char* last = label.data() + label.size();
    auto [ptr, ec] = std::from_chars(first, last, k);
    if (ec == std::errc() && ptr == last && k >= 1) {
      return {TransformKind::kQrand, k, seed};
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown transform '" + label + "'");
}

double Qge(const QualityFunction& q, std::span<const double> e) {
  const Attribution inverse = InvertExplanation(e);
  return q(e) - q(inverse);
}

double QrandK(const QualityFunction& q, std::span<const double> e, int k,
              std::uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  ValidateAttribution(e);
  const double base = q(e);
  double sum = 0.0;
  for (const Attribution& r : SampleExplanations(static_cast<int>(e.size()), k, seed)) {
    sum += q(r);
  }
  return base - sum / k;
}

std::vector<double> QrandSweep(const QualityFunction& q, std::span<const double> e,
                               int kmax, std::uint64_t seed) {
  if (kmax < 1) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  ValidateAttribution(e);
  const double base = q(e);
  std::vector<double> out(kmax);
  double sum = 0.0;
  const auto samples = SampleExplanations(static_cast<int>(e.size()), kmax, seed);
  for (int k = 1; k <= kmax; ++k) {
    sum += q(samples[k - 1]);
    out[k - 1] = base - sum / k;
  }
  return out;
}

std::pair<double, double> ApplyTransform(const TransformSpec& spec,
                                         const QualityFunction& q,
                                         std::span<const double> e,
                                         std::uint64_t item) {
  switch (spec.kind) {
    case TransformKind::kNone: {
      const double v = q(e);
      return {v, v};
    }
    case TransformKind::kQge: {
      const double qe = q(e);
      return {qe, qe - q(InvertExplanation(e))};
    }
    case TransformKind::kQrand: {
      const std::uint64_t seed = DeriveSeed(spec.seed, item);
      const double qe = q(e);
      double sum = 0.0;
      for (const Attribution& r :
           SampleExplanations(static_cast<int>(e.size()), spec.k, seed)) {
        sum += q(r);
      }
      return {qe, qe - sum / spec.k};
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown transform");
}

}  // namespace qge
