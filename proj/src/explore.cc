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

#include "qge/explore.h"

#include "parallel.h"
#include "qge/error.h"
#include "qge/explain.h"
#include "qge/random.h"

namespace qge {
namespace {

using internal::ExceptionSlot;
using internal::ResolveThreads;

Exploration Allocate(std::size_t n, int kmax) {
  if (kmax < 1) throw Error(ErrorCode::kInvalidArgument, "qrand_kmax must be >= 1");
  Exploration out;
  out.q.resize(n);
  out.qge.resize(n);
  out.qrand.assign(kmax, std::vector<double>(n));
  return out;
}

void EvaluateItem(const QualityFunction& q, std::span<const double> e,
                  std::uint64_t item, const ExploreOptions& options,
                  Exploration& out) {
  const std::vector<double> sweep =
      QrandSweep(q, e, options.qrand_kmax, DeriveSeed(options.seed, item));
  const double qe = q(e);
  out.q[item] = qe;
  out.qge[item] = qe - q(InvertExplanation(e));
  for (int k = 0; k < options.qrand_kmax; ++k) out.qrand[k][item] = sweep[k];
}

}  // namespace

ScoreSeries TransformSeries(const TransformSpec& spec, const QualityFunction& q,
                            std::span<const Attribution> explanations,
                            int threads) {
  if (explanations.empty()) throw Error(ErrorCode::kInvalidArgument, "no explanations");
  const auto n = static_cast<std::int64_t>(explanations.size());
  ScoreSeries out{std::vector<double>(n), std::vector<double>(n)};
  ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic, 16) num_threads(ResolveThreads(threads))
  for (std::int64_t i = 0; i < n; ++i) {
    slot.Run([&] {
      auto [qv, qt] = ApplyTransform(spec, q, explanations[i], i);
      out.q[i] = qv;
      out.qt[i] = qt;
    });
  }
  slot.Rethrow();
  return out;
}

ScoreSeries TransformSeriesSerial(const TransformSpec& spec,
                                  const QualityFunction& q,
                                  std::span<const Attribution> explanations) {
  if (explanations.empty()) throw Error(ErrorCode::kInvalidArgument, "no explanations");
  ScoreSeries out;
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    auto [qv, qt] = ApplyTransform(spec, q, explanations[i], i);
    out.q.push_back(qv);
    out.qt.push_back(qt);
  }
  return out;
}

Exploration ExploreExhaustive(const QualityFunction& q, int d,
                              const ExploreOptions& options) {
  PermutationStream probe(d);  // validates D
  const std::uint64_t total = probe.end();
  Exploration out = Allocate(total, options.qrand_kmax);
  const int threads = ResolveThreads(options.threads);
  const auto chunks = ChunkRanges(
      total, options.chunks > 0 ? options.chunks : static_cast<std::uint64_t>(8 * threads));
  const auto n_chunks = static_cast<std::int64_t>(chunks.size());
  ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    slot.Run([&] {
      PermutationStream stream(d, chunks[c].first, chunks[c].second);
      Ranking ranking;
      while (true) {
        const std::uint64_t item = stream.position();
        if (!stream.Next(ranking)) break;
        EvaluateItem(q, RankingToAttribution(ranking), item, options, out);
      }
    });
  }
  slot.Rethrow();
  return out;
}

Exploration ExploreExhaustiveSerial(const QualityFunction& q, int d,
                                    const ExploreOptions& options) {
  const std::vector<Attribution> all = EnumerateRankings(d);
  Exploration out = Allocate(all.size(), options.qrand_kmax);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const Attribution& e = all[i];
    const std::uint64_t seed = DeriveSeed(options.seed, i);
    out.q[i] = q(e);
    out.qge[i] = Qge(q, e);
    for (int k = 1; k <= options.qrand_kmax; ++k) {
      out.qrand[k - 1][i] = QrandK(q, e, k, seed);
    }
  }
  return out;
}

Exploration ExploreExplanations(const QualityFunction& q,
                                std::span<const Attribution> explanations,
                                const ExploreOptions& options) {
  if (explanations.empty()) throw Error(ErrorCode::kInvalidArgument, "no explanations");
  Exploration out = Allocate(explanations.size(), options.qrand_kmax);
  const auto n = static_cast<std::int64_t>(explanations.size());
  ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic, 16) num_threads(ResolveThreads(options.threads))
  for (std::int64_t i = 0; i < n; ++i) {
    slot.Run([&] { EvaluateItem(q, explanations[i], i, options, out); });
  }
  slot.Rethrow();
  return out;
}

Exploration ExploreExplanationsSerial(const QualityFunction& q,
                                      std::span<const Attribution> explanations,
                                      const ExploreOptions& options) {
  if (explanations.empty()) throw Error(ErrorCode::kInvalidArgument, "no explanations");
  Exploration out = Allocate(explanations.size(), options.qrand_kmax);
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    const Attribution& e = explanations[i];
    const std::uint64_t seed = DeriveSeed(options.seed, i);
    out.q[i] = q(e);
    out.qge[i] = Qge(q, e);
    for (int k = 1; k <= options.qrand_kmax; ++k) {
      out.qrand[k - 1][i] = QrandK(q, e, k, seed);
    }
  }
  return out;
}

}  // namespace qge
