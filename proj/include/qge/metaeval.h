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

#ifndef QGE_METAEVAL_H_
#define QGE_METAEVAL_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qge/core.h"
#include "qge/explain.h"
#include "qge/metrics.h"
#include "qge/model.h"
#include "qge/transform.h"

namespace qge {

// Simplified, explicit realizations of the intra-/inter-consistency
// estimators used for metric meta-evaluation. They follow the structure of
// the MetaQuantus protocol (minor vs. disruptive perturbations of inputs or
// models) but are not its exact estimators.

enum class PerturbTarget { kInput, kModel };
enum class Severity { kMinor, kDisruptive };

std::string_view TargetName(PerturbTarget target);
std::string_view SeverityName(Severity severity);

struct PerturbationSpec {
  PerturbTarget target = PerturbTarget::kInput;
  Severity severity = Severity::kMinor;
  double minor_sigma = 0.01;
  int trials = 5;
  std::uint64_t seed = 0;
};

// input/minor: Gaussian noise with per-feature sigma = minor_sigma * std of
//   that feature over `inputs`.
// input/disruptive: every feature resampled uniformly over its observed range.
std::vector<Instance> PerturbInputs(const PerturbationSpec& spec,
                                    std::span<const Instance> inputs, int trial);

// model/minor: Gaussian noise on every layer's parameters with sigma =
//   minor_sigma * std of that layer's weights.
// model/disruptive: parameters redrawn from the init distribution.
MlpModel PerturbModel(const PerturbationSpec& spec, const MlpModel& model,
                      int trial);

struct ConsistencyVector {
  double iac_nr = 0.0;
  double iac_ar = 0.0;
  double iec_nr = 0.0;
  double iec_ar = 0.0;
};

// Mean of the four components; throws kInvalidComponent outside [0, 1].
double McScore(const ConsistencyVector& v);

// Scores indexed [method][input].
using MethodScores = std::vector<std::vector<double>>;

// An averaged estimate; empty when every contributing cell was skipped.
struct CellEstimate {
  std::optional<double> value;
  int used = 0;
  int skipped = 0;
};

// Mean Wilcoxon p-value between baseline and perturbed scores over methods
// and trials: p for minor perturbations, 1 - p for disruptive ones. Cells with
// too few non-zero differences are skipped.
CellEstimate Iac(const MethodScores& baseline,
                 std::span<const MethodScores> perturbed, Severity severity);

// minor: mean over (input, trial) of the fraction of method pairs whose score
//   order (including ties) survives the perturbation. Needs two methods.
// disruptive: mean over (method, input, trial) of [perturbed < baseline].
CellEstimate Iec(const MethodScores& baseline,
                 std::span<const MethodScores> perturbed, Severity severity);

// A quality measure as seen by the meta-evaluation driver.
struct MetricHandle {
  std::string name;
  std::function<double(const MetricContext&, std::span<const double>)> evaluate;
};

MetricHandle StandardMetric(MetricKind kind, MetricParams params = {});

struct MetaEvalConfig {
  std::vector<MetricHandle> metrics;
  std::vector<TransformSpec> transforms;
  std::vector<ExplainerKind> explainers = {ExplainerKind::kSaliency,
                                           ExplainerKind::kIntegratedGradients,
                                           ExplainerKind::kInputXGradient};
  int trials = 5;
  int repetitions = 3;
  double minor_sigma = 0.01;
  std::uint64_t seed = 0;
  bool mean_baseline = false;  // baseline = mean of the inputs, else zeros
  const FeatureGrouping* grouping = nullptr;
  int threads = 0;
};

// One (metric, transform, target) cell of the report, averaged over
// repetitions.
struct MetaEvalRow {
  std::string metric;
  std::string transform;
  PerturbTarget target = PerturbTarget::kInput;
  CellEstimate iac_nr, iac_ar, iec_nr, iec_ar;
  // Mean of the available components; `degenerate` when any was skipped.
  std::optional<double> mc;
  bool degenerate = false;
};

struct MetaEvalSummary {
  std::string metric;
  std::string transform;
  std::optional<double> mc;  // mean over input and model tests
  bool degenerate = false;
};

struct MetaEvalReport {
  std::vector<MetaEvalRow> rows;
  std::vector<MetaEvalSummary> summary;
  int trials = 0;
  int repetitions = 0;
  std::uint64_t seed = 0;
  int metric_errors = 0;  // scores set to 0 after a metric error

  nlohmann::json ToJson() const;
};

// Full cross of {input, model} x {minor, disruptive} for every metric and
// transform. Labels come from the instances; `masks` is either empty or
// aligned with `inputs`.
MetaEvalReport RunMetaEval(const MetaEvalConfig& config, const MlpModel& model,
                           std::span<const Instance> inputs,
                           std::span<const GroundTruthMask> masks);

}  // namespace qge

#endif  // QGE_METAEVAL_H_
