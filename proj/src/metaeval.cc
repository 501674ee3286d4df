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

#include "qge/metaeval.h"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "parallel.h"
#include "qge/data.h"
#include "qge/error.h"
#include "qge/random.h"
#include "qge/stats.h"

namespace qge {
namespace {

using internal::ExceptionSlot;
using internal::ResolveThreads;

constexpr PerturbTarget kTargets[] = {PerturbTarget::kInput, PerturbTarget::kModel};
constexpr Severity kSeverities[] = {Severity::kMinor, Severity::kDisruptive};

int Sign(double v) { return (v > 0.0) - (v < 0.0); }

void CheckShapes(const MethodScores& baseline, std::span<const MethodScores> perturbed) {
  if (baseline.empty() || baseline[0].empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no baseline scores");
  }
  for (const MethodScores& trial : perturbed) {
    if (trial.size() != baseline.size()) {
      throw Error(ErrorCode::kShapeError, "method count differs between trials");
    }
    for (std::size_t m = 0; m < trial.size(); ++m) {
      if (trial[m].size() != baseline[m].size()) {
        throw Error(ErrorCode::kShapeError, "input count differs between trials");
      }
    }
  }
}

CellEstimate Finish(double sum, int used, int skipped) {
  CellEstimate out;
  out.used = used;
  out.skipped = skipped;
  if (used > 0) out.value = sum / used;
  return out;
}

// Mean of the estimates that have a value, pooling the cell counts.
CellEstimate Pool(const std::vector<CellEstimate>& parts) {
  double sum = 0.0;
  int available = 0;
  CellEstimate out;
  for (const CellEstimate& p : parts) {
    out.used += p.used;
    out.skipped += p.skipped;
    if (p.value) {
      sum += *p.value;
      ++available;
    }
  }
  if (available > 0) out.value = sum / available;
  return out;
}

nlohmann::json OptionalJson(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

// Scores indexed [metric][transform][method][input].
using ScoreTable = std::vector<std::vector<MethodScores>>;

ScoreTable ScoreAll(const MetaEvalConfig& config, const Model& model,
                    std::span<const Instance> inputs,
                    std::span<const GroundTruthMask> masks, const Baseline& baseline,
                    std::uint64_t seed, std::atomic<int>& metric_errors) {
  const std::size_t n_metrics = config.metrics.size();
  const std::size_t n_transforms = config.transforms.size();
  const std::size_t n_methods = config.explainers.size();
  const std::size_t n = inputs.size();
  ScoreTable table(n_metrics,
                   std::vector<MethodScores>(n_transforms,
                                             MethodScores(n_methods, std::vector<double>(n))));
  const auto items = static_cast<std::int64_t>(n_methods * n);
  const int threads = ResolveThreads(config.threads);
  ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
  for (std::int64_t item = 0; item < items; ++item) {
    slot.Run([&] {
      const std::size_t m = static_cast<std::size_t>(item) / n;
      const std::size_t i = static_cast<std::size_t>(item) % n;
      const Instance& inst = inputs[i];
      const int y = *inst.label;
      const Attribution e = Explain(config.explainers[m], model, inst.features, y,
                                    DeriveSeed(seed, static_cast<std::uint64_t>(item)));
      MetricContext context;
      context.model = &model;
      context.x = inst.features;
      context.y = y;
      context.baseline = baseline;
      context.mask = masks.empty() ? nullptr : &masks[i];
      context.grouping = config.grouping;
      for (std::size_t k = 0; k < n_metrics; ++k) {
        const MetricHandle& metric = config.metrics[k];
        const QualityFunction q = [&](std::span<const double> v) {
          return metric.evaluate(context, v);
        };
        for (std::size_t t = 0; t < n_transforms; ++t) {
          TransformSpec spec = config.transforms[t];
          spec.seed = DeriveSeed(seed, 0x7a11 + t);
          double score = 0.0;
          try {
            score = ApplyTransform(spec, q, e, static_cast<std::uint64_t>(item)).second;
          } catch (const Error& err) {
            if (err.code() != ErrorCode::kAllNonPositive &&
                err.code() != ErrorCode::kDegenerateCorrelation) {
              throw;
            }
            metric_errors.fetch_add(1, std::memory_order_relaxed);
          }
          table[k][t][m][i] = score;
        }
      }
    });
  }
  slot.Rethrow();
  return table;
}

}  // namespace

std::string_view TargetName(PerturbTarget target) {
  return target == PerturbTarget::kInput ? "input" : "model";
}

std::string_view SeverityName(Severity severity) {
  return severity == Severity::kMinor ? "minor" : "disruptive";
}

std::vector<Instance> PerturbInputs(const PerturbationSpec& spec,
                                    std::span<const Instance> inputs, int trial) {
  if (inputs.empty()) throw Error(ErrorCode::kEmptyDataset, "no inputs to perturb");
  if (!(spec.minor_sigma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "minor_sigma must be positive");
  }
  Rng rng(DeriveSeed(spec.seed, static_cast<std::uint64_t>(trial)));
  std::vector<Instance> out(inputs.begin(), inputs.end());
  const std::size_t d = inputs[0].features.size();
  if (spec.severity == Severity::kMinor) {
    const std::vector<double> stds = FeatureStds(inputs);
    for (Instance& inst : out) {
      for (std::size_t j = 0; j < d; ++j) {
        std::normal_distribution<double> noise(0.0, spec.minor_sigma * stds[j]);
        if (stds[j] > 0.0) inst.features[j] += noise(rng);
      }
    }
  } else {
    std::vector<double> lo(d, INFINITY), hi(d, -INFINITY);
    for (const Instance& inst : inputs) {
      for (std::size_t j = 0; j < d; ++j) {
        lo[j] = std::min(lo[j], inst.features[j]);
        hi[j] = std::max(hi[j], inst.features[j]);
      }
    }
    for (Instance& inst : out) {
      for (std::size_t j = 0; j < d; ++j) {
        inst.features[j] = lo[j] + (hi[j] - lo[j]) * UniformOpen01(rng);
      }
    }
  }
  return out;
}

MlpModel PerturbModel(const PerturbationSpec& spec, const MlpModel& model,
                      int trial) {
  if (!(spec.minor_sigma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "minor_sigma must be positive");
  }
  const std::uint64_t seed = DeriveSeed(spec.seed, static_cast<std::uint64_t>(trial));
  if (spec.severity == Severity::kDisruptive) return model.Reinitialized(seed);
  Rng rng(seed);
  MlpModel out = model;
  for (DenseLayer& layer : out.mutable_layers()) {
    const double sigma = spec.minor_sigma * StdDev(layer.weights);
    if (sigma <= 0.0) continue;
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& w : layer.weights) w += noise(rng);
    for (double& b : layer.biases) b += noise(rng);
  }
  return out;
}

double McScore(const ConsistencyVector& v) {
  for (double c : {v.iac_nr, v.iac_ar, v.iec_nr, v.iec_ar}) {
    if (!(c >= 0.0 && c <= 1.0)) {
      throw Error(ErrorCode::kInvalidComponent, "consistency component outside [0, 1]");
    }
  }
  return (v.iac_nr + v.iac_ar + v.iec_nr + v.iec_ar) / 4.0;
}

CellEstimate Iac(const MethodScores& baseline,
                 std::span<const MethodScores> perturbed, Severity severity) {
  CheckShapes(baseline, perturbed);
  double sum = 0.0;
  int used = 0, skipped = 0;
  for (const MethodScores& trial : perturbed) {
    for (std::size_t m = 0; m < baseline.size(); ++m) {
      try {
        const double p = WilcoxonSignedRank(baseline[m], trial[m]);
        sum += severity == Severity::kMinor ? p : 1.0 - p;
        ++used;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kInsufficientData) throw;
        ++skipped;
      }
    }
  }
  return Finish(sum, used, skipped);
}

CellEstimate Iec(const MethodScores& baseline,
                 std::span<const MethodScores> perturbed, Severity severity) {
  CheckShapes(baseline, perturbed);
  const std::size_t methods = baseline.size();
  const std::size_t n = baseline[0].size();
  double sum = 0.0;
  int used = 0;
  if (severity == Severity::kMinor) {
    if (methods < 2) {
      throw Error(ErrorCode::kNeedTwoMethods, "inter-consistency needs two methods");
    }
    for (const MethodScores& trial : perturbed) {
      for (std::size_t i = 0; i < n; ++i) {
        int preserved = 0, pairs = 0;
        for (std::size_t a = 0; a < methods; ++a) {
          for (std::size_t b = a + 1; b < methods; ++b) {
            ++pairs;
            if (Sign(baseline[a][i] - baseline[b][i]) == Sign(trial[a][i] - trial[b][i])) {
              ++preserved;
            }
          }
        }
        sum += static_cast<double>(preserved) / pairs;
        ++used;
      }
    }
  } else {
    for (const MethodScores& trial : perturbed) {
      for (std::size_t m = 0; m < methods; ++m) {
        for (std::size_t i = 0; i < n; ++i) {
          sum += trial[m][i] < baseline[m][i] ? 1.0 : 0.0;
          ++used;
        }
      }
    }
  }
  return Finish(sum, used, 0);
}

MetricHandle StandardMetric(MetricKind kind, MetricParams params) {
  return {std::string(MetricName(kind)),
          [kind, params](const MetricContext& context, std::span<const double> e) {
            return EvaluateMetric(kind, params, context, e).value;
          }};
}

nlohmann::json MetaEvalReport::ToJson() const {
  nlohmann::json tests = nlohmann::json::array();
  for (const MetaEvalRow& row : rows) {
    for (Severity severity : kSeverities) {
      const bool minor = severity == Severity::kMinor;
      tests.push_back({{"metric", row.metric},
                       {"transform", row.transform},
                       {"test", {{"target", TargetName(row.target)},
                                 {"severity", SeverityName(severity)}}},
                       {"iac", OptionalJson(minor ? row.iac_nr.value : row.iac_ar.value)},
                       {"iec", OptionalJson(minor ? row.iec_nr.value : row.iec_ar.value)},
                       {"mc", OptionalJson(row.mc)},
                       {"degenerate", row.degenerate},
                       {"trials", trials},
                       {"repetitions", repetitions},
                       {"seeds", {{"master", seed}}}});
    }
  }
  nlohmann::json summary_json = nlohmann::json::array();
  for (const MetaEvalSummary& s : summary) {
    summary_json.push_back({{"metric", s.metric},
                            {"transform", s.transform},
                            {"mc", OptionalJson(s.mc)},
                            {"degenerate", s.degenerate}});
  }
  return {{"estimator", "MetaQuantus-style, simplified"},
          {"tests", tests},
          {"summary", summary_json},
          {"metric_errors", metric_errors}};
}

MetaEvalReport RunMetaEval(const MetaEvalConfig& config, const MlpModel& model,
                           std::span<const Instance> inputs,
                           std::span<const GroundTruthMask> masks) {
  if (config.metrics.empty() || config.transforms.empty() || config.explainers.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "meta-evaluation needs metrics, transforms and explainers");
  }
  if (inputs.empty()) throw Error(ErrorCode::kEmptyDataset, "no inputs");
  if (!masks.empty() && masks.size() != inputs.size()) {
    throw Error(ErrorCode::kShapeError, "masks are not aligned with inputs");
  }
  if (config.trials < 1 || config.repetitions < 1) {
    throw Error(ErrorCode::kInvalidArgument, "trials and repetitions must be >= 1");
  }
  for (const Instance& inst : inputs) {
    if (!inst.label) throw Error(ErrorCode::kInvalidArgument, "inputs need labels");
  }
  const Baseline baseline = config.mean_baseline ? Baseline::FeatureMean(FeatureMeans(inputs))
                                                 : Baseline::Zeros();
  const std::size_t n_metrics = config.metrics.size();
  const std::size_t n_transforms = config.transforms.size();
  std::atomic<int> metric_errors{0};

  // parts[metric][transform][target][component] collects one estimate per
  // repetition; components are iac_nr, iac_ar, iec_nr, iec_ar.
  std::vector<std::vector<std::vector<std::vector<std::vector<CellEstimate>>>>> parts(
      n_metrics,
      std::vector<std::vector<std::vector<std::vector<CellEstimate>>>>(
          n_transforms, std::vector<std::vector<std::vector<CellEstimate>>>(
                            2, std::vector<std::vector<CellEstimate>>(4))));

  for (int rep = 0; rep < config.repetitions; ++rep) {
    const std::uint64_t rep_seed = DeriveSeed(config.seed, static_cast<std::uint64_t>(rep));
    const ScoreTable reference =
        ScoreAll(config, model, inputs, masks, baseline, DeriveSeed(rep_seed, 0), metric_errors);
    for (int tgt = 0; tgt < 2; ++tgt) {
      for (int sev = 0; sev < 2; ++sev) {
        PerturbationSpec spec;
        spec.target = kTargets[tgt];
        spec.severity = kSeverities[sev];
        spec.minor_sigma = config.minor_sigma;
        spec.trials = config.trials;
        spec.seed = DeriveSeed(rep_seed, static_cast<std::uint64_t>(1 + tgt * 2 + sev));
        std::vector<ScoreTable> trials;
        for (int trial = 0; trial < config.trials; ++trial) {
          const std::uint64_t score_seed =
              DeriveSeed(spec.seed, 1000 + static_cast<std::uint64_t>(trial));
          if (spec.target == PerturbTarget::kInput) {
            const std::vector<Instance> perturbed = PerturbInputs(spec, inputs, trial);
            trials.push_back(
                ScoreAll(config, model, perturbed, masks, baseline, score_seed, metric_errors));
          } else {
            const MlpModel perturbed = PerturbModel(spec, model, trial);
            trials.push_back(
                ScoreAll(config, perturbed, inputs, masks, baseline, score_seed, metric_errors));
          }
        }
        for (std::size_t k = 0; k < n_metrics; ++k) {
          for (std::size_t t = 0; t < n_transforms; ++t) {
            std::vector<MethodScores> perturbed_scores;
            for (const ScoreTable& table : trials) perturbed_scores.push_back(table[k][t]);
            const MethodScores& base = reference[k][t];
            auto& slots = parts[k][t][tgt];
            slots[sev].push_back(Iac(base, perturbed_scores, spec.severity));
            slots[2 + sev].push_back(Iec(base, perturbed_scores, spec.severity));
          }
        }
      }
    }
  }

  MetaEvalReport report;
  report.trials = config.trials;
  report.repetitions = config.repetitions;
  report.seed = config.seed;
  report.metric_errors = metric_errors.load();
  for (std::size_t k = 0; k < n_metrics; ++k) {
    for (std::size_t t = 0; t < n_transforms; ++t) {
      MetaEvalSummary summary;
      summary.metric = config.metrics[k].name;
      summary.transform = TransformLabel(config.transforms[t]);
      double mc_sum = 0.0;
      int mc_count = 0;
      for (int tgt = 0; tgt < 2; ++tgt) {
        MetaEvalRow row;
        row.metric = summary.metric;
        row.transform = summary.transform;
        row.target = kTargets[tgt];
        const auto& slots = parts[k][t][tgt];
        row.iac_nr = Pool(slots[0]);
        row.iac_ar = Pool(slots[1]);
        row.iec_nr = Pool(slots[2]);
        row.iec_ar = Pool(slots[3]);
        double sum = 0.0;
        int available = 0;
        for (const CellEstimate* c : {&row.iac_nr, &row.iac_ar, &row.iec_nr, &row.iec_ar}) {
          if (c->value) {
            sum += *c->value;
            ++available;
          }
        }
        row.degenerate = available < 4;
        if (available == 4) {
          row.mc = McScore({*row.iac_nr.value, *row.iac_ar.value, *row.iec_nr.value,
                            *row.iec_ar.value});
        } else if (available > 0) {
          row.mc = sum / available;
        }
        if (row.mc) {
          mc_sum += *row.mc;
          ++mc_count;
        }
        summary.degenerate = summary.degenerate || row.degenerate;
        report.rows.push_back(std::move(row));
      }
      if (mc_count > 0) summary.mc = mc_sum / mc_count;
      report.summary.push_back(std::move(summary));
    }
  }
  return report;
}

}  // namespace qge
