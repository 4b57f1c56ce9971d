// Copyright 2026 The mmplan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmplan/core.hpp"
#include "mmplan/pipeline_sim.hpp"

namespace mmplan {

// Measured (or synthetic) whole-module times for one module kind, keyed by
// TP size and token load. Token load is interpolated piecewise-linearly and
// clamped outside the measured range; TP is matched exactly, never
// interpolated. A single row per TP makes the module's cost independent of
// token load.
class CostProfile {
 public:
  struct Point {
    double token_load = 0.0;
    double fwd_s = 0.0;
    std::optional<double> bwd_s;  // absent: defaults to 2x forward
  };

  void add_row(int tp, double token_load, double fwd_s,
               std::optional<double> bwd_s);
  bool empty() const { return rows_.empty(); }
  bool has_tp(int tp) const { return rows_.count(tp) != 0; }
  std::vector<int> tp_sizes() const;

  // Piecewise-linear interpolation in token load for the given TP size.
  // Queries outside the table range clamp to the nearest row and record a
  // warning through `warnings` when provided.
  double forward_seconds(int tp, double token_load,
                         std::vector<std::string>* warnings) const;
  double backward_seconds(int tp, double token_load,
                          std::vector<std::string>* warnings) const;

 private:
  const std::vector<Point>& rows_for(int tp) const;
  std::map<int, std::vector<Point>> rows_;  // sorted by token_load
};

// Analytic fallback used when no profile rows exist for a module: a dense
// transformer costs 2 * params FLOPs per token forward and twice that
// backward, scaled by an achievable-efficiency factor.
struct AnalyticCoeffs {
  double efficiency = 0.45;
  double bwd_fwd_ratio = 2.0;
};

struct CostBook {
  std::array<CostProfile, 3> profiles;  // indexed by ModuleKind
  AnalyticCoeffs analytic;

  CostProfile& profile(ModuleKind kind) {
    return profiles[static_cast<int>(kind)];
  }
  const CostProfile& profile(ModuleKind kind) const {
    return profiles[static_cast<int>(kind)];
  }
};

// Parses delimited profile text: one row `module,tp,token_load,fwd_s,bwd_s`
// per line, `#` comments allowed, bwd_s may be empty.
CostBook parse_profile_csv(std::istream& in);
CostBook load_profile_csv(const std::string& path);

// Mean token loads of the training workload, used wherever a single
// expected microbatch stands in for the real distribution.
struct WorkloadStats {
  std::int64_t seq_len = 0;
  double mean_encoder_tokens = 0.0;   // per sample
  double mean_generator_tokens = 0.0;  // per sample
};

// Per-GPU memory accounting for one plan. For each unit with g GPUs:
// (DP * P + S + DP_lm * L * PP) / g, where P/S/L are the unit's parameter,
// optimizer, and per-microbatch activation footprints. The first pipeline
// stage of a unit holds PP in-flight microbatches of activations.
struct UnitMemoryUse {
  ModuleKind unit = ModuleKind::Encoder;
  double bytes_per_gpu = 0.0;
  bool fits = false;
};

struct MemoryReport {
  std::array<UnitMemoryUse, 3> units;
  double capacity_bytes = 0.0;
  bool pass = false;
};

MemoryReport memory_check(const Plan& plan, const ModelSpec& model,
                          const ClusterSpec& cluster);

// Single pipeline boundary cost for one unit: layer_output_bytes divided by
// the applicable bandwidth (intra-node when two adjacent stage replicas fit
// one node, inter-node otherwise).
double pp_boundary_seconds(const Plan& plan, ModuleKind unit,
                           const ClusterSpec& cluster,
                           double layer_output_bytes);

// Whole-pipeline PP communication of one unit: PP size times the
// single-boundary cost.
double pp_comm_time(const Plan& plan, ModuleKind unit,
                    const ClusterSpec& cluster, double layer_output_bytes);

// Analytic model FLOPs for one global batch: per module,
// 2 * params * tokens forward plus the backward multiple (reduced for
// frozen modules).
double model_flops_per_batch(const ModelSpec& model, const WorkloadStats& stats,
                             std::int64_t global_batch);

// Model FLOPs utilization: achieved model FLOPs over aggregate peak FLOPs of
// the GPUs the plan uses, across one iteration.
double mfu(const Plan& plan, const ModelSpec& model, const ClusterSpec& cluster,
           const WorkloadStats& stats, double iteration_time);

// Facade bundling the model, cluster, and cost profiles. All queries are
// pure; the optional warning sink makes instances non-reentrant while
// attached.
class CostModel {
 public:
  CostModel(const ModelSpec& model, const ClusterSpec& cluster, CostBook book);

  const ModelSpec& model() const { return model_; }
  const ClusterSpec& cluster() const { return cluster_; }
  const CostBook& book() const { return book_; }

  void set_warning_sink(std::vector<std::string>* sink) { warnings_ = sink; }

  // Whole-module forward time at the given TP size and per-sample token
  // load. Falls back to the analytic estimate when the module has no
  // profile rows.
  double unit_forward_time(ModuleKind kind, int tp, double token_load) const;
  // Whole-module backward time; scaled down for frozen modules.
  double unit_backward_time(ModuleKind kind, int tp, double token_load) const;
  double unit_fwdbwd_time(ModuleKind kind, int tp, double token_load) const;

  // Per-stage, per-microbatch compute time: the whole-module time at the
  // microbatch's per-sample token load, divided by the unit's PP size and
  // scaled by the DP coupling factor DP_lm / DP_unit (1 for the backbone,
  // whose load is always the full sequence).
  double stage_time(ModuleKind kind, const Plan& plan, const Microbatch& mb,
                    Phase phase) const;

  // Activation bytes crossing one stage boundary of `unit` for one
  // microbatch (2-byte elements).
  double boundary_bytes(ModuleKind unit, const Plan& plan,
                        double tokens_per_sample) const;

  // Stage-time matrix for simulating `microbatches` under `plan`; PP
  // boundary communication is folded into each stage's forward and backward
  // entries.
  StageTimes build_stage_times(const Plan& plan,
                               std::span<const Microbatch> microbatches) const;

  double token_load(ModuleKind kind, const Microbatch& mb) const;
  double token_load(ModuleKind kind, const WorkloadStats& stats) const;

 private:
  double analytic_forward(ModuleKind kind, double token_load) const;

  ModelSpec model_;
  ClusterSpec cluster_;
  CostBook book_;
  std::vector<std::string>* warnings_ = nullptr;
};

}  // namespace mmplan
