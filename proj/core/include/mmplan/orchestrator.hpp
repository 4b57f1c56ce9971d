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

#include <optional>
#include <string>
#include <vector>

#include "mmplan/cost_model.hpp"
#include "mmplan/core.hpp"

namespace mmplan {

struct PredictedTimes {
  double t_warm = 0.0;
  double t_steady = 0.0;
  double t_iter = 0.0;  // t_warm + t_steady + the constant DP sync term
};

// Iteration-time model of a plan over the expected (mean) microbatch.
// Warm-up is the whole forward+backward chain (shrunk by the vpp factor);
// steady is the largest per-stage forward+backward term times the remaining
// microbatch count.
PredictedTimes predict_times(const Plan& plan, const CostModel& costs,
                             const WorkloadStats& stats);

// TP and DP sizes for the three units; PP and the GPU split fall out of the
// per-candidate resource subproblem.
struct ParallelismTuple {
  int tp_me = 1, dp_me = 1;
  int tp_lm = 1, dp_lm = 1;
  int tp_mg = 1, dp_mg = 1;

  friend auto operator<=>(const ParallelismTuple&,
                          const ParallelismTuple&) = default;
};

// All feasible TP x DP combinations: TP in {1,2,4,8} per unit, backbone DP
// dividing the global batch, encoder/generator DP dividing the backbone DP,
// pruned to fit the cluster. Finite and duplicate-free, in deterministic
// lexicographic order.
std::vector<ParallelismTuple> enumerate_parallelism(const ClusterSpec& cluster,
                                                    std::int64_t global_batch);

struct CandidateResult {
  ParallelismTuple tuple;
  bool feasible = false;
  std::string infeasible_reason;
  Plan plan;                 // rounded integer plan (when feasible)
  PredictedTimes times;      // of the rounded plan
  double cont_x = 0.0;       // continuous relaxation optimum
  double cont_y = 0.0;
  double cont_z = 0.0;
  double cont_t_iter = 0.0;
};

// Fixes one parallelism tuple and solves the continuous GPU-split problem
// min max(a/x, b/y, c/z) + linear warm-up terms subject to x+y+z <= N and
// the per-unit memory floors (convex; solved to 1e-6 relative), then rounds
// to integer stage counts by searching the neighboring PP combinations.
CandidateResult solve_subproblem(const ParallelismTuple& tuple,
                                 const CostModel& costs,
                                 const WorkloadStats& stats,
                                 std::int64_t global_batch, int vpp);

struct OrchestrationOptions {
  int vpp = 1;
  bool keep_candidates = false;  // retain the full per-candidate table
};

struct OrchestrationResult {
  Plan best;
  PredictedTimes times;
  std::vector<CandidateResult> candidates;  // when keep_candidates
  std::size_t candidates_evaluated = 0;
  double solve_seconds = 0.0;
};

// Enumerates every parallelism candidate, solves its resource subproblem,
// and returns the feasible plan minimizing predicted iteration time. Ties
// break toward fewer total GPUs, then the lexicographically smallest
// parallelism tuple. Throws InfeasibleError when nothing fits.
OrchestrationResult model_orchestration(const CostModel& costs,
                                        const WorkloadStats& stats,
                                        std::int64_t global_batch,
                                        const OrchestrationOptions& options = {});

// Megatron-style rigid orchestration: encoder and generator inherit the
// backbone's TP and DP and occupy one extra pipeline stage each; the
// backbone takes every remaining GPU. The best rigid configuration by
// predicted time is returned, for comparison reports only.
Plan rigid_baseline(const CostModel& costs, const WorkloadStats& stats,
                    std::int64_t global_batch, int vpp = 1);

struct BruteForceOptions {
  int vpp = 1;
  int gpu_cap = 32;  // refuse larger clusters; exhaustive search only
};

// Exhaustive integer search over all feasible plans; the exact optimum of
// predict_times. Guarded by gpu_cap (CapExceededError).
OrchestrationResult brute_force_oracle(const CostModel& costs,
                                       const WorkloadStats& stats,
                                       std::int64_t global_batch,
                                       const BruteForceOptions& options = {});

}  // namespace mmplan
