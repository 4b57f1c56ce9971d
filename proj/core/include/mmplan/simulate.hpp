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

#include <span>
#include <vector>

#include "mmplan/core.hpp"
#include "mmplan/cost_model.hpp"
#include "mmplan/pipeline_sim.hpp"

namespace mmplan {

// One synchronous iteration: each coupled group runs its own pipeline, the
// iteration ends when the slowest one finishes, plus the constant gradient
// sync term.
struct IterationResult {
  double t_iter = 0.0;
  double slowest_group_time = 0.0;
  int slowest_group = 0;
  double mean_bubble_fraction = 0.0;
  std::vector<double> group_times;
  std::vector<Timeline> timelines;  // one per coupled group
};

IterationResult simulate_iteration(
    const Plan& plan, const CostModel& costs,
    const std::vector<std::vector<Microbatch>>& groups);

// Warm-up and steady durations as simulated, for cross-checking the planner
// model. Warm-up is a single microbatch's full traversal; steady is read off
// the busiest stage's saturated span. Valid for microbatch-homogeneous
// stage times under plain 1F1B.
struct SimulatedPhases {
  double warmup = 0.0;
  double steady = 0.0;
  int bottleneck_stage = 0;
};

SimulatedPhases measure_phases(const StageTimes& times);

}  // namespace mmplan
