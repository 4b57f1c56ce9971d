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

#include "mmplan/simulate.hpp"

#include <algorithm>

#include "mmplan/errors.hpp"

namespace mmplan {

IterationResult simulate_iteration(
    const Plan& plan, const CostModel& costs,
    const std::vector<std::vector<Microbatch>>& groups) {
  if (groups.empty()) throw InternalError("no microbatch groups to simulate");
  IterationResult result;
  result.group_times.reserve(groups.size());
  double bubble_sum = 0.0;
  for (std::size_t e = 0; e < groups.size(); ++e) {
    const StageTimes times = costs.build_stage_times(plan, groups[e]);
    Timeline tl = plan.vpp > 1 ? schedule_interleaved(times, plan.vpp)
                               : schedule_1f1b(times);
    const IterationStats stats = iteration_stats(tl);
    bubble_sum += stats.bubble_fraction;
    result.group_times.push_back(stats.iteration_time);
    if (stats.iteration_time > result.slowest_group_time) {
      result.slowest_group_time = stats.iteration_time;
      result.slowest_group = static_cast<int>(e);
    }
    result.timelines.push_back(std::move(tl));
  }
  result.mean_bubble_fraction =
      bubble_sum / static_cast<double>(groups.size());
  result.t_iter =
      result.slowest_group_time + costs.model().dp_sync_seconds;
  return result;
}

SimulatedPhases measure_phases(const StageTimes& times) {
  SimulatedPhases phases;

  // The first microbatch alone: its forward and backward chain through every
  // stage, undisturbed, is the pipeline-fill duration.
  StageTimes head = StageTimes::zeros(1, times.stages);
  head.unit_stages = times.unit_stages;
  for (int s = 0; s < times.stages; ++s) {
    head.f(0, s) = times.f(0, s);
    head.b(0, s) = times.b(0, s);
  }
  phases.warmup = schedule_1f1b(head).iteration_time;

  // The busiest stage runs saturated once filled; its occupied span covers
  // one forward+backward per microbatch. Later stages win ties so the span
  // is not stretched by upstream warm-up.
  int bottleneck = 0;
  double worst = -1.0;
  for (int s = 0; s < times.stages; ++s) {
    const double cycle = times.f(0, s) + times.b(0, s);
    if (cycle >= worst) {
      worst = cycle;
      bottleneck = s;
    }
  }
  phases.bottleneck_stage = bottleneck;

  const Timeline tl = schedule_1f1b(times);
  double first_start = tl.iteration_time;
  double last_end = 0.0;
  for (const TimelineEvent& e : tl.events) {
    if (e.device != bottleneck) continue;
    first_start = std::min(first_start, e.start);
    last_end = std::max(last_end, e.end);
  }
  const double span = last_end - first_start;
  phases.steady = span * static_cast<double>(times.microbatches - 1) /
                  static_cast<double>(times.microbatches);
  return phases;
}

}  // namespace mmplan
