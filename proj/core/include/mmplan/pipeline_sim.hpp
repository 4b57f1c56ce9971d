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

#include <array>
#include <string>
#include <vector>

#include "mmplan/core.hpp"

namespace mmplan {

// Per-microbatch, per-global-stage forward/backward durations. Global stages
// are the concatenation encoder stages | backbone stages | generator stages.
struct StageTimes {
  int microbatches = 0;  // l
  int stages = 0;        // p
  std::vector<double> fwd;  // row-major [mb * stages + stage]
  std::vector<double> bwd;
  std::array<int, 3> unit_stages = {0, 0, 0};  // informational split of p

  static StageTimes zeros(int microbatches, int stages);

  double& f(int mb, int stage) { return fwd[mb * stages + stage]; }
  double f(int mb, int stage) const { return fwd[mb * stages + stage]; }
  double& b(int mb, int stage) { return bwd[mb * stages + stage]; }
  double b(int mb, int stage) const { return bwd[mb * stages + stage]; }

  // Rows reordered so row i of the result is row order[i] of *this.
  StageTimes permuted(const std::vector<int>& order) const;

  bool valid(std::string* why = nullptr) const;
};

// One-forward-one-backward schedule across all stages, one stage per device.
// Device s runs min(p - s, l) warm-up forwards, then alternates one backward
// with one forward, then drains the remaining backwards. Event times follow
// start = max(end of previous op on the device, end of the upstream
// dependency); ties are deterministic by (device, microbatch).
Timeline schedule_1f1b(const StageTimes& times);

// Interleaved variant: each device holds `vpp` virtual stages, with virtual
// stage v of device s mapped to global stage v * devices + s. Requires
// stages % vpp == 0 and microbatches % devices == 0; vpp == 1 reduces to
// schedule_1f1b exactly.
Timeline schedule_interleaved(const StageTimes& times, int vpp);

// Whole-iteration end time only; identical to schedule_1f1b(t).iteration_time
// but skips event materialization.
double iteration_time_1f1b(const StageTimes& times);

// An idle-or-filled window at the first pipeline device. Window i precedes
// the i-th backward on device 0: window 0 opens when the first forward there
// ends, later windows open when the previous backward ends. `filled_by`
// lists the microbatches whose forwards run inside the window.
struct Interval {
  double start = 0.0;
  double end = 0.0;
  std::vector<int> filled_by;

  double volume() const { return end - start; }
};

struct IntervalSet {
  std::vector<Interval> intervals;
};

IntervalSet get_intervals(const Timeline& timeline);

// Window volumes for a 1F1B run of `times`, recomputed from a full schedule
// pass. Agrees with get_intervals(schedule_1f1b(times)).
std::vector<double> interval_windows(const StageTimes& times);

// Incremental counterpart: demand-driven memoized evaluation of the same
// dependency recurrences, advancing one backward per call (amortized
// O(stages) per window when consumed left to right). Kept separate from the
// full recomputation so the two can be cross-checked.
class IntervalScanner {
 public:
  explicit IntervalScanner(const StageTimes& times);

  bool done() const { return next_ >= times_.microbatches; }
  // Volume of the window preceding backward `index()`; advances the scanner.
  double next_window();
  int index() const { return next_; }

 private:
  double forward_end(int mb, int stage);
  double backward_end(int mb, int stage);

  StageTimes times_;
  std::vector<double> f_end_;  // memo, NaN = not yet evaluated
  std::vector<double> b_end_;
  int next_ = 0;
};

struct IterationStats {
  double iteration_time = 0.0;
  double bubble_fraction = 0.0;  // total idle / (devices * iteration_time)
  std::vector<double> device_idle;
};

IterationStats iteration_stats(const Timeline& timeline);

// Time until every device has completed its first forward, i.e. the pipeline
// is populated. Interleaving shrinks this by the virtual-stage factor.
double pipeline_fill_time(const Timeline& timeline);

// Serializes the timeline as a trace-event JSON file ("X" duration events,
// microseconds) loadable by chrome://tracing and compatible viewers.
std::string to_trace_json(const Timeline& timeline);

}  // namespace mmplan
