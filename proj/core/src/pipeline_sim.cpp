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

#include "mmplan/pipeline_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mmplan/errors.hpp"

namespace mmplan {

namespace {

struct Op {
  int microbatch;
  int stage;  // global stage
  Phase phase;
};

// Per-device op sequences for plain 1F1B: warm-up forwards, the alternating
// steady phase, then the backward drain.
std::vector<std::vector<Op>> ops_1f1b(int l, int p) {
  std::vector<std::vector<Op>> per_device(p);
  for (int s = 0; s < p; ++s) {
    auto& ops = per_device[s];
    ops.reserve(2 * l);
    const int warmup = std::min(p - s, l);
    for (int i = 0; i < warmup; ++i) ops.push_back({i, s, Phase::Forward});
    for (int j = 0; j + warmup < l; ++j) {
      ops.push_back({j, s, Phase::Backward});
      ops.push_back({j + warmup, s, Phase::Forward});
    }
    for (int j = std::max(0, l - warmup); j < l; ++j) {
      ops.push_back({j, s, Phase::Backward});
    }
  }
  return per_device;
}

// Virtual-microbatch sequences for the interleaved schedule. Microbatches
// are processed in groups of `devices`; within a group the forward order
// walks virtual stages (chunks) from first to last and the backward order
// walks them in reverse.
struct VirtualSeq {
  int microbatch;
  int chunk;
};

VirtualSeq virtual_at(int index, int devices, int vpp, bool backward) {
  const int group = index / (devices * vpp);
  const int within = index % (devices * vpp);
  int chunk = within / devices;
  if (backward) chunk = vpp - 1 - chunk;
  const int mb = group * devices + within % devices;
  return {mb, chunk};
}

std::vector<std::vector<Op>> ops_interleaved(int l, int p, int vpp) {
  const int devices = p / vpp;
  const int total = l * vpp;  // virtual microbatches per device
  std::vector<std::vector<Op>> per_device(devices);
  for (int s = 0; s < devices; ++s) {
    auto& ops = per_device[s];
    ops.reserve(2 * total);
    const int warmup =
        std::min(2 * (devices - 1 - s) + (vpp - 1) * devices, total);
    const auto fwd_op = [&](int idx) {
      const VirtualSeq v = virtual_at(idx, devices, vpp, false);
      return Op{v.microbatch, v.chunk * devices + s, Phase::Forward};
    };
    const auto bwd_op = [&](int idx) {
      const VirtualSeq v = virtual_at(idx, devices, vpp, true);
      return Op{v.microbatch, v.chunk * devices + s, Phase::Backward};
    };
    for (int i = 0; i < warmup; ++i) ops.push_back(fwd_op(i));
    for (int j = 0; j + warmup < total; ++j) {
      ops.push_back(fwd_op(warmup + j));
      ops.push_back(bwd_op(j));
    }
    for (int j = std::max(0, total - warmup); j < total; ++j) {
      ops.push_back(bwd_op(j));
    }
  }
  return per_device;
}

constexpr double kUnset = -1.0;

// Resolves event times for fixed per-device op orders. An op starts at the
// max of its device's availability and its cross-stage dependency:
// forwards depend on the same microbatch's forward one stage upstream,
// backwards on its backward one stage downstream (or on its own last-stage
// forward).
Timeline run_schedule(const StageTimes& times,
                      const std::vector<std::vector<Op>>& per_device) {
  const int l = times.microbatches;
  const int p = times.stages;
  const int devices = static_cast<int>(per_device.size());

  std::vector<double> f_end(static_cast<std::size_t>(l) * p, kUnset);
  std::vector<double> b_end(static_cast<std::size_t>(l) * p, kUnset);
  const auto idx = [p](int mb, int stage) {
    return static_cast<std::size_t>(mb) * p + stage;
  };

  std::vector<std::size_t> next(devices, 0);
  std::vector<double> avail(devices, 0.0);

  Timeline tl;
  tl.device_count = devices;
  tl.microbatch_count = l;
  tl.stage_count = p;
  tl.events.reserve(static_cast<std::size_t>(2) * l * p);
  tl.device_busy.assign(devices, 0.0);

  std::size_t remaining = 0;
  for (const auto& ops : per_device) remaining += ops.size();

  while (remaining > 0) {
    bool progressed = false;
    for (int d = 0; d < devices; ++d) {
      while (next[d] < per_device[d].size()) {
        const Op& op = per_device[d][next[d]];
        double dep = 0.0;
        if (op.phase == Phase::Forward) {
          if (op.stage > 0) {
            dep = f_end[idx(op.microbatch, op.stage - 1)];
            if (dep == kUnset) break;
          }
        } else {
          if (op.stage + 1 < p) {
            dep = b_end[idx(op.microbatch, op.stage + 1)];
          } else {
            dep = f_end[idx(op.microbatch, op.stage)];
          }
          if (dep == kUnset) break;
        }
        const double start = std::max(avail[d], dep);
        const double dur = op.phase == Phase::Forward
                               ? times.f(op.microbatch, op.stage)
                               : times.b(op.microbatch, op.stage);
        const double end = start + dur;
        (op.phase == Phase::Forward ? f_end : b_end)[idx(op.microbatch,
                                                         op.stage)] = end;
        avail[d] = end;
        tl.device_busy[d] += dur;
        tl.events.push_back({d, op.microbatch, op.stage, op.phase, start, end});
        ++next[d];
        --remaining;
        progressed = true;
      }
    }
    if (!progressed) {
      throw InternalError("pipeline schedule deadlocked; op order is invalid");
    }
  }

  std::sort(tl.events.begin(), tl.events.end(),
            [](const TimelineEvent& a, const TimelineEvent& b) {
              if (a.start != b.start) return a.start < b.start;
              if (a.device != b.device) return a.device < b.device;
              if (a.microbatch != b.microbatch) return a.microbatch < b.microbatch;
              return a.stage < b.stage;
            });
  for (const TimelineEvent& e : tl.events) {
    tl.iteration_time = std::max(tl.iteration_time, e.end);
  }
  return tl;
}

void check_times(const StageTimes& times) {
  std::string why;
  if (!times.valid(&why)) throw InternalError("bad stage times: " + why);
}

}  // namespace

StageTimes StageTimes::zeros(int microbatches, int stages) {
  StageTimes t;
  t.microbatches = microbatches;
  t.stages = stages;
  t.fwd.assign(static_cast<std::size_t>(microbatches) * stages, 0.0);
  t.bwd.assign(static_cast<std::size_t>(microbatches) * stages, 0.0);
  return t;
}

StageTimes StageTimes::permuted(const std::vector<int>& order) const {
  StageTimes out = zeros(microbatches, stages);
  out.unit_stages = unit_stages;
  for (int i = 0; i < microbatches; ++i) {
    const int src = order[i];
    for (int s = 0; s < stages; ++s) {
      out.f(i, s) = f(src, s);
      out.b(i, s) = b(src, s);
    }
  }
  return out;
}

bool StageTimes::valid(std::string* why) const {
  const auto fail = [&](const char* reason) {
    if (why != nullptr) *why = reason;
    return false;
  };
  if (microbatches < 1) return fail("microbatch count must be >= 1");
  if (stages < 1) return fail("stage count must be >= 1");
  const std::size_t n = static_cast<std::size_t>(microbatches) * stages;
  if (fwd.size() != n || bwd.size() != n) return fail("matrix size mismatch");
  for (double v : fwd) {
    if (!(v >= 0.0)) return fail("negative or NaN forward time");
  }
  for (double v : bwd) {
    if (!(v >= 0.0)) return fail("negative or NaN backward time");
  }
  return true;
}

Timeline schedule_1f1b(const StageTimes& times) {
  check_times(times);
  return run_schedule(times, ops_1f1b(times.microbatches, times.stages));
}

Timeline schedule_interleaved(const StageTimes& times, int vpp) {
  check_times(times);
  if (vpp < 1) throw IndivisibleVppError("vpp must be >= 1");
  if (vpp == 1) return schedule_1f1b(times);
  if (times.stages % vpp != 0) {
    throw IndivisibleVppError("stage count " + std::to_string(times.stages) +
                              " is not divisible by vpp " +
                              std::to_string(vpp));
  }
  const int devices = times.stages / vpp;
  if (times.microbatches % devices != 0) {
    throw IndivisibleVppError(
        "microbatch count " + std::to_string(times.microbatches) +
        " is not divisible by the device count " + std::to_string(devices));
  }
  return run_schedule(times,
                      ops_interleaved(times.microbatches, times.stages, vpp));
}

double iteration_time_1f1b(const StageTimes& times) {
  // The last op overall is the final backward at stage 0.
  check_times(times);
  const Timeline tl =
      run_schedule(times, ops_1f1b(times.microbatches, times.stages));
  return tl.iteration_time;
}

IntervalSet get_intervals(const Timeline& timeline) {
  IntervalSet set;
  std::vector<const TimelineEvent*> fwd0;
  std::vector<const TimelineEvent*> bwd0;
  for (const TimelineEvent& e : timeline.events) {
    if (e.device != 0) continue;
    (e.phase == Phase::Forward ? fwd0 : bwd0).push_back(&e);
  }
  if (fwd0.empty() || bwd0.empty()) return set;
  // Events are already time-ordered; on device 0 that is also the op order.
  double anchor = fwd0.front()->end;
  std::size_t fill = 0;
  for (const TimelineEvent* b : bwd0) {
    Interval ivl;
    ivl.start = anchor;
    ivl.end = b->start;
    while (fill < fwd0.size() && fwd0[fill]->start < ivl.start) ++fill;
    while (fill < fwd0.size() && fwd0[fill]->start < ivl.end) {
      ivl.filled_by.push_back(fwd0[fill]->microbatch);
      ++fill;
    }
    set.intervals.push_back(std::move(ivl));
    anchor = b->end;
  }
  return set;
}

std::vector<double> interval_windows(const StageTimes& times) {
  const Timeline tl = schedule_1f1b(times);
  const IntervalSet set = get_intervals(tl);
  std::vector<double> volumes;
  volumes.reserve(set.intervals.size());
  for (const Interval& ivl : set.intervals) volumes.push_back(ivl.volume());
  return volumes;
}

IntervalScanner::IntervalScanner(const StageTimes& times) : times_(times) {
  check_times(times_);
  const std::size_t n =
      static_cast<std::size_t>(times_.microbatches) * times_.stages;
  f_end_.assign(n, std::numeric_limits<double>::quiet_NaN());
  b_end_.assign(n, std::numeric_limits<double>::quiet_NaN());
}

double IntervalScanner::forward_end(int mb, int stage) {
  const int p = times_.stages;
  double& memo = f_end_[static_cast<std::size_t>(mb) * p + stage];
  if (!std::isnan(memo)) return memo;
  const int warmup = std::min(p - stage, times_.microbatches);
  double start = 0.0;
  if (stage > 0) start = forward_end(mb, stage - 1);
  // Device predecessor: the previous warm-up forward, or the backward this
  // forward is paired with in the steady phase.
  if (mb > 0 && mb < warmup) {
    start = std::max(start, forward_end(mb - 1, stage));
  } else if (mb >= warmup) {
    start = std::max(start, backward_end(mb - warmup, stage));
  }
  memo = start + times_.f(mb, stage);
  return memo;
}

double IntervalScanner::backward_end(int mb, int stage) {
  const int p = times_.stages;
  double& memo = b_end_[static_cast<std::size_t>(mb) * p + stage];
  if (!std::isnan(memo)) return memo;
  const int warmup = std::min(p - stage, times_.microbatches);
  double start = stage + 1 < p ? backward_end(mb, stage + 1)
                               : forward_end(mb, stage);
  // Device predecessor: the forward issued just before this backward in the
  // 1F1B order, or the previous backward once forwards are drained.
  const int prev_fwd = mb + warmup - 1;
  if (prev_fwd < times_.microbatches) {
    start = std::max(start, forward_end(prev_fwd, stage));
  } else if (mb > 0) {
    start = std::max(start, backward_end(mb - 1, stage));
  }
  memo = start + times_.b(mb, stage);
  return memo;
}

double IntervalScanner::next_window() {
  if (done()) throw InternalError("interval scanner exhausted");
  const int i = next_;
  const double b_start = backward_end(i, 0) - times_.b(i, 0);
  const double anchor =
      i == 0 ? forward_end(0, 0) : backward_end(i - 1, 0);
  ++next_;
  return b_start - anchor;
}

IterationStats iteration_stats(const Timeline& timeline) {
  IterationStats stats;
  stats.iteration_time = timeline.iteration_time;
  stats.device_idle = timeline.device_idle();
  if (timeline.iteration_time > 0.0 && timeline.device_count > 0) {
    double idle_sum = 0.0;
    for (double idle : stats.device_idle) idle_sum += idle;
    stats.bubble_fraction =
        idle_sum / (timeline.device_count * timeline.iteration_time);
  }
  return stats;
}

double pipeline_fill_time(const Timeline& timeline) {
  std::vector<double> first_fwd(timeline.device_count,
                                std::numeric_limits<double>::infinity());
  for (const TimelineEvent& e : timeline.events) {
    if (e.phase != Phase::Forward) continue;
    first_fwd[e.device] = std::min(first_fwd[e.device], e.end);
  }
  double fill = 0.0;
  for (double t : first_fwd) fill = std::max(fill, t);
  return fill;
}

std::string to_trace_json(const Timeline& timeline) {
  std::ostringstream out;
  out.precision(15);
  out << "{\"displayTimeUnit\":\"ms\",\"traceEvents\":[";
  bool first = true;
  for (const TimelineEvent& e : timeline.events) {
    if (!first) out << ",";
    first = false;
    out << "{\"name\":\"" << (e.phase == Phase::Forward ? "F" : "B")
        << e.microbatch + 1 << "\",\"cat\":\"" << to_string(e.phase)
        << "\",\"ph\":\"X\",\"pid\":0,\"tid\":" << e.device
        << ",\"ts\":" << e.start * 1e6 << ",\"dur\":" << (e.end - e.start) * 1e6
        << ",\"args\":{\"microbatch\":" << e.microbatch
        << ",\"stage\":" << e.stage << "}}";
  }
  out << "]}";
  return out.str();
}

}  // namespace mmplan
