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

#include "mmplan/reorder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mmplan/errors.hpp"
#include "mmplan/simulate.hpp"
#include "mmplan/workload.hpp"

namespace mmplan {

namespace {

std::vector<int> sorted_by_key(std::span<const double> sizes,
                               IntraSortOrder order) {
  std::vector<int> idx(sizes.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (sizes[a] != sizes[b]) {
      return order == IntraSortOrder::Ascending ? sizes[a] < sizes[b]
                                                : sizes[a] > sizes[b];
    }
    return a < b;
  });
  return idx;
}

}  // namespace

std::vector<int> IntraPartition::flat() const {
  std::vector<int> out;
  for (const auto& group : groups) {
    out.insert(out.end(), group.begin(), group.end());
  }
  return out;
}

std::vector<double> IntraPartition::loads(std::span<const double> sizes) const {
  std::vector<double> out;
  out.reserve(groups.size());
  for (const auto& group : groups) {
    double load = 0.0;
    for (int idx : group) load += sizes[idx];
    out.push_back(load);
  }
  return out;
}

double IntraPartition::max_load(std::span<const double> sizes) const {
  const std::vector<double> all = loads(sizes);
  return *std::max_element(all.begin(), all.end());
}

IntraPartition intra_partition(std::span<const double> sizes, int m,
                               IntraSortOrder order, bool equal_counts) {
  if (m < 1) throw InternalError("group count must be >= 1");
  if (sizes.empty()) throw InternalError("cannot reorder an empty batch");
  const std::vector<int> sorted = sorted_by_key(sizes, order);
  const std::size_t cap =
      equal_counts ? (sizes.size() + m - 1) / m : sizes.size();
  IntraPartition partition;
  partition.groups.resize(m);
  std::vector<double> load(m, 0.0);
  for (int idx : sorted) {
    int target = -1;
    for (int g = 0; g < m; ++g) {
      if (partition.groups[g].size() >= cap) continue;
      if (target < 0 || load[g] < load[target]) target = g;
    }
    partition.groups[target].push_back(idx);
    load[target] += sizes[idx];
  }
  return partition;
}

std::vector<int> intra_reorder_order(std::span<const double> sizes, int m,
                                     IntraSortOrder order) {
  return intra_partition(sizes, m, order).flat();
}

std::vector<Sample> intra_reorder(std::span<const Sample> samples, int m,
                                  IntraSortOrder order) {
  std::vector<double> sizes(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    sizes[i] = static_cast<double>(samples[i].cost_size());
  }
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (int idx : intra_reorder_order(sizes, m, order)) {
    out.push_back(samples[idx]);
  }
  return out;
}

std::vector<double> block_group_loads(std::span<const double> sizes,
                                      std::span<const int> order, int m) {
  const std::size_t per_group = order.size() / m;
  std::vector<double> loads(m, 0.0);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    loads[std::min<std::size_t>(pos / per_group, m - 1)] += sizes[order[pos]];
  }
  return loads;
}

std::vector<int> select_min(std::span<const double> keys,
                            const std::vector<int>& pending, int k) {
  if (k < 0 || static_cast<std::size_t>(k) > pending.size()) {
    throw KTooLargeError("select_min asked for " + std::to_string(k) +
                         " of " + std::to_string(pending.size()));
  }
  std::vector<int> sorted = pending;
  std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return a < b;
  });
  sorted.resize(k);
  return sorted;
}

std::vector<int> select_closest(std::span<const double> keys,
                                const std::vector<int>& pending, int k,
                                double target) {
  if (k < 0 || static_cast<std::size_t>(k) > pending.size()) {
    throw KTooLargeError("select_closest asked for " + std::to_string(k) +
                         " of " + std::to_string(pending.size()));
  }
  std::vector<int> pool = pending;
  std::vector<int> chosen;
  chosen.reserve(k);
  double residual = target;
  for (int pick = 0; pick < k; ++pick) {
    int best = -1;
    for (int idx : pool) {
      if (best < 0) {
        best = idx;
        continue;
      }
      const double da = std::abs(residual - keys[idx]);
      const double db = std::abs(residual - keys[best]);
      if (da != db) {
        if (da < db) best = idx;
        continue;
      }
      // Ties keep the pick that stays at or under the residual; later picks
      // can only add time, so an overshoot is unrecoverable.
      const bool a_under = keys[idx] <= residual;
      const bool b_under = keys[best] <= residual;
      if (a_under != b_under) {
        if (a_under) best = idx;
        continue;
      }
      if (idx < best) best = idx;
    }
    chosen.push_back(best);
    residual -= keys[best];
    pool.erase(std::find(pool.begin(), pool.end(), best));
  }
  return chosen;
}

namespace {

// Stage-time matrix for a partially built order: placed microbatches up
// front, the reserved drain tail at the end, and pending slots in between
// carrying the mean of the pending rows.
StageTimes candidate_times(const StageTimes& base,
                           const std::vector<int>& placed,
                           const std::vector<int>& pending,
                           const std::vector<int>& rear) {
  const int l = base.microbatches;
  const int p = base.stages;
  StageTimes cand = StageTimes::zeros(l, p);
  cand.unit_stages = base.unit_stages;
  std::vector<double> mean_f(p, 0.0), mean_b(p, 0.0);
  if (!pending.empty()) {
    for (int idx : pending) {
      for (int s = 0; s < p; ++s) {
        mean_f[s] += base.f(idx, s);
        mean_b[s] += base.b(idx, s);
      }
    }
    for (int s = 0; s < p; ++s) {
      mean_f[s] /= static_cast<double>(pending.size());
      mean_b[s] /= static_cast<double>(pending.size());
    }
  }
  int row = 0;
  for (int idx : placed) {
    for (int s = 0; s < p; ++s) {
      cand.f(row, s) = base.f(idx, s);
      cand.b(row, s) = base.b(idx, s);
    }
    ++row;
  }
  for (std::size_t i = 0; i < pending.size(); ++i, ++row) {
    for (int s = 0; s < p; ++s) {
      cand.f(row, s) = mean_f[s];
      cand.b(row, s) = mean_b[s];
    }
  }
  for (int idx : rear) {
    for (int s = 0; s < p; ++s) {
      cand.f(row, s) = base.f(idx, s);
      cand.b(row, s) = base.b(idx, s);
    }
    ++row;
  }
  return cand;
}

std::vector<double> windows_for(const StageTimes& cand, int vpp) {
  if (vpp == 1) return interval_windows(cand);
  const IntervalSet set = get_intervals(schedule_interleaved(cand, vpp));
  std::vector<double> volumes;
  volumes.reserve(set.intervals.size());
  for (const Interval& ivl : set.intervals) volumes.push_back(ivl.volume());
  return volumes;
}

}  // namespace

std::vector<int> inter_reorder(const StageTimes& times,
                               std::span<const double> fwd_key, int vpp) {
  const int l = times.microbatches;
  if (static_cast<int>(fwd_key.size()) != l) {
    throw InternalError("forward-key count does not match microbatch count");
  }
  std::vector<int> identity(l);
  std::iota(identity.begin(), identity.end(), 0);
  if (l <= 1) return identity;
  if (vpp < 1) throw IndivisibleVppError("vpp must be >= 1");
  if (times.stages % vpp != 0) {
    throw IndivisibleVppError("stage count not divisible by vpp");
  }
  const int devices = times.stages / vpp;
  // A single device has no pipeline idle to fill; order cannot matter.
  if (devices == 1) return identity;

  std::vector<int> pending = identity;
  const auto remove_from = [](std::vector<int>& pool,
                              const std::vector<int>& taken) {
    for (int idx : taken) {
      pool.erase(std::find(pool.begin(), pool.end(), idx));
    }
  };

  std::vector<int> ret;
  ret.reserve(l);
  // The smallest microbatch leads, activating every stage promptly.
  const std::vector<int> first = select_min(fwd_key, pending, 1);
  ret.push_back(first[0]);
  remove_from(pending, first);
  // The smallest devices-1 microbatches close the iteration, shrinking the
  // unfillable drain windows.
  const int tail_n = std::min<int>(devices - 1, static_cast<int>(pending.size()));
  const std::vector<int> rear = select_min(fwd_key, pending, tail_n);
  remove_from(pending, rear);

  int step = 1;
  while (!pending.empty()) {
    const std::vector<double> windows =
        windows_for(candidate_times(times, ret, pending, rear), vpp);
    const int take = step == 1
                         ? std::min<int>(devices - 1,
                                         static_cast<int>(pending.size()))
                         : 1;
    double target = 0.0;
    for (int w = 0; w < vpp; ++w) {
      const std::size_t wi = static_cast<std::size_t>(step - 1) * vpp + w;
      if (wi < windows.size()) target += windows[wi];
    }
    const std::vector<int> cur = select_closest(fwd_key, pending, take, target);
    ret.insert(ret.end(), cur.begin(), cur.end());
    remove_from(pending, cur);
    ++step;
  }
  ret.insert(ret.end(), rear.begin(), rear.end());
  if (static_cast<int>(ret.size()) != l) {
    throw InternalError("inter_reorder lost or duplicated microbatches");
  }
  return ret;
}

std::vector<double> microbatch_fwd_keys(const Plan& plan,
                                        const CostModel& costs,
                                        std::span<const Microbatch> mbs) {
  std::vector<double> keys;
  keys.reserve(mbs.size());
  const double k_me =
      static_cast<double>(plan.backbone.dp) / plan.encoder.dp;
  const double k_mg =
      static_cast<double>(plan.backbone.dp) / plan.generator.dp;
  for (const Microbatch& mb : mbs) {
    const double enc = costs.unit_forward_time(
        ModuleKind::Encoder, plan.encoder.tp, mb.mean_encoder_tokens());
    const double gen = costs.unit_forward_time(
        ModuleKind::Generator, plan.generator.tp, mb.mean_generator_tokens());
    keys.push_back(k_me * enc + k_mg * gen);
  }
  return keys;
}

DisaggregatedResult disaggregated_reorder(std::span<const Sample> batch,
                                          const Plan& plan,
                                          const CostModel& costs,
                                          const ReorderMode& mode) {
  if (static_cast<std::int64_t>(batch.size()) != plan.global_batch) {
    throw BatchSizeMismatchError(
        "batch has " + std::to_string(batch.size()) + " samples, plan expects " +
        std::to_string(plan.global_batch));
  }
  const int dp_lm = plan.backbone.dp;
  const std::int64_t per_group = plan.global_batch / dp_lm;
  const int coupled = plan.coupled_group_count();
  const int span = plan.samples_per_microbatch();  // backbone groups per mb

  std::vector<double> sizes(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    sizes[i] = static_cast<double>(batch[i].cost_size());
  }
  std::vector<int> identity(batch.size());
  std::iota(identity.begin(), identity.end(), 0);

  // Equal group counts keep the split consumable by synchronous DP groups.
  // The greedy split can lose to the incoming order when one outsized sample
  // arrives late at small batch sizes, so keep whichever balances better.
  std::vector<int> intra_order = identity;
  if (mode.intra) {
    std::vector<int> greedy =
        intra_partition(sizes, dp_lm, mode.sort_order, true).flat();
    const auto max_of = [](const std::vector<double>& v) {
      return *std::max_element(v.begin(), v.end());
    };
    if (max_of(block_group_loads(sizes, greedy, dp_lm)) <=
        max_of(block_group_loads(sizes, identity, dp_lm))) {
      intra_order = std::move(greedy);
    }
  }

  std::vector<Sample> staged;
  staged.reserve(batch.size());
  for (int idx : intra_order) staged.push_back(batch[idx]);
  auto groups = assemble_microbatches(staged, plan);

  DisaggregatedResult result;
  result.report.group_load_before = block_group_loads(sizes, identity, dp_lm);
  result.report.group_load_after =
      block_group_loads(sizes, intra_order, dp_lm);
  result.report.t_iter_before = simulate_iteration(
      plan, costs, assemble_microbatches(batch, plan)).t_iter;

  result.report.output_order.assign(batch.size(), 0);
  result.groups.resize(coupled);
  for (int e = 0; e < coupled; ++e) {
    std::vector<int> order(groups[e].size());
    std::iota(order.begin(), order.end(), 0);
    if (mode.inter) {
      const StageTimes times = costs.build_stage_times(plan, groups[e]);
      const std::vector<double> keys =
          microbatch_fwd_keys(plan, costs, groups[e]);
      order = inter_reorder(times, keys, plan.vpp);
    }
    result.groups[e].reserve(groups[e].size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      result.groups[e].push_back(groups[e][order[i]]);
      // Microbatch at position i came from position order[i]; its samples
      // occupy slot j of backbone group e*span+j.
      for (int j = 0; j < span; ++j) {
        const std::size_t pos =
            static_cast<std::size_t>(e * span + j) * per_group + i;
        const std::size_t src =
            static_cast<std::size_t>(e * span + j) * per_group + order[i];
        result.report.output_order[pos] = intra_order[src];
      }
    }
  }
  result.report.t_iter_after =
      simulate_iteration(plan, costs, result.groups).t_iter;
  return result;
}

}  // namespace mmplan
