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

// The greedy multiway-partition sort order. Ascending matches the reference
// procedure; descending is the classical longest-processing-time variant
// with the 4/3 bound, kept as a toggle.
enum class IntraSortOrder { Ascending, Descending };

struct IntraPartition {
  std::vector<std::vector<int>> groups;  // indices into the input sizes

  // Group contents concatenated in group-index order.
  std::vector<int> flat() const;
  std::vector<double> loads(std::span<const double> sizes) const;
  double max_load(std::span<const double> sizes) const;
};

// Balances samples across m groups: sort by size, then assign each sample
// to the group with the smallest current load (ties to the lowest group
// index). With equal_counts the argmin runs over groups that still have
// room for their ceil(n/m) share, which synchronous DP groups require.
IntraPartition intra_partition(std::span<const double> sizes, int m,
                               IntraSortOrder order = IntraSortOrder::Ascending,
                               bool equal_counts = false);

// The flat permutation of the unconstrained partition: group 0's samples,
// then group 1's, and so on; entry j is an index into `sizes`.
std::vector<int> intra_reorder_order(
    std::span<const double> sizes, int m,
    IntraSortOrder order = IntraSortOrder::Ascending);

std::vector<Sample> intra_reorder(
    std::span<const Sample> samples, int m,
    IntraSortOrder order = IntraSortOrder::Ascending);

// Group loads of a permutation split into m equal contiguous blocks (the
// shape in which DP groups actually consume the batch).
std::vector<double> block_group_loads(std::span<const double> sizes,
                                      std::span<const int> order, int m);

// The k pending microbatches with the smallest keys, ascending (ties by
// index). Throws KTooLargeError when k exceeds the pending count.
std::vector<int> select_min(std::span<const double> keys,
                            const std::vector<int>& pending, int k);

// Greedy subset of size k whose summed keys track `target`: each pick
// minimizes the remaining residual, preferring the candidate that stays at
// or under it on ties, then the lowest index.
std::vector<int> select_closest(std::span<const double> keys,
                                const std::vector<int>& pending, int k,
                                double target);

// Pipeline-aware microbatch reordering. Places the smallest microbatch
// first to activate all stages promptly, reserves the smallest devices-1
// microbatches for the drain, and fills each first-device idle window with
// the pending microbatches whose forward time matches its volume (windows
// are measured on the schedule of the partially built order, with pending
// slots standing in at the mean of the pending forward times). Returns a
// permutation of 0..l-1. vpp > 1 evaluates windows on the interleaved
// schedule, vpp of them per placement.
std::vector<int> inter_reorder(const StageTimes& times,
                               std::span<const double> fwd_key, int vpp = 1);

struct ReorderMode {
  bool intra = true;
  bool inter = true;
  IntraSortOrder sort_order = IntraSortOrder::Ascending;
};

struct ReorderReport {
  std::vector<int> output_order;  // output_order[pos] = original sample index
  std::vector<double> group_load_before;  // per backbone DP group
  std::vector<double> group_load_after;
  double t_iter_before = 0.0;  // simulated, identity order
  double t_iter_after = 0.0;   // simulated, reordered
};

struct DisaggregatedResult {
  // Reordered microbatch sequences, one per coupled (encoder DP) group.
  std::vector<std::vector<Microbatch>> groups;
  ReorderReport report;
};

// The two-level preprocessing step: balance samples across the backbone DP
// groups, assemble microbatches, then reorder each coupled group's
// microbatch sequence for the pipeline. Every sample appears exactly once
// in the output.
DisaggregatedResult disaggregated_reorder(std::span<const Sample> batch,
                                          const Plan& plan,
                                          const CostModel& costs,
                                          const ReorderMode& mode = {});

// Forward-time key driving the inter-microbatch comparisons: the encoder
// and generator whole-module forward times of the microbatch (the backbone
// term is constant across microbatches and excluded).
std::vector<double> microbatch_fwd_keys(const Plan& plan,
                                        const CostModel& costs,
                                        std::span<const Microbatch> mbs);

}  // namespace mmplan
