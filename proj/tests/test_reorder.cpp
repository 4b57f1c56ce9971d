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

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "mmplan/errors.hpp"
#include "mmplan/reorder.hpp"
#include "mmplan/workload.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mmplan;

namespace {

std::vector<double> values_at(std::span<const double> sizes,
                              const std::vector<int>& order) {
  std::vector<double> out;
  for (int idx : order) out.push_back(sizes[idx]);
  return out;
}

// Stage-time rows where each microbatch's first-stage forward carries its
// weight and the rest of the pipeline is uniform.
StageTimes skewed_times(const std::vector<double>& enc_fwd, int p,
                        double base) {
  const int l = static_cast<int>(enc_fwd.size());
  StageTimes t = StageTimes::zeros(l, p);
  for (int i = 0; i < l; ++i) {
    for (int s = 0; s < p; ++s) {
      const double extra = s == 0 ? enc_fwd[i] : 0.0;
      t.f(i, s) = base + extra;
      t.b(i, s) = 2.0 * (base + extra);
    }
  }
  return t;
}

double sim_time(const StageTimes& t, const std::vector<int>& order, int vpp) {
  const StageTimes permuted = t.permuted(order);
  return vpp > 1 ? schedule_interleaved(permuted, vpp).iteration_time
                 : schedule_1f1b(permuted).iteration_time;
}

}  // namespace

TEST_CASE("balancing reorder reproduces the four-sample walkthrough") {
  // Sizes [1,3,2,4] over two groups: ascending greedy assigns 1 and 3 to the
  // first group, 2 and 4 to the second, so the emitted order is [1,3,2,4].
  const std::vector<double> sizes = {1, 3, 2, 4};
  const std::vector<int> order = intra_reorder_order(sizes, 2);
  CHECK(values_at(sizes, order) == std::vector<double>{1, 3, 2, 4});

  // The longest-processing-time toggle lands on the equal-sum split
  // {1,4},{2,3}.
  const IntraPartition lpt =
      intra_partition(sizes, 2, IntraSortOrder::Descending);
  const auto loads = lpt.loads(sizes);
  CHECK(loads[0] == doctest::Approx(5.0));
  CHECK(loads[1] == doctest::Approx(5.0));
}

TEST_CASE("balancing reorder hand trace: [2,3,4,5] across two groups") {
  const std::vector<double> sizes = {2, 3, 4, 5};
  const IntraPartition partition = intra_partition(sizes, 2);
  CHECK(values_at(sizes, partition.flat()) == std::vector<double>{2, 4, 3, 5});
  CHECK(partition.max_load(sizes) == doctest::Approx(8.0));
}

TEST_CASE("equal sizes distribute round-robin with equal loads") {
  const std::vector<double> sizes(12, 3.0);
  for (int m : {1, 2, 3, 4}) {
    const IntraPartition partition = intra_partition(sizes, m);
    for (double load : partition.loads(sizes)) {
      CHECK(load == doctest::Approx(3.0 * 12 / m));
    }
  }
}

TEST_CASE("balancing greedy against the unsorted round-robin split") {
  // The descending (longest-processing-time) order beats round robin on
  // nearly every instance; the published ascending order only does so on
  // average, losing when one outsized sample arrives last.
  std::mt19937_64 rng(57);
  std::lognormal_distribution<double> dist(4.0, 0.8);
  const int trials = 300;
  int desc_wins = 0;
  double asc_sum = 0.0;
  double rr_sum = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 17);
    const int m = 1 + static_cast<int>(rng() % 4);
    std::vector<double> sizes(n);
    for (double& s : sizes) s = dist(rng);
    std::vector<double> rr(m, 0.0);
    for (int i = 0; i < n; ++i) rr[i % m] += sizes[i];
    const double rr_max = *std::max_element(rr.begin(), rr.end());
    const IntraPartition desc =
        intra_partition(sizes, m, IntraSortOrder::Descending);
    if (desc.max_load(sizes) <= rr_max + 1e-9) ++desc_wins;
    asc_sum += intra_partition(sizes, m).max_load(sizes);
    rr_sum += rr_max;
  }
  CHECK(desc_wins >= trials * 96 / 100);
  CHECK(asc_sum < rr_sum);
}

TEST_CASE("descending greedy stays within 4/3 of the exact partition") {
  std::mt19937_64 rng(59);
  std::lognormal_distribution<double> dist(3.0, 0.9);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 8);  // <= 12
    const int m = 2 + static_cast<int>(rng() % 3);  // <= 4
    std::vector<double> sizes(n);
    for (double& s : sizes) s = dist(rng);
    const IntraPartition partition =
        intra_partition(sizes, m, IntraSortOrder::Descending);
    const double optimum = test::exact_min_max_partition(sizes, m);
    CHECK(partition.max_load(sizes) <= 4.0 / 3.0 * optimum + 1e-9);
  }
}

TEST_CASE("select_min picks the k smallest in order") {
  const std::vector<double> keys = {5, 1, 3};
  const std::vector<int> pending = {0, 1, 2};
  CHECK(select_min(keys, pending, 2) == std::vector<int>{1, 2});
  CHECK_THROWS_AS(select_min(keys, pending, 4), KTooLargeError);
}

TEST_CASE("select_closest single pick takes the nearest key") {
  const std::vector<double> keys = {5, 1, 3};
  const std::vector<int> pending = {0, 1, 2};
  CHECK(select_closest(keys, pending, 1, 2.9) == std::vector<int>{2});
}

TEST_CASE("select_closest greedy residual trace") {
  // Target 4 over keys {5,1,3,2}: first pick ties 5 and 3 at distance 1 and
  // keeps the undershoot, then 1 zeroes the residual.
  const std::vector<double> keys = {5, 1, 3, 2};
  const std::vector<int> pending = {0, 1, 2, 3};
  CHECK(select_closest(keys, pending, 2, 4.0) == std::vector<int>{2, 1});
}

TEST_CASE("identical microbatches: reordering is a deterministic no-op in "
          "cost") {
  const std::vector<double> enc(8, 1.0);
  const StageTimes t = skewed_times(enc, 4, 0.5);
  const std::vector<double> keys(8, 1.0);
  const std::vector<int> order = inter_reorder(t, keys);
  const std::vector<int> again = inter_reorder(t, keys);
  CHECK(order == again);
  std::vector<int> identity(8);
  std::iota(identity.begin(), identity.end(), 0);
  CHECK(sim_time(t, order, 1) ==
        doctest::Approx(sim_time(t, identity, 1)).epsilon(1e-12));
}

TEST_CASE("skewed instances: reordering does not hurt the simulated time") {
  std::mt19937_64 rng(61);
  std::lognormal_distribution<double> dist(0.0, 0.5);
  int improved = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    const int l = 6;
    const int p = 4;
    std::vector<double> enc(l);
    for (double& e : enc) e = dist(rng);
    const StageTimes t = skewed_times(enc, p, 0.4);
    std::vector<double> keys(l);
    for (int i = 0; i < l; ++i) keys[i] = t.f(i, 0);
    const std::vector<int> order = inter_reorder(t, keys);
    std::vector<int> identity(l);
    std::iota(identity.begin(), identity.end(), 0);
    const double before = sim_time(t, identity, 1);
    const double after = sim_time(t, order, 1);
    if (after < before - 1e-12) ++improved;
    CHECK(after <= before * 1.02 + 1e-9);
  }
  CHECK(improved > trials / 3);
}

TEST_CASE("reordered order is always a permutation") {
  std::mt19937_64 rng(67);
  std::lognormal_distribution<double> dist(0.0, 0.7);
  for (int trial = 0; trial < 100; ++trial) {
    const int l = 1 + static_cast<int>(rng() % 12);
    const int p = 1 + static_cast<int>(rng() % 5);
    std::vector<double> enc(l);
    for (double& e : enc) e = dist(rng);
    const StageTimes t = skewed_times(enc, p, 0.3);
    std::vector<double> keys(l);
    for (int i = 0; i < l; ++i) keys[i] = t.f(i, 0);
    std::vector<int> order = inter_reorder(t, keys);
    std::sort(order.begin(), order.end());
    for (int i = 0; i < l; ++i) CHECK(order[i] == i);
  }
}

TEST_CASE("small instances stay near the exhaustive permutation optimum") {
  std::mt19937_64 rng(71);
  std::lognormal_distribution<double> dist(0.0, 0.5);
  int close = 0;
  const int trials = 30;
  for (int trial = 0; trial < trials; ++trial) {
    const int l = 6;
    const int p = 3;
    std::vector<double> enc(l);
    for (double& e : enc) e = dist(rng);
    const StageTimes t = skewed_times(enc, p, 0.4);
    std::vector<double> keys(l);
    for (int i = 0; i < l; ++i) keys[i] = t.f(i, 0);
    const double got = sim_time(t, inter_reorder(t, keys), 1);

    std::vector<int> perm(l);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      best = std::min(best, sim_time(t, perm, 1));
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (got <= best * 1.05 + 1e-12) ++close;
  }
  CHECK(close >= trials * 9 / 10);
}

TEST_CASE("vpp variant reduces to the plain reorder at vpp=1") {
  std::mt19937_64 rng(73);
  std::lognormal_distribution<double> dist(0.0, 0.5);
  std::vector<double> enc(8);
  for (double& e : enc) e = dist(rng);
  const StageTimes t = skewed_times(enc, 4, 0.4);
  std::vector<double> keys(8);
  for (int i = 0; i < 8; ++i) keys[i] = t.f(i, 0);
  CHECK(inter_reorder(t, keys, 1) == inter_reorder(t, keys));
}

TEST_CASE("vpp reorder on a skewed instance does not hurt") {
  std::mt19937_64 rng(79);
  std::lognormal_distribution<double> dist(0.0, 0.5);
  int harmed = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const int l = 8;
    const int p = 2;  // 2 global stages, vpp=2 -> one device? no: devices=1
    // Use 4 global stages at vpp=2 -> 2 devices.
    std::vector<double> enc(l);
    for (double& e : enc) e = dist(rng);
    const StageTimes t = skewed_times(enc, 4, 0.4);
    std::vector<double> keys(l);
    for (int i = 0; i < l; ++i) keys[i] = t.f(i, 0);
    const std::vector<int> order = inter_reorder(t, keys, 2);
    std::vector<int> identity(l);
    std::iota(identity.begin(), identity.end(), 0);
    if (sim_time(t, order, 2) > sim_time(t, identity, 2) + 1e-9) ++harmed;
    (void)p;
  }
  CHECK(harmed <= 2);
}

TEST_CASE("homogeneous microbatches: any vpp order costs the same") {
  const std::vector<double> enc(8, 0.7);
  const StageTimes t = skewed_times(enc, 4, 0.4);
  std::vector<double> keys(8, 0.7);
  const std::vector<int> order = inter_reorder(t, keys, 2);
  std::vector<int> identity(8);
  std::iota(identity.begin(), identity.end(), 0);
  CHECK(sim_time(t, order, 2) ==
        doctest::Approx(sim_time(t, identity, 2)).epsilon(1e-12));
}

TEST_CASE("disaggregated reorder: single group leaves intra a no-op") {
  const ModelSpec model = test::toy_model();
  const ClusterSpec cluster = test::toy_cluster(8);
  CostBook book = test::flat_book(0.4, 1.0, 0.4);
  const CostModel costs(model, cluster, book);
  Plan plan;
  plan.encoder = {1, 1, 1};
  plan.backbone = {1, 1, 2};
  plan.generator = {1, 1, 1};
  plan.global_batch = 6;
  std::vector<Sample> batch;
  for (int i = 0; i < 6; ++i) {
    batch.push_back(test::sample_with(100, {10 * (i + 1)}));
  }
  ReorderMode intra_only;
  intra_only.inter = false;
  const DisaggregatedResult r =
      disaggregated_reorder(batch, plan, costs, intra_only);
  // One DP group: the balancing pass sorts but cannot move samples across
  // groups; loads before and after are the whole batch.
  CHECK(r.report.group_load_before.size() == 1);
  CHECK(r.report.group_load_after[0] ==
        doctest::Approx(r.report.group_load_before[0]));
}

TEST_CASE("disaggregated reorder balances group loads and preserves samples") {
  const ModelSpec model = test::toy_model();
  const ClusterSpec cluster = test::toy_cluster(8);
  const CostModel costs(model, cluster, test::flat_book(0.4, 1.0, 0.4));
  Plan plan;
  plan.encoder = {1, 2, 1};
  plan.backbone = {1, 2, 2};
  plan.generator = {1, 2, 1};
  plan.global_batch = 8;
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Sample> batch;
    std::multiset<std::int64_t> input_tokens;
    for (int i = 0; i < 8; ++i) {
      const std::int64_t img = 10 + static_cast<std::int64_t>(rng() % 500);
      batch.push_back(test::sample_with(50, {img}));
      input_tokens.insert(batch.back().total_tokens());
    }
    const DisaggregatedResult r = disaggregated_reorder(batch, plan, costs);

    const auto max_of = [](const std::vector<double>& v) {
      return *std::max_element(v.begin(), v.end());
    };
    CHECK(max_of(r.report.group_load_after) <=
          max_of(r.report.group_load_before) + 1e-9);

    // Multiset preservation through the permutation and through the groups.
    std::multiset<std::int64_t> out_tokens;
    std::vector<int> order = r.report.output_order;
    for (int idx : order) out_tokens.insert(batch[idx].total_tokens());
    CHECK(out_tokens == input_tokens);
    std::sort(order.begin(), order.end());
    for (int i = 0; i < 8; ++i) CHECK(order[i] == i);

    std::multiset<std::int64_t> grouped_tokens;
    for (const auto& group : r.groups) {
      for (const Microbatch& mb : group) {
        for (const Sample& s : mb.samples) {
          grouped_tokens.insert(s.total_tokens());
        }
      }
    }
    CHECK(grouped_tokens == input_tokens);
  }
}

TEST_CASE("disaggregated reorder rejects batch size mismatches") {
  const ModelSpec model = test::toy_model();
  const CostModel costs(model, test::toy_cluster(8),
                        test::flat_book(0.4, 1.0, 0.4));
  Plan plan;
  plan.global_batch = 4;
  const std::vector<Sample> batch = {test::sample_with(10, {})};
  CHECK_THROWS_AS(disaggregated_reorder(batch, plan, costs),
                  BatchSizeMismatchError);
}

TEST_CASE("output order replays the reordered microbatch contents") {
  const ModelSpec model = test::toy_model();
  const CostModel costs(model, test::toy_cluster(8),
                        test::flat_book(0.4, 1.0, 0.4));
  Plan plan;
  plan.encoder = {1, 1, 1};
  plan.backbone = {1, 2, 1};
  plan.generator = {1, 1, 1};
  plan.global_batch = 8;
  std::mt19937_64 rng(89);
  std::vector<Sample> batch;
  for (int i = 0; i < 8; ++i) {
    batch.push_back(
        test::sample_with(20, {static_cast<std::int64_t>(rng() % 300 + 10)}));
  }
  const DisaggregatedResult r = disaggregated_reorder(batch, plan, costs);
  // Applying output_order to the raw batch and re-assembling reproduces the
  // reordered groups exactly.
  std::vector<Sample> replayed;
  for (int idx : r.report.output_order) replayed.push_back(batch[idx]);
  const auto groups = assemble_microbatches(replayed, plan);
  REQUIRE(groups.size() == r.groups.size());
  for (std::size_t e = 0; e < groups.size(); ++e) {
    REQUIRE(groups[e].size() == r.groups[e].size());
    for (std::size_t i = 0; i < groups[e].size(); ++i) {
      CHECK(groups[e][i].encoder_tokens == r.groups[e][i].encoder_tokens);
    }
  }
}
