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

#include "mmplan/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "mmplan/errors.hpp"
#include "mmplan/validate.hpp"

namespace mmplan {

namespace {

std::vector<std::int64_t> divisors(std::int64_t n) {
  std::vector<std::int64_t> out;
  for (std::int64_t d = 1; d * d <= n; ++d) {
    if (n % d == 0) {
      out.push_back(d);
      if (d != n / d) out.push_back(n / d);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Everything about one tuple that the continuous subproblem needs.
struct TupleCosts {
  std::array<double, 3> coupling;   // DP_lm / DP_u
  std::array<double, 3> cfb;        // whole-module fwd+bwd seconds
  std::array<double, 3> comm;       // one boundary crossing, seconds
  std::array<int, 3> q;             // TP_u * DP_u, the GPU granularity
  std::array<double, 3> floor_gpus; // memory + one-stage lower bound
  std::int64_t microbatches = 0;
  bool feasible = true;
  std::string reason;
};

Plan plan_from(const ParallelismTuple& t, int pp_me, int pp_lm, int pp_mg,
               std::int64_t bs, int vpp) {
  Plan plan;
  plan.encoder = {t.tp_me, t.dp_me, pp_me};
  plan.backbone = {t.tp_lm, t.dp_lm, pp_lm};
  plan.generator = {t.tp_mg, t.dp_mg, pp_mg};
  plan.global_batch = bs;
  plan.vpp = vpp;
  return plan;
}

TupleCosts tuple_costs(const ParallelismTuple& t, const CostModel& costs,
                       const WorkloadStats& stats, std::int64_t bs) {
  TupleCosts tc;
  const ClusterSpec& cluster = costs.cluster();
  const ModelSpec& model = costs.model();
  if (bs % t.dp_lm != 0) {
    tc.feasible = false;
    tc.reason = "dp does not divide the global batch";
    return tc;
  }
  tc.microbatches = bs / t.dp_lm;
  // A one-stage plan per unit carries the node-fit decision for bandwidth;
  // the boundary cost itself does not depend on PP.
  const Plan probe = plan_from(t, 1, 1, 1, bs, 1);
  const std::array<int, 3> tps = {t.tp_me, t.tp_lm, t.tp_mg};
  const std::array<int, 3> dps = {t.dp_me, t.dp_lm, t.dp_mg};
  for (int u = 0; u < 3; ++u) {
    const ModuleKind kind = kModuleKinds[u];
    tc.coupling[u] = static_cast<double>(t.dp_lm) / dps[u];
    const double load = costs.token_load(kind, stats);
    tc.cfb[u] = costs.unit_fwdbwd_time(kind, tps[u], load);
    tc.comm[u] = pp_boundary_seconds(probe, kind, cluster,
                                     costs.boundary_bytes(kind, probe, load));
    tc.q[u] = tps[u] * dps[u];

    // Per-GPU memory: (DP_u*P + S)/g + DP_lm*L/q. The activation term is
    // independent of the GPU count, so it sets a hard feasibility bar.
    const ModuleMemory& mem = model.module(kind).mem;
    const double act_const = static_cast<double>(t.dp_lm) *
                             mem.activation_bytes_per_mb / tc.q[u];
    const double headroom = cluster.gpu_mem_bytes - act_const;
    if (headroom <= 0.0) {
      tc.feasible = false;
      tc.reason = std::string("activation memory of ") + to_string(kind) +
                  " exceeds GPU capacity at any allocation";
      return tc;
    }
    const double mem_floor =
        (dps[u] * mem.param_grad_bytes + mem.optimizer_bytes) / headroom;
    tc.floor_gpus[u] = std::max(static_cast<double>(tc.q[u]), mem_floor);
  }
  double floor_sum = 0.0;
  for (double f : tc.floor_gpus) floor_sum += f;
  if (floor_sum > cluster.total_gpus) {
    tc.feasible = false;
    tc.reason = "memory floor exceeds the cluster";
  }
  return tc;
}

// Continuous subproblem for a fixed tuple. With g_u GPUs for unit u
// (pp_u = g_u / q_u):
//   stage_u(g)  = b_u / g_u + c_u              (per-stage fwd+bwd)
//   warm(g)     = (W0 + sum_u a_u * g_u) / vpp
//   T(g)        = warm(g) + max_u stage_u(g) * (M - 1) + dp_sync
// Parametrized by the steady bound L: g_u(L) = max(floor_u, b_u / (L - c_u))
// is the cheapest split attaining max <= L, so T reduces to a convex
// one-dimensional function of L, minimized by ternary search.
struct ContinuousSolution {
  bool feasible = false;
  std::string reason;
  std::array<double, 3> gpus{};
  double t_iter = 0.0;
};

ContinuousSolution solve_continuous(const TupleCosts& tc, double total_gpus,
                                    int vpp, double dp_sync) {
  ContinuousSolution sol;
  std::array<double, 3> a{}, b{}, c{};
  double w0 = 0.0;
  for (int u = 0; u < 3; ++u) {
    b[u] = tc.coupling[u] * tc.cfb[u] * tc.q[u];
    c[u] = 2.0 * vpp * tc.comm[u];
    a[u] = 2.0 * tc.comm[u] / tc.q[u];
    w0 += tc.coupling[u] * tc.cfb[u];
  }
  w0 /= vpp;
  const double steady_mult = static_cast<double>(tc.microbatches - 1);

  const auto gpus_at = [&](double bound, std::array<double, 3>& g) {
    double sum = 0.0;
    for (int u = 0; u < 3; ++u) {
      const double need = bound > c[u]
                              ? b[u] / (bound - c[u])
                              : std::numeric_limits<double>::infinity();
      g[u] = std::max(tc.floor_gpus[u], need);
      sum += g[u];
    }
    return sum;
  };
  const auto objective = [&](double bound, std::array<double, 3>& g) {
    gpus_at(bound, g);
    double warm_comm = 0.0;
    double stage_max = 0.0;
    for (int u = 0; u < 3; ++u) {
      warm_comm += a[u] * g[u];
      stage_max = std::max(stage_max, b[u] / g[u] + c[u]);
    }
    return w0 + warm_comm + stage_max * steady_mult + dp_sync;
  };

  // Largest useful bound: every unit at its floor.
  double hi = 0.0;
  double cmax = 0.0;
  for (int u = 0; u < 3; ++u) {
    hi = std::max(hi, b[u] / tc.floor_gpus[u] + c[u]);
    cmax = std::max(cmax, c[u]);
  }
  // Smallest resource-feasible bound via bisection on the monotone GPU sum.
  double lo = cmax + 1e-300;
  {
    std::array<double, 3> g{};
    if (gpus_at(hi, g) > total_gpus) {
      sol.reason = "memory floor exceeds the cluster";
      return sol;
    }
    double bad = lo;  // sum > N (or degenerate), good = hi
    double good = hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (bad + good);
      if (gpus_at(mid, g) <= total_gpus) {
        good = mid;
      } else {
        bad = mid;
      }
    }
    lo = good;
  }

  std::array<double, 3> g{};
  double t_lo = lo, t_hi = hi;
  for (int it = 0; it < 200; ++it) {
    const double m1 = t_lo + (t_hi - t_lo) / 3.0;
    const double m2 = t_hi - (t_hi - t_lo) / 3.0;
    if (objective(m1, g) <= objective(m2, g)) {
      t_hi = m2;
    } else {
      t_lo = m1;
    }
  }
  const double best_bound = 0.5 * (t_lo + t_hi);
  sol.t_iter = objective(best_bound, sol.gpus);
  sol.feasible = true;
  return sol;
}

struct BestTracker {
  bool has = false;
  CandidateResult best;

  // Minimize t_iter; ties fall to fewer GPUs, then the smaller tuple, then
  // the smaller PP triple, keeping the search order-independent.
  bool offer(const CandidateResult& cand) {
    if (!cand.feasible) return false;
    if (has) {
      const auto key = [](const CandidateResult& c) {
        return std::make_tuple(c.plan.total_gpus(), c.tuple, c.plan.encoder.pp,
                               c.plan.backbone.pp, c.plan.generator.pp);
      };
      if (cand.times.t_iter > best.times.t_iter) return false;
      if (cand.times.t_iter == best.times.t_iter && key(cand) >= key(best)) {
        return false;
      }
    }
    best = cand;
    has = true;
    return true;
  }
};

}  // namespace

PredictedTimes predict_times(const Plan& plan, const CostModel& costs,
                             const WorkloadStats& stats) {
  const ModelSpec& model = costs.model();
  const std::int64_t microbatches = plan.microbatch_count();
  if (microbatches < 1) {
    throw InternalError("plan yields no microbatches per iteration");
  }
  PredictedTimes out;
  double stage_max = 0.0;
  for (ModuleKind kind : kModuleKinds) {
    const ParallelismChoice& pc = plan.unit(kind);
    const double coupling =
        kind == ModuleKind::Backbone
            ? 1.0
            : static_cast<double>(plan.backbone.dp) / pc.dp;
    const double load = costs.token_load(kind, stats);
    const double cfb = costs.unit_fwdbwd_time(kind, pc.tp, load);
    const double comm = pp_boundary_seconds(
        plan, kind, costs.cluster(), costs.boundary_bytes(kind, plan, load));
    // Interleaving shrinks the compute ramp by the vpp factor; boundary
    // traffic grows with the virtual stage count, which cancels it.
    out.t_warm += coupling * cfb / plan.vpp + pc.pp * 2.0 * comm;
    // Per device and microbatch: vpp chunks of compute plus their sends.
    stage_max = std::max(stage_max,
                         coupling * cfb / pc.pp + plan.vpp * 2.0 * comm);
  }
  out.t_steady = stage_max * static_cast<double>(microbatches - 1);
  out.t_iter = out.t_warm + out.t_steady + model.dp_sync_seconds;
  return out;
}

std::vector<ParallelismTuple> enumerate_parallelism(const ClusterSpec& cluster,
                                                    std::int64_t global_batch) {
  std::vector<ParallelismTuple> out;
  const int n = cluster.total_gpus;
  const auto dp_lms = divisors(global_batch);
  for (int tp_me : kAllowedTp) {
    for (int tp_lm : kAllowedTp) {
      for (int tp_mg : kAllowedTp) {
        for (std::int64_t dp_lm : dp_lms) {
          if (tp_lm * dp_lm > n) continue;
          for (std::int64_t dp_me : divisors(dp_lm)) {
            if (tp_me * dp_me > n) continue;
            for (std::int64_t dp_mg : divisors(dp_lm)) {
              ParallelismTuple t;
              t.tp_me = tp_me;
              t.dp_me = static_cast<int>(dp_me);
              t.tp_lm = tp_lm;
              t.dp_lm = static_cast<int>(dp_lm);
              t.tp_mg = tp_mg;
              t.dp_mg = static_cast<int>(dp_mg);
              if (t.tp_me * t.dp_me + t.tp_lm * t.dp_lm + t.tp_mg * t.dp_mg >
                  n) {
                continue;
              }
              out.push_back(t);
            }
          }
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

CandidateResult solve_subproblem(const ParallelismTuple& tuple,
                                 const CostModel& costs,
                                 const WorkloadStats& stats,
                                 std::int64_t global_batch, int vpp) {
  CandidateResult result;
  result.tuple = tuple;

  const TupleCosts tc = tuple_costs(tuple, costs, stats, global_batch);
  if (!tc.feasible) {
    result.infeasible_reason = tc.reason;
    return result;
  }
  const ClusterSpec& cluster = costs.cluster();
  const ContinuousSolution cont =
      solve_continuous(tc, cluster.total_gpus, vpp,
                       costs.model().dp_sync_seconds);
  if (!cont.feasible) {
    result.infeasible_reason = cont.reason;
    return result;
  }
  result.cont_x = cont.gpus[0];
  result.cont_y = cont.gpus[1];
  result.cont_z = cont.gpus[2];
  result.cont_t_iter = cont.t_iter;

  // Round the continuous split to whole stages: the neighborhood of the
  // relaxed optimum, a single stage, and the largest stage count the other
  // units' minimal footprints leave room for.
  std::array<std::vector<int>, 3> pp_cands;
  const int n = cluster.total_gpus;
  const int q_sum = tc.q[0] + tc.q[1] + tc.q[2];
  for (int u = 0; u < 3; ++u) {
    const double cont_pp = cont.gpus[u] / tc.q[u];
    const int pp_max = (n - (q_sum - tc.q[u])) / tc.q[u];
    std::set<int> cands;
    for (int pp : {static_cast<int>(std::floor(cont_pp)) - 1,
                   static_cast<int>(std::floor(cont_pp)),
                   static_cast<int>(std::ceil(cont_pp)),
                   static_cast<int>(std::ceil(cont_pp)) + 1, 1, pp_max}) {
      if (pp >= 1 && pp <= pp_max) cands.insert(pp);
    }
    pp_cands[u].assign(cands.begin(), cands.end());
  }

  BestTracker tracker;
  const ModelSpec& model = costs.model();
  for (int pp_me : pp_cands[0]) {
    for (int pp_lm : pp_cands[1]) {
      for (int pp_mg : pp_cands[2]) {
        const long gpus = static_cast<long>(tc.q[0]) * pp_me +
                          static_cast<long>(tc.q[1]) * pp_lm +
                          static_cast<long>(tc.q[2]) * pp_mg;
        if (gpus > n) continue;
        Plan plan = plan_from(tuple, pp_me, pp_lm, pp_mg, global_batch, vpp);
        if (vpp > 1 && tc.microbatches % plan.pipeline_devices() != 0) {
          continue;
        }
        if (!memory_check(plan, model, cluster).pass) continue;
        CandidateResult cand;
        cand.tuple = tuple;
        cand.feasible = true;
        cand.plan = plan;
        cand.times = predict_times(plan, costs, stats);
        tracker.offer(cand);
      }
    }
  }
  if (!tracker.has) {
    result.infeasible_reason = "no integer stage split is feasible";
    return result;
  }
  result.feasible = true;
  result.plan = tracker.best.plan;
  result.times = tracker.best.times;
  return result;
}

OrchestrationResult model_orchestration(const CostModel& costs,
                                        const WorkloadStats& stats,
                                        std::int64_t global_batch,
                                        const OrchestrationOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  OrchestrationResult out;
  const auto tuples =
      enumerate_parallelism(costs.cluster(), global_batch);
  BestTracker tracker;
  for (const ParallelismTuple& tuple : tuples) {
    const CandidateResult cand =
        solve_subproblem(tuple, costs, stats, global_batch, options.vpp);
    ++out.candidates_evaluated;
    if (options.keep_candidates) out.candidates.push_back(cand);
    tracker.offer(cand);
  }
  out.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (!tracker.has) {
    throw InfeasibleError("no feasible plan for this model and cluster");
  }
  out.best = tracker.best.plan;
  out.times = tracker.best.times;
  return out;
}

Plan rigid_baseline(const CostModel& costs, const WorkloadStats& stats,
                    std::int64_t global_batch, int vpp) {
  const ClusterSpec& cluster = costs.cluster();
  const ModelSpec& model = costs.model();
  BestTracker tracker;
  for (int tp : kAllowedTp) {
    for (std::int64_t dp : divisors(global_batch)) {
      const long q = static_cast<long>(tp) * dp;
      const int pp_lm = static_cast<int>((cluster.total_gpus - 2 * q) / q);
      if (pp_lm < 1) continue;
      ParallelismTuple tuple;
      tuple.tp_me = tuple.tp_lm = tuple.tp_mg = tp;
      tuple.dp_me = tuple.dp_lm = tuple.dp_mg = static_cast<int>(dp);
      Plan plan = plan_from(tuple, 1, pp_lm, 1, global_batch, vpp);
      if (vpp > 1 &&
          plan.microbatch_count() % plan.pipeline_devices() != 0) {
        continue;
      }
      if (!validate_plan(plan, cluster, model).ok()) continue;
      CandidateResult cand;
      cand.tuple = tuple;
      cand.feasible = true;
      cand.plan = plan;
      cand.times = predict_times(plan, costs, stats);
      tracker.offer(cand);
    }
  }
  if (!tracker.has) {
    throw InfeasibleError("no feasible rigid configuration");
  }
  return tracker.best.plan;
}

OrchestrationResult brute_force_oracle(const CostModel& costs,
                                       const WorkloadStats& stats,
                                       std::int64_t global_batch,
                                       const BruteForceOptions& options) {
  const ClusterSpec& cluster = costs.cluster();
  if (cluster.total_gpus > options.gpu_cap) {
    throw CapExceededError("exhaustive search capped at " +
                           std::to_string(options.gpu_cap) + " GPUs, got " +
                           std::to_string(cluster.total_gpus));
  }
  const auto t0 = std::chrono::steady_clock::now();
  OrchestrationResult out;
  const ModelSpec& model = costs.model();
  const int n = cluster.total_gpus;
  BestTracker tracker;
  for (const ParallelismTuple& tuple :
       enumerate_parallelism(cluster, global_batch)) {
    const int q_me = tuple.tp_me * tuple.dp_me;
    const int q_lm = tuple.tp_lm * tuple.dp_lm;
    const int q_mg = tuple.tp_mg * tuple.dp_mg;
    for (int pp_me = 1; q_me * pp_me + q_lm + q_mg <= n; ++pp_me) {
      for (int pp_lm = 1; q_me * pp_me + q_lm * pp_lm + q_mg <= n; ++pp_lm) {
        for (int pp_mg = 1;
             q_me * pp_me + q_lm * pp_lm + q_mg * pp_mg <= n; ++pp_mg) {
          Plan plan = plan_from(tuple, pp_me, pp_lm, pp_mg, global_batch,
                                options.vpp);
          if (options.vpp > 1 &&
              plan.microbatch_count() % plan.pipeline_devices() != 0) {
            continue;
          }
          if (!memory_check(plan, model, cluster).pass) continue;
          CandidateResult cand;
          cand.tuple = tuple;
          cand.feasible = true;
          cand.plan = plan;
          cand.times = predict_times(plan, costs, stats);
          ++out.candidates_evaluated;
          tracker.offer(cand);
        }
      }
    }
  }
  out.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (!tracker.has) {
    throw InfeasibleError("no feasible plan in the exhaustive search");
  }
  out.best = tracker.best.plan;
  out.times = tracker.best.times;
  return out;
}

}  // namespace mmplan
