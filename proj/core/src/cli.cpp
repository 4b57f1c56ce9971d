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

#include "mmplan/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mmplan/config.hpp"
#include "mmplan/errors.hpp"
#include "mmplan/orchestrator.hpp"
#include "mmplan/reorder.hpp"
#include "mmplan/report.hpp"
#include "mmplan/simulate.hpp"
#include "mmplan/validate.hpp"
#include "mmplan/workload.hpp"

namespace mmplan {

namespace {

using nlohmann::ordered_json;

int log_level_cached() {
  const char* env = std::getenv("MMPLAN_LOG");
  if (env == nullptr) return 0;
  return std::atoi(env);
}

void log_info(const std::string& message) {
  if (log_level() >= 1) std::cerr << "[mmplan] " << message << "\n";
}

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&now));
  return buf;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write output: " + path);
  out << text << "\n";
}

ordered_json plan_json(const Plan& plan) {
  const auto unit = [](const ParallelismChoice& pc) {
    return ordered_json{{"tp", pc.tp}, {"dp", pc.dp}, {"pp", pc.pp}};
  };
  return ordered_json{
      {"alloc",
       {{"encoder", plan.encoder_gpus()},
        {"backbone", plan.backbone_gpus()},
        {"generator", plan.generator_gpus()},
        {"total", plan.total_gpus()}}},
      {"encoder", unit(plan.encoder)},
      {"backbone", unit(plan.backbone)},
      {"generator", unit(plan.generator)},
      {"global_batch", plan.global_batch},
      {"vpp", plan.vpp},
  };
}

Plan plan_from_json(const ordered_json& j) {
  const auto unit = [&](const char* name) {
    const ordered_json& u = j.at(name);
    ParallelismChoice pc;
    pc.tp = u.at("tp").get<int>();
    pc.dp = u.at("dp").get<int>();
    pc.pp = u.at("pp").get<int>();
    return pc;
  };
  Plan plan;
  plan.encoder = unit("encoder");
  plan.backbone = unit("backbone");
  plan.generator = unit("generator");
  plan.global_batch = j.at("global_batch").get<std::int64_t>();
  plan.vpp = j.value("vpp", 1);
  return plan;
}

Plan load_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open plan: " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  try {
    if (j.contains("plan")) return plan_from_json(j.at("plan"));
    return plan_from_json(j);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": not a plan or plan report: " + e.what());
  }
}

ordered_json times_json(const PredictedTimes& t) {
  return ordered_json{
      {"t_warm_s", t.t_warm}, {"t_steady_s", t.t_steady}, {"t_iter_s", t.t_iter}};
}

// A workload argument is either a distribution config (one JSON object) or
// a line-delimited trace. Loads samples and remembers which it was.
struct WorkloadInput {
  std::vector<Sample> samples;
  std::int64_t seq_len = 0;
  bool synthesized = false;
};

WorkloadInput load_workload(const std::string& path, std::int64_t batch,
                            std::uint64_t seed, std::int64_t seq_len_cap) {
  std::ifstream probe(path);
  if (!probe) throw ConfigError("cannot open workload: " + path);
  ordered_json whole;
  bool whole_ok = true;
  try {
    whole = ordered_json::parse(probe);
  } catch (const std::exception&) {
    whole_ok = false;
  }
  // A single-object file is a distribution config unless it looks like a
  // one-record trace (text_tokens as a number rather than a distribution).
  const bool single_record = whole_ok && whole.is_object() &&
                             whole.contains("text_tokens") &&
                             whole.at("text_tokens").is_number();
  WorkloadInput input;
  if (whole_ok && whole.is_object() && !single_record) {
    WorkloadSpec spec = load_workload_config(path);
    if (seed != 0) spec.seed = seed;
    if (batch < 1) {
      throw ConfigError("synthesizing a workload requires a batch size");
    }
    input.samples = synth_batch(spec, batch);
    input.seq_len = spec.seq_len;
    input.synthesized = true;
    return input;
  }
  input.samples = ingest_trace_file(path, seq_len_cap);
  input.seq_len = seq_len_cap;
  return input;
}

WorkloadStats stats_for(const ModelConfig& config,
                        const WorkloadInput* workload) {
  if (workload != nullptr && !workload->samples.empty()) {
    return compute_stats(workload->samples, config.model.seq_len);
  }
  WorkloadStats stats;
  stats.seq_len = config.model.seq_len;
  stats.mean_encoder_tokens = config.expected_encoder_tokens;
  stats.mean_generator_tokens = config.expected_generator_tokens;
  return stats;
}

ordered_json error_json(const std::string& kind, const std::string& what) {
  return ordered_json{{"schema", kErrorSchema},
                      {"error", {{"kind", kind}, {"message", what}}}};
}

// Uniform failure handling: machine-readable error object on the report
// stream, matching exit code.
template <typename Body>
int run_command(const std::string& out_path, Body&& body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    emit(out_path, error_json("config", e.what()).dump(2));
    return kExitConfigError;
  } catch (const InfeasibleError& e) {
    emit(out_path, error_json("infeasible", e.what()).dump(2));
    return kExitInfeasible;
  } catch (const std::exception& e) {
    emit(out_path, error_json("internal", e.what()).dump(2));
    return kExitInternalError;
  }
}

ReorderMode parse_reorder_mode(const std::string& text) {
  ReorderMode mode;
  if (text == "none") {
    mode.intra = mode.inter = false;
  } else if (text == "intra") {
    mode.inter = false;
  } else if (text == "inter") {
    mode.intra = false;
  } else if (text == "both") {
    mode.intra = mode.inter = true;
  } else {
    throw ConfigError("unknown reorder mode '" + text +
                      "' (expected none|intra|inter|both)");
  }
  return mode;
}

struct SimOutcome {
  IterationResult iteration;
  double mfu_value = 0.0;
  std::optional<ReorderReport> reorder_report;
};

SimOutcome simulate_with_mode(const Plan& plan, const CostModel& costs,
                              const std::vector<Sample>& samples,
                              const WorkloadStats& stats,
                              const ReorderMode& mode, bool any_reorder) {
  SimOutcome outcome;
  if (any_reorder) {
    DisaggregatedResult reordered =
        disaggregated_reorder(samples, plan, costs, mode);
    outcome.iteration = simulate_iteration(plan, costs, reordered.groups);
    outcome.reorder_report = std::move(reordered.report);
  } else {
    outcome.iteration =
        simulate_iteration(plan, costs, assemble_microbatches(samples, plan));
  }
  outcome.mfu_value = mfu(plan, costs.model(), costs.cluster(), stats,
                          outcome.iteration.t_iter);
  return outcome;
}

ordered_json simulated_json(const SimOutcome& outcome) {
  ordered_json j{
      {"t_iter_s", outcome.iteration.t_iter},
      {"slowest_group", outcome.iteration.slowest_group},
      {"group_times_s", outcome.iteration.group_times},
      {"bubble_fraction_mean", outcome.iteration.mean_bubble_fraction},
      {"mfu", outcome.mfu_value},
  };
  return j;
}

ordered_json reorder_report_json(const ReorderReport& report) {
  return ordered_json{
      {"output_order", report.output_order},
      {"group_load_before", report.group_load_before},
      {"group_load_after", report.group_load_after},
      {"t_iter_before_s", report.t_iter_before},
      {"t_iter_after_s", report.t_iter_after},
  };
}

void validate_or_throw(const Plan& plan, const ClusterSpec& cluster,
                       const ModelSpec& model) {
  const ValidationResult check = validate_plan(plan, cluster, model);
  if (!check.ok()) {
    throw InfeasibleError("plan fails validation: " + check.describe());
  }
}

}  // namespace

int log_level() { return log_level_cached(); }

int cmd_plan(const PlanCmd& cmd) {
  return run_command(cmd.out, [&] {
    const auto wall0 = std::chrono::steady_clock::now();
    const ModelConfig model_config = load_model_config(cmd.model_config);
    const ClusterSpec cluster = load_cluster_config(cmd.cluster_config);
    if (cmd.global_batch < 1) throw ConfigError("--bs must be >= 1");
    CostModel costs = load_cost_model(model_config, cluster);
    std::vector<std::string> warnings;
    costs.set_warning_sink(&warnings);

    std::optional<WorkloadInput> workload;
    if (!cmd.workload.empty()) {
      workload = load_workload(cmd.workload, cmd.global_batch, cmd.seed,
                               model_config.model.seq_len);
    }
    const WorkloadStats stats =
        stats_for(model_config, workload ? &*workload : nullptr);

    OrchestrationOptions options;
    options.vpp = cmd.vpp;
    options.keep_candidates = cmd.full_candidate_table;
    const OrchestrationResult result =
        model_orchestration(costs, stats, cmd.global_batch, options);
    log_info("orchestration finished in " +
             std::to_string(result.solve_seconds) + " s");

    ordered_json report;
    report["schema"] = kPlanReportSchema;
    report["inputs"] = {
        {"model_digest", file_digest(cmd.model_config)},
        {"cluster_digest", file_digest(cmd.cluster_config)},
        {"workload_digest",
         cmd.workload.empty() ? "" : file_digest(cmd.workload)},
        {"global_batch", cmd.global_batch},
        {"vpp", cmd.vpp},
        {"seed", cmd.seed},
    };
    report["plan"] = plan_json(result.best);
    report["predicted"] = times_json(result.times);
    report["candidates_evaluated"] = result.candidates_evaluated;

    try {
      const Plan rigid = rigid_baseline(costs, stats, cmd.global_batch,
                                        cmd.vpp);
      const PredictedTimes rigid_times = predict_times(rigid, costs, stats);
      report["baseline"] = {
          {"plan", plan_json(rigid)},
          {"predicted", times_json(rigid_times)},
          {"predicted_speedup", rigid_times.t_iter / result.times.t_iter},
      };
    } catch (const InfeasibleError&) {
      report["baseline"] = nullptr;
    }

    if (cmd.full_candidate_table) {
      ordered_json table = ordered_json::array();
      for (const CandidateResult& cand : result.candidates) {
        ordered_json row{
            {"tuple",
             {{"tp_me", cand.tuple.tp_me},
              {"dp_me", cand.tuple.dp_me},
              {"tp_lm", cand.tuple.tp_lm},
              {"dp_lm", cand.tuple.dp_lm},
              {"tp_mg", cand.tuple.tp_mg},
              {"dp_mg", cand.tuple.dp_mg}}},
            {"feasible", cand.feasible},
        };
        if (cand.feasible) {
          row["continuous"] = {{"x", cand.cont_x},
                               {"y", cand.cont_y},
                               {"z", cand.cont_z},
                               {"t_iter_s", cand.cont_t_iter}};
          row["plan"] = plan_json(cand.plan);
          row["predicted"] = times_json(cand.times);
        } else {
          row["reason"] = cand.infeasible_reason;
        }
        table.push_back(std::move(row));
      }
      report["candidates"] = std::move(table);
    }
    report["warnings"] = warnings;
    report["meta"] = {
        {"timestamp", iso_timestamp()},
        {"solve_ms", result.solve_seconds * 1e3},
        {"wall_ms",
         std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - wall0)
             .count()},
    };
    emit(cmd.out, report.dump(2));
  });
}

int cmd_simulate(const SimulateCmd& cmd) {
  return run_command(cmd.out, [&] {
    const auto wall0 = std::chrono::steady_clock::now();
    const ModelConfig model_config = load_model_config(cmd.model_config);
    const ClusterSpec cluster = load_cluster_config(cmd.cluster_config);
    const Plan plan = load_plan_file(cmd.plan_file);
    validate_or_throw(plan, cluster, model_config.model);

    const WorkloadInput workload = load_workload(
        cmd.workload, plan.global_batch, cmd.seed, model_config.model.seq_len);
    if (static_cast<std::int64_t>(workload.samples.size()) !=
        plan.global_batch) {
      throw ConfigError(
          "workload has " + std::to_string(workload.samples.size()) +
          " samples but the plan's global batch is " +
          std::to_string(plan.global_batch));
    }
    if (workload.synthesized && workload.seq_len != model_config.model.seq_len) {
      throw ConfigError("workload seq_len does not match the model seq_len");
    }

    CostModel costs = load_cost_model(model_config, cluster);
    std::vector<std::string> warnings;
    costs.set_warning_sink(&warnings);
    const WorkloadStats stats =
        compute_stats(workload.samples, model_config.model.seq_len);
    const ReorderMode mode = parse_reorder_mode(cmd.reorder);
    const bool any = mode.intra || mode.inter;
    const SimOutcome outcome = simulate_with_mode(
        plan, costs, workload.samples, stats, mode, any);

    if (!cmd.trace_out.empty()) {
      const Timeline& tl =
          outcome.iteration.timelines[outcome.iteration.slowest_group];
      emit(cmd.trace_out, to_trace_json(tl));
    }

    ordered_json report;
    report["schema"] = kSimReportSchema;
    report["inputs"] = {
        {"plan_digest", file_digest(cmd.plan_file)},
        {"model_digest", file_digest(cmd.model_config)},
        {"cluster_digest", file_digest(cmd.cluster_config)},
        {"workload_digest", file_digest(cmd.workload)},
        {"seed", cmd.seed},
        {"reorder", cmd.reorder},
    };
    report["plan"] = plan_json(plan);
    report["predicted"] = times_json(predict_times(plan, costs, stats));
    report["simulated"] = simulated_json(outcome);
    if (outcome.reorder_report) {
      report["reorder_report"] = reorder_report_json(*outcome.reorder_report);
    }
    report["warnings"] = warnings;
    report["meta"] = {
        {"timestamp", iso_timestamp()},
        {"wall_ms",
         std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - wall0)
             .count()},
    };
    emit(cmd.out, report.dump(2));
  });
}

int cmd_compare(const CompareCmd& cmd) {
  return run_command(cmd.out, [&] {
    const auto wall0 = std::chrono::steady_clock::now();
    const ModelConfig model_config = load_model_config(cmd.model_config);
    const ClusterSpec cluster = load_cluster_config(cmd.cluster_config);
    if (cmd.global_batch < 1) throw ConfigError("--bs must be >= 1");
    const WorkloadInput workload = load_workload(
        cmd.workload, cmd.global_batch, cmd.seed, model_config.model.seq_len);
    if (static_cast<std::int64_t>(workload.samples.size()) !=
        cmd.global_batch) {
      throw ConfigError("workload sample count does not match --bs");
    }
    CostModel costs = load_cost_model(model_config, cluster);
    std::vector<std::string> warnings;
    costs.set_warning_sink(&warnings);
    const WorkloadStats stats =
        compute_stats(workload.samples, model_config.model.seq_len);

    OrchestrationOptions options;
    options.vpp = cmd.vpp;
    const OrchestrationResult optimized =
        model_orchestration(costs, stats, cmd.global_batch, options);
    const Plan rigid = rigid_baseline(costs, stats, cmd.global_batch, cmd.vpp);
    const PredictedTimes rigid_times = predict_times(rigid, costs, stats);

    const ReorderMode both;
    const SimOutcome opt_identity = simulate_with_mode(
        optimized.best, costs, workload.samples, stats, both, false);
    const SimOutcome opt_reordered = simulate_with_mode(
        optimized.best, costs, workload.samples, stats, both, true);
    const SimOutcome rigid_identity = simulate_with_mode(
        rigid, costs, workload.samples, stats, both, false);

    ordered_json report;
    report["schema"] = kCompareReportSchema;
    report["inputs"] = {
        {"model_digest", file_digest(cmd.model_config)},
        {"cluster_digest", file_digest(cmd.cluster_config)},
        {"workload_digest", file_digest(cmd.workload)},
        {"global_batch", cmd.global_batch},
        {"vpp", cmd.vpp},
        {"seed", cmd.seed},
    };
    report["optimized"] = {
        {"plan", plan_json(optimized.best)},
        {"predicted", times_json(optimized.times)},
        {"simulated_identity", simulated_json(opt_identity)},
        {"simulated_reordered", simulated_json(opt_reordered)},
    };
    report["baseline"] = {
        {"plan", plan_json(rigid)},
        {"predicted", times_json(rigid_times)},
        {"simulated_identity", simulated_json(rigid_identity)},
    };
    report["speedup"] = {
        {"predicted", rigid_times.t_iter / optimized.times.t_iter},
        {"simulated_identity",
         rigid_identity.iteration.t_iter / opt_identity.iteration.t_iter},
        {"simulated_reordered",
         rigid_identity.iteration.t_iter / opt_reordered.iteration.t_iter},
    };
    report["candidates_evaluated"] = optimized.candidates_evaluated;
    report["warnings"] = warnings;
    report["meta"] = {
        {"timestamp", iso_timestamp()},
        {"solve_ms", optimized.solve_seconds * 1e3},
        {"wall_ms",
         std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - wall0)
             .count()},
    };
    emit(cmd.out, report.dump(2));
  });
}

int cmd_reorder(const ReorderCmd& cmd) {
  return run_command(cmd.out, [&] {
    const auto wall0 = std::chrono::steady_clock::now();
    const ModelConfig model_config = load_model_config(cmd.model_config);
    const ClusterSpec cluster = load_cluster_config(cmd.cluster_config);
    const Plan plan = load_plan_file(cmd.plan_file);
    validate_or_throw(plan, cluster, model_config.model);
    const WorkloadInput workload = load_workload(
        cmd.workload, plan.global_batch, cmd.seed, model_config.model.seq_len);
    CostModel costs = load_cost_model(model_config, cluster);
    std::vector<std::string> warnings;
    costs.set_warning_sink(&warnings);
    const ReorderMode mode = parse_reorder_mode(cmd.mode);
    const DisaggregatedResult result =
        disaggregated_reorder(workload.samples, plan, costs, mode);

    if (!cmd.order_out.empty()) {
      ordered_json order = result.report.output_order;
      emit(cmd.order_out, order.dump());
    }
    ordered_json report;
    report["schema"] = kReorderReportSchema;
    report["inputs"] = {
        {"plan_digest", file_digest(cmd.plan_file)},
        {"workload_digest", file_digest(cmd.workload)},
        {"mode", cmd.mode},
        {"seed", cmd.seed},
    };
    report["reorder_report"] = reorder_report_json(result.report);
    report["warnings"] = warnings;
    report["meta"] = {
        {"timestamp", iso_timestamp()},
        {"wall_ms",
         std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - wall0)
             .count()},
    };
    emit(cmd.out, report.dump(2));
  });
}

int cmd_generate(const GenerateCmd& cmd) {
  return run_command("", [&] {
    WorkloadSpec spec = load_workload_config(cmd.workload_config);
    if (cmd.seed) spec.seed = *cmd.seed;
    if (cmd.batch < 1) throw ConfigError("--bs must be >= 1");
    const std::vector<Sample> samples = synth_batch(spec, cmd.batch);
    if (cmd.out.empty()) {
      write_trace(std::cout, samples);
    } else {
      write_trace_file(cmd.out, samples);
    }
    log_info("generated " + std::to_string(samples.size()) + " samples");
  });
}

}  // namespace mmplan
