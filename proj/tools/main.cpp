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

#include <CLI11.hpp>

#include "mmplan/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Planner and simulator for disaggregated multimodal transformer "
      "training: GPU orchestration, heterogeneous 1F1B pipeline simulation, "
      "and data reordering."};
  app.require_subcommand(1);

  mmplan::PlanCmd plan_cmd;
  CLI::App* plan = app.add_subcommand(
      "plan", "Choose the GPU allocation and parallelism per module");
  plan->add_option("--model", plan_cmd.model_config, "Model config (JSON)")
      ->required();
  plan->add_option("--cluster", plan_cmd.cluster_config, "Cluster config (JSON)")
      ->required();
  plan->add_option("--workload", plan_cmd.workload,
                   "Workload config or trace used for expected token loads");
  plan->add_option("--bs", plan_cmd.global_batch, "Global batch size")
      ->required();
  plan->add_option("--vpp", plan_cmd.vpp, "Virtual pipeline factor");
  plan->add_option("--seed", plan_cmd.seed, "Workload synthesis seed");
  plan->add_option("--out", plan_cmd.out, "Report path (default stdout)");
  plan->add_flag("!--no-candidate-table", plan_cmd.full_candidate_table,
                 "Omit the per-candidate table from the report");

  mmplan::SimulateCmd sim_cmd;
  CLI::App* sim = app.add_subcommand(
      "simulate", "Simulate one training iteration of a plan on a workload");
  sim->add_option("--plan", sim_cmd.plan_file, "Plan file or plan report")
      ->required();
  sim->add_option("--model", sim_cmd.model_config, "Model config (JSON)")
      ->required();
  sim->add_option("--cluster", sim_cmd.cluster_config, "Cluster config (JSON)")
      ->required();
  sim->add_option("--workload", sim_cmd.workload,
                  "Workload config or trace file")
      ->required();
  sim->add_option("--reorder", sim_cmd.reorder,
                  "Data reordering: none|intra|inter|both");
  sim->add_option("--seed", sim_cmd.seed, "Workload synthesis seed");
  sim->add_option("--out", sim_cmd.out, "Report path (default stdout)");
  sim->add_option("--emit-trace", sim_cmd.trace_out,
                  "Write the slowest pipeline's timeline as trace-event JSON");

  mmplan::CompareCmd compare_cmd;
  CLI::App* compare = app.add_subcommand(
      "compare", "Optimized plan vs the rigid baseline, simulated end to end");
  compare->add_option("--model", compare_cmd.model_config, "Model config")
      ->required();
  compare->add_option("--cluster", compare_cmd.cluster_config, "Cluster config")
      ->required();
  compare->add_option("--workload", compare_cmd.workload, "Workload")
      ->required();
  compare->add_option("--bs", compare_cmd.global_batch, "Global batch size")
      ->required();
  compare->add_option("--vpp", compare_cmd.vpp, "Virtual pipeline factor");
  compare->add_option("--seed", compare_cmd.seed, "Workload synthesis seed");
  compare->add_option("--out", compare_cmd.out, "Report path (default stdout)");

  mmplan::ReorderCmd reorder_cmd;
  CLI::App* reorder = app.add_subcommand(
      "reorder", "Reorder a global batch for a plan and report the effect");
  reorder->add_option("--plan", reorder_cmd.plan_file, "Plan file")->required();
  reorder->add_option("--model", reorder_cmd.model_config, "Model config")
      ->required();
  reorder->add_option("--cluster", reorder_cmd.cluster_config, "Cluster config")
      ->required();
  reorder->add_option("--workload", reorder_cmd.workload, "Workload")
      ->required();
  reorder->add_option("--mode", reorder_cmd.mode,
                      "Reordering: none|intra|inter|both");
  reorder->add_option("--seed", reorder_cmd.seed, "Workload synthesis seed");
  reorder->add_option("--out", reorder_cmd.out, "Report path (default stdout)");
  reorder->add_option("--order-out", reorder_cmd.order_out,
                      "Write the sample permutation as a JSON integer list");

  mmplan::GenerateCmd gen_cmd;
  std::uint64_t gen_seed = 0;
  CLI::App* gen = app.add_subcommand(
      "generate", "Synthesize a heterogeneous training trace");
  gen->add_option("--workload", gen_cmd.workload_config, "Workload config")
      ->required();
  gen->add_option("--bs", gen_cmd.batch, "Sample count")->required();
  CLI::Option* seed_opt =
      gen->add_option("--seed", gen_seed, "Override the config seed");
  gen->add_option("--out", gen_cmd.out, "Trace path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  if (plan->parsed()) return mmplan::cmd_plan(plan_cmd);
  if (sim->parsed()) return mmplan::cmd_simulate(sim_cmd);
  if (compare->parsed()) return mmplan::cmd_compare(compare_cmd);
  if (reorder->parsed()) return mmplan::cmd_reorder(reorder_cmd);
  if (gen->parsed()) {
    if (seed_opt->count() > 0) gen_cmd.seed = gen_seed;
    return mmplan::cmd_generate(gen_cmd);
  }
  return mmplan::kExitConfigError;
}
