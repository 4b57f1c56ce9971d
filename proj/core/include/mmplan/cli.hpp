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

#include <cstdint>
#include <optional>
#include <string>

namespace mmplan {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitInternalError = 4;

// Commands are pure functions of their file inputs, flags, and seed: a rerun
// writes a byte-identical report except for the volatile "meta" block. On
// failure they emit a machine-readable error object instead of a report and
// return the matching exit code.

struct PlanCmd {
  std::string model_config;
  std::string cluster_config;
  std::string workload;  // optional: config or trace, for expected loads
  std::int64_t global_batch = 0;
  int vpp = 1;
  std::uint64_t seed = 0;          // workload synthesis seed
  std::string out;                 // empty: stdout
  bool full_candidate_table = true;
};

struct SimulateCmd {
  std::string plan_file;  // plan report or bare plan object
  std::string model_config;
  std::string cluster_config;
  std::string workload;            // config (synthesized) or trace file
  std::string reorder = "none";    // none | intra | inter | both
  std::uint64_t seed = 0;
  std::string out;
  std::string trace_out;  // --emit-trace target, empty: none
};

struct CompareCmd {
  std::string model_config;
  std::string cluster_config;
  std::string workload;
  std::int64_t global_batch = 0;
  int vpp = 1;
  std::uint64_t seed = 0;
  std::string out;
};

struct ReorderCmd {
  std::string plan_file;
  std::string model_config;
  std::string cluster_config;
  std::string workload;
  std::string mode = "both";
  std::uint64_t seed = 0;
  std::string out;             // report
  std::string order_out;       // permutation list, empty: embed only
};

struct GenerateCmd {
  std::string workload_config;
  std::int64_t batch = 0;
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::string out;  // trace file, empty: stdout
};

int cmd_plan(const PlanCmd& cmd);
int cmd_simulate(const SimulateCmd& cmd);
int cmd_compare(const CompareCmd& cmd);
int cmd_reorder(const ReorderCmd& cmd);
int cmd_generate(const GenerateCmd& cmd);

// Log verbosity from the MMPLAN_LOG environment variable (0 = quiet,
// 1 = info, 2 = debug); diagnostics go to stderr, never to the report
// stream.
int log_level();

}  // namespace mmplan
