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

#include <optional>
#include <string>

#include "mmplan/core.hpp"
#include "mmplan/cost_model.hpp"
#include "mmplan/workload.hpp"

namespace mmplan {

// Every physical quantity in a config carries an explicit unit string:
// "80 GiB", "300 GB/s", "312 TFLOPS", "1.5 ms". Bare numbers are rejected.
double parse_bytes(const std::string& text);
double parse_bytes_per_second(const std::string& text);
double parse_flops_per_second(const std::string& text);
double parse_seconds(const std::string& text);

struct ModelConfig {
  ModelSpec model;
  std::optional<std::string> profile_path;  // resolved against the config dir
  AnalyticCoeffs analytic;
  // Expected per-sample token loads, used when no workload is supplied.
  double expected_encoder_tokens = 0.0;
  double expected_generator_tokens = 0.0;
};

ModelConfig load_model_config(const std::string& path);
ClusterSpec load_cluster_config(const std::string& path);
WorkloadSpec load_workload_config(const std::string& path);

// Assembles the cost model for a model/cluster pair, loading the referenced
// profile table when the config names one.
CostModel load_cost_model(const ModelConfig& config,
                          const ClusterSpec& cluster);

}  // namespace mmplan
