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

#include "mmplan/validate.hpp"

#include <sstream>

#include "mmplan/cost_model.hpp"

namespace mmplan {

const char* to_string(PlanViolation violation) {
  switch (violation) {
    case PlanViolation::ResourceExceeded:
      return "ResourceExceeded";
    case PlanViolation::DivisibilityViolated:
      return "DivisibilityViolated";
    case PlanViolation::MemoryExceeded:
      return "MemoryExceeded";
    case PlanViolation::TPNotAllowed:
      return "TPNotAllowed";
  }
  return "?";
}

std::string ValidationResult::describe() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i > 0) out << "; ";
    out << to_string(violations[i].kind) << ": " << violations[i].detail;
  }
  return out.str();
}

ValidationResult validate_plan(const Plan& plan, const ClusterSpec& cluster,
                               const ModelSpec& model) {
  ValidationResult result;
  const auto add = [&](PlanViolation kind, const std::string& detail) {
    result.violations.push_back({kind, detail});
  };

  for (ModuleKind kind : kModuleKinds) {
    const ParallelismChoice& pc = plan.unit(kind);
    if (!tp_allowed(pc.tp)) {
      add(PlanViolation::TPNotAllowed,
          std::string(to_string(kind)) + " tp=" + std::to_string(pc.tp));
    }
    if (pc.dp < 1 || pc.pp < 1 || pc.tp < 1) {
      add(PlanViolation::DivisibilityViolated,
          std::string(to_string(kind)) + " parallel sizes must be >= 1");
    }
  }

  if (plan.total_gpus() > cluster.total_gpus) {
    add(PlanViolation::ResourceExceeded,
        std::to_string(plan.total_gpus()) + " GPUs allocated, " +
            std::to_string(cluster.total_gpus) + " available");
  }

  if (plan.global_batch < 1 || plan.backbone.dp < 1 ||
      plan.global_batch % plan.backbone.dp != 0) {
    add(PlanViolation::DivisibilityViolated,
        "backbone dp=" + std::to_string(plan.backbone.dp) +
            " does not divide the global batch " +
            std::to_string(plan.global_batch));
  }
  for (ModuleKind kind : {ModuleKind::Encoder, ModuleKind::Generator}) {
    const int dp = plan.unit(kind).dp;
    if (dp < 1 || plan.backbone.dp % dp != 0) {
      add(PlanViolation::DivisibilityViolated,
          std::string(to_string(kind)) + " dp=" + std::to_string(dp) +
              " does not divide backbone dp=" +
              std::to_string(plan.backbone.dp));
    }
  }
  if (plan.vpp < 1) {
    add(PlanViolation::DivisibilityViolated, "vpp must be >= 1");
  } else if (plan.vpp > 1 && plan.backbone.dp >= 1 &&
             plan.global_batch % plan.backbone.dp == 0 &&
             plan.microbatch_count() % plan.pipeline_devices() != 0) {
    add(PlanViolation::DivisibilityViolated,
        "interleaved schedule needs the device count " +
            std::to_string(plan.pipeline_devices()) +
            " to divide the microbatch count " +
            std::to_string(plan.microbatch_count()));
  }

  const MemoryReport mem = memory_check(plan, model, cluster);
  for (const UnitMemoryUse& use : mem.units) {
    if (!use.fits) {
      std::ostringstream detail;
      detail << to_string(use.unit) << " needs " << use.bytes_per_gpu
             << " bytes/GPU, capacity " << mem.capacity_bytes;
      add(PlanViolation::MemoryExceeded, detail.str());
    }
  }

  return result;
}

}  // namespace mmplan
