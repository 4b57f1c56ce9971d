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

#include <string>
#include <vector>

#include "mmplan/core.hpp"

namespace mmplan {

enum class PlanViolation {
  ResourceExceeded,
  DivisibilityViolated,
  MemoryExceeded,
  TPNotAllowed,
};

const char* to_string(PlanViolation violation);

struct ValidationResult {
  struct Item {
    PlanViolation kind;
    std::string detail;
  };
  std::vector<Item> violations;

  bool ok() const { return violations.empty(); }
  std::string describe() const;
};

// Checks every plan invariant: allocation within the cluster, TP sizes from
// the allowed set, the DP divisibility couplings, the virtual-stage split,
// and the per-unit memory bound. Returns all violations by name; a valid
// plan validates to itself unchanged.
ValidationResult validate_plan(const Plan& plan, const ClusterSpec& cluster,
                               const ModelSpec& model);

}  // namespace mmplan
