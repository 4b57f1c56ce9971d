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
#include <string_view>

namespace mmplan {

inline constexpr const char* kPlanReportSchema = "mmplan/plan-report/v1";
inline constexpr const char* kSimReportSchema = "mmplan/sim-report/v1";
inline constexpr const char* kCompareReportSchema = "mmplan/compare-report/v1";
inline constexpr const char* kReorderReportSchema = "mmplan/reorder-report/v1";
inline constexpr const char* kErrorSchema = "mmplan/error/v1";

// FNV-1a, 64-bit, as a hex string; stable across runs and platforms.
std::string content_digest(std::string_view data);

// Digest of a file's raw bytes, for the report inputs block.
std::string file_digest(const std::string& path);

// Reports keep every volatile field (timestamps, wall-clock timings) under
// the top-level "meta" object. This strips it so byte-level comparisons see
// only deterministic content.
std::string strip_report_meta(const std::string& report_json);

}  // namespace mmplan
