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
#include <iosfwd>
#include <string>
#include <vector>

#include "mmplan/core.hpp"
#include "mmplan/cost_model.hpp"

namespace mmplan {

// Token-count distribution. Lognormal matches the heavy right tails of
// modality subsequence sizes; geometric covers per-sample subsequence
// counts; point masses give degenerate (homogeneous) workloads.
struct DistSpec {
  enum class Family { Point, LogNormal, Geometric };
  Family family = Family::Point;
  double value = 0.0;   // Point: the constant; Geometric: the mean
  double median = 0.0;  // LogNormal scale
  double sigma = 0.0;   // LogNormal shape
};

struct WorkloadSpec {
  std::int64_t seq_len = 8192;
  DistSpec text_tokens;
  DistSpec image_subseq_tokens;
  DistSpec image_count;
  std::uint64_t seed = 0;
};

// Draws `batch` samples, each packed to exactly seq_len tokens: modality
// subsequences and text are laid out until the boundary, the crossing
// subsequence is truncated, and any shortfall is zero-padding (which costs
// backbone time only). Deterministic for a given seed.
std::vector<Sample> synth_batch(const WorkloadSpec& spec, std::int64_t batch);

// Line-delimited JSON, one record per sample:
//   {"text_tokens": int, "image_subseqs": [int, ...],
//    "audio_subseqs": [int, ...]?}
// Malformed lines raise TraceError with the line number.
std::vector<Sample> ingest_trace(std::istream& in, std::int64_t seq_len_cap);
std::vector<Sample> ingest_trace_file(const std::string& path,
                                      std::int64_t seq_len_cap);

void write_trace(std::ostream& out, std::span<const Sample> samples);
void write_trace_file(const std::string& path, std::span<const Sample> samples);

// Splits a global batch into per-coupled-group microbatch sequences.
// Backbone DP group g takes the g-th contiguous block of BS/DP_lm samples;
// the coupled group serving backbone groups [e*k, (e+1)*k) forms its i-th
// microbatch from those groups' i-th samples (k = DP_lm/DP_me).
std::vector<std::vector<Microbatch>> assemble_microbatches(
    std::span<const Sample> samples, const Plan& plan);

WorkloadStats compute_stats(std::span<const Sample> samples,
                            std::int64_t seq_len);

// Total tokens across samples, with the implied padding up to seq_len.
struct TokenTotals {
  std::int64_t text = 0;
  std::int64_t modality = 0;
  std::int64_t padding = 0;
};
TokenTotals token_totals(std::span<const Sample> samples, std::int64_t seq_len);

}  // namespace mmplan
