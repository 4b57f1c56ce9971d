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

#include "mmplan/core.hpp"

#include <algorithm>
#include <numeric>

#include "mmplan/errors.hpp"

namespace mmplan {

const char* to_string(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::Encoder:
      return "encoder";
    case ModuleKind::Backbone:
      return "backbone";
    case ModuleKind::Generator:
      return "generator";
  }
  return "?";
}

const char* to_string(Phase phase) {
  return phase == Phase::Forward ? "forward" : "backward";
}

double ArchDesc::param_count() const {
  const double h = static_cast<double>(hidden);
  const double f = static_cast<double>(ffn_hidden);
  const double kv_ratio =
      heads > 0 ? static_cast<double>(groups) / static_cast<double>(heads)
                : 1.0;
  const double attn = h * h * (2.0 + 2.0 * kv_ratio);
  const double ffn = 3.0 * h * f;
  return static_cast<double>(layers) * (attn + ffn);
}

const ModuleSpec& ModelSpec::module(ModuleKind kind) const {
  switch (kind) {
    case ModuleKind::Encoder:
      return encoder;
    case ModuleKind::Backbone:
      return backbone;
    case ModuleKind::Generator:
      return generator;
  }
  throw InternalError("bad ModuleKind");
}

ModuleSpec& ModelSpec::module(ModuleKind kind) {
  return const_cast<ModuleSpec&>(
      static_cast<const ModelSpec*>(this)->module(kind));
}

bool tp_allowed(int tp) {
  return std::find(kAllowedTp.begin(), kAllowedTp.end(), tp) !=
         kAllowedTp.end();
}

const ParallelismChoice& Plan::unit(ModuleKind kind) const {
  switch (kind) {
    case ModuleKind::Encoder:
      return encoder;
    case ModuleKind::Backbone:
      return backbone;
    case ModuleKind::Generator:
      return generator;
  }
  throw InternalError("bad ModuleKind");
}

ParallelismChoice& Plan::unit(ModuleKind kind) {
  return const_cast<ParallelismChoice&>(
      static_cast<const Plan*>(this)->unit(kind));
}

std::int64_t Sample::modality_tokens() const {
  const auto sum = [](const std::vector<std::int64_t>& v) {
    return std::accumulate(v.begin(), v.end(), std::int64_t{0});
  };
  return sum(image_subseqs) + sum(audio_subseqs);
}

bool Sample::valid(std::int64_t seq_len_cap, std::string* why) const {
  const auto fail = [&](const std::string& reason) {
    if (why != nullptr) *why = reason;
    return false;
  };
  if (text_tokens < 0) return fail("negative text token count");
  for (const auto* seqs : {&image_subseqs, &audio_subseqs}) {
    for (std::int64_t n : *seqs) {
      if (n < 0) return fail("negative subsequence token count");
    }
  }
  if (total_tokens() < 1) return fail("sample has no tokens");
  if (total_tokens() > seq_len_cap) {
    return fail("sample exceeds the sequence length cap");
  }
  return true;
}

Microbatch Microbatch::from(std::vector<Sample> samples) {
  Microbatch mb;
  mb.samples = std::move(samples);
  mb.recompute();
  return mb;
}

void Microbatch::recompute() {
  encoder_tokens = 0;
  generator_tokens = 0;
  for (const Sample& s : samples) {
    encoder_tokens += s.encoder_tokens();
    generator_tokens += s.generator_tokens();
  }
}

std::vector<double> Timeline::device_idle() const {
  std::vector<double> idle(device_busy.size(), 0.0);
  for (std::size_t d = 0; d < device_busy.size(); ++d) {
    idle[d] = iteration_time - device_busy[d];
  }
  return idle;
}

}  // namespace mmplan
