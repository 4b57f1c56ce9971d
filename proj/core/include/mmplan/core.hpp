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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mmplan {

// The three chained parallelism units of a multimodal transformer:
// modality encoder, LLM backbone, modality generator. Projector layers are
// folded into the encoder/generator cost and memory profiles.
enum class ModuleKind { Encoder = 0, Backbone = 1, Generator = 2 };

inline constexpr std::array<ModuleKind, 3> kModuleKinds = {
    ModuleKind::Encoder, ModuleKind::Backbone, ModuleKind::Generator};

const char* to_string(ModuleKind kind);

// Transformer architecture description, used for analytic FLOP counts.
struct ArchDesc {
  int layers = 0;
  std::int64_t hidden = 0;
  std::int64_t ffn_hidden = 0;
  int heads = 0;
  int groups = 0;  // KV groups (GQA); groups == heads means vanilla MHA

  bool valid() const {
    return layers > 0 && hidden > 0 && ffn_hidden > 0 && heads > 0 &&
           groups > 0 && groups <= heads;
  }

  // Parameter count of the transformer stack (embeddings excluded):
  // per layer, grouped-query attention (Q, KV, O projections) plus a gated
  // three-matrix FFN.
  double param_count() const;
};

// Memory footprint handles for one module, all in bytes.
//   param_grad_bytes          parameters + gradients for the whole module
//   optimizer_bytes           optimizer states for the whole module
//   activation_bytes_per_mb   activations of one microbatch (one sequence)
//                             across the whole module
struct ModuleMemory {
  double param_grad_bytes = 0;
  double optimizer_bytes = 0;
  double activation_bytes_per_mb = 0;
};

struct ModuleSpec {
  ArchDesc arch;
  ModuleMemory mem;
  bool frozen = false;  // frozen: no weight gradients, no optimizer update
};

struct ModelSpec {
  ModuleSpec encoder;
  ModuleSpec backbone;
  ModuleSpec generator;
  std::int64_t seq_len = 8192;  // fixed training sequence length
  // Backward-cost multiplier for frozen modules. Frozen modules still
  // backpropagate activation gradients, so the cost does not drop to zero.
  double frozen_backward_factor = 1.0 / 3.0;
  // Constant per-iteration gradient-synchronization time. Identical for all
  // plans that share DP sizes, so it is reported but cannot flip a
  // within-class comparison.
  double dp_sync_seconds = 0.0;

  const ModuleSpec& module(ModuleKind kind) const;
  ModuleSpec& module(ModuleKind kind);
  double backward_factor(ModuleKind kind) const {
    return module(kind).frozen ? frozen_backward_factor : 1.0;
  }
};

struct ClusterSpec {
  int total_gpus = 0;
  int gpus_per_node = 8;
  double peak_flops = 0.0;      // per GPU, FLOP/s
  double gpu_mem_bytes = 0.0;   // per GPU
  double intra_node_bw = 0.0;   // bytes/s
  double inter_node_bw = 0.0;   // bytes/s
};

inline constexpr std::array<int, 4> kAllowedTp = {1, 2, 4, 8};

bool tp_allowed(int tp);

// TP/DP/PP sizes of one parallelism unit. The unit's GPU count is always
// tp * dp * pp.
struct ParallelismChoice {
  int tp = 1;
  int dp = 1;
  int pp = 1;

  int gpus() const { return tp * dp * pp; }
  friend bool operator==(const ParallelismChoice&,
                         const ParallelismChoice&) = default;
};

// A full orchestration decision: per-unit parallelism (GPU allocation is
// implied by it), global batch size, and the virtual-pipeline factor
// (vpp == 1 is plain one-forward-one-backward scheduling).
struct Plan {
  ParallelismChoice encoder;
  ParallelismChoice backbone;
  ParallelismChoice generator;
  std::int64_t global_batch = 1;
  int vpp = 1;

  const ParallelismChoice& unit(ModuleKind kind) const;
  ParallelismChoice& unit(ModuleKind kind);

  int encoder_gpus() const { return encoder.gpus(); }
  int backbone_gpus() const { return backbone.gpus(); }
  int generator_gpus() const { return generator.gpus(); }
  int total_gpus() const {
    return encoder_gpus() + backbone_gpus() + generator_gpus();
  }

  // Microbatches injected into one pipeline per iteration: BS / DP_lm.
  std::int64_t microbatch_count() const { return global_batch / backbone.dp; }
  // Backbone DP groups served by one encoder replica set.
  int samples_per_microbatch() const { return backbone.dp / encoder.dp; }
  // Independent pipelines to simulate (one per encoder DP group).
  int coupled_group_count() const { return encoder.dp; }
  // Physical pipeline depth: encoder, backbone, and generator stages
  // chained; one device per stage.
  int pipeline_devices() const {
    return encoder.pp + backbone.pp + generator.pp;
  }
  // Interleaving splits every physical stage into vpp virtual stages.
  int virtual_stages() const { return pipeline_devices() * vpp; }

  friend bool operator==(const Plan&, const Plan&) = default;
};

// One training sample: a fixed-length sequence interleaving text tokens with
// modality subsequences. Modality subsequences drive encoder and generator
// compute; text and padding only pass through the backbone.
struct Sample {
  std::int64_t text_tokens = 0;
  std::vector<std::int64_t> image_subseqs;
  std::vector<std::int64_t> audio_subseqs;

  std::int64_t modality_tokens() const;
  std::int64_t encoder_tokens() const { return modality_tokens(); }
  std::int64_t generator_tokens() const { return modality_tokens(); }
  std::int64_t total_tokens() const { return text_tokens + modality_tokens(); }
  // Scalar size used by the balancing reorder.
  std::int64_t cost_size() const {
    return encoder_tokens() + generator_tokens();
  }

  bool valid(std::int64_t seq_len_cap, std::string* why = nullptr) const;
};

// The unit of pipeline injection. Holds the DP_lm/DP_me samples that one
// encoder replica set co-processes in one step; per-unit token loads are
// cached cost keys and must be recomputed whenever samples change.
struct Microbatch {
  std::vector<Sample> samples;
  std::int64_t encoder_tokens = 0;
  std::int64_t generator_tokens = 0;

  static Microbatch from(std::vector<Sample> samples);
  void recompute();

  double mean_encoder_tokens() const {
    return samples.empty() ? 0.0
                           : static_cast<double>(encoder_tokens) /
                                 static_cast<double>(samples.size());
  }
  double mean_generator_tokens() const {
    return samples.empty() ? 0.0
                           : static_cast<double>(generator_tokens) /
                                 static_cast<double>(samples.size());
  }
};

enum class Phase { Forward = 0, Backward = 1 };

const char* to_string(Phase phase);

struct TimelineEvent {
  int device = 0;
  int microbatch = 0;  // zero-based position in the injected order
  int stage = 0;       // global stage index
  Phase phase = Phase::Forward;
  double start = 0.0;
  double end = 0.0;
};

// A simulated iteration: per-device, per-microbatch forward/backward events.
// Events on one device never overlap; iteration_time is the latest end.
struct Timeline {
  std::vector<TimelineEvent> events;  // sorted by (start, device, microbatch)
  int device_count = 0;
  int microbatch_count = 0;
  int stage_count = 0;
  double iteration_time = 0.0;
  std::vector<double> device_busy;  // summed event durations per device

  std::vector<double> device_idle() const;
};

}  // namespace mmplan
