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
#include <vector>

#include "mmplan/core.hpp"
#include "mmplan/cost_model.hpp"

namespace mmplan::test {

// A small ViT-ish encoder, LLM backbone, and diffusion-ish generator with
// harmless memory footprints; tests override fields as needed.
inline ModelSpec toy_model() {
  ModelSpec model;
  model.encoder.arch = {8, 512, 2048, 8, 8};
  model.encoder.mem = {1e9, 2e9, 1e8};
  model.backbone.arch = {16, 1024, 4096, 16, 16};
  model.backbone.mem = {8e9, 16e9, 2e8};
  model.generator.arch = {8, 640, 2560, 10, 10};
  model.generator.mem = {2e9, 4e9, 1e8};
  model.seq_len = 8192;
  return model;
}

inline ClusterSpec toy_cluster(int gpus) {
  ClusterSpec cluster;
  cluster.total_gpus = gpus;
  cluster.gpus_per_node = 8;
  cluster.peak_flops = 312e12;
  cluster.gpu_mem_bytes = 80e9;
  cluster.intra_node_bw = 300e9;
  cluster.inter_node_bw = 100e9;
  return cluster;
}

inline Sample sample_with(std::int64_t text,
                          std::vector<std::int64_t> images) {
  Sample s;
  s.text_tokens = text;
  s.image_subseqs = std::move(images);
  return s;
}

// Single-row profiles: module times depend on TP only, the simplest cost
// behavior.
inline CostBook flat_book(double enc_fwd, double lm_fwd, double gen_fwd) {
  CostBook book;
  for (int tp : kAllowedTp) {
    book.profile(ModuleKind::Encoder).add_row(tp, 0, enc_fwd, 2 * enc_fwd);
    book.profile(ModuleKind::Backbone).add_row(tp, 0, lm_fwd, 2 * lm_fwd);
    book.profile(ModuleKind::Generator).add_row(tp, 0, gen_fwd, 2 * gen_fwd);
  }
  return book;
}

// TP-scaled profiles: time shrinks with the TP size at the given parallel
// efficiency (1.0 = perfect scaling).
inline CostBook tp_scaled_book(double enc_fwd, double lm_fwd, double gen_fwd,
                               double tp_efficiency = 0.85) {
  CostBook book;
  for (int tp : kAllowedTp) {
    double speedup = 1.0;
    for (int k = 1; k < tp; k *= 2) speedup *= 2.0 * tp_efficiency;
    const auto add = [&](ModuleKind kind, double fwd) {
      book.profile(kind).add_row(tp, 0, fwd / speedup, 2 * fwd / speedup);
    };
    add(ModuleKind::Encoder, enc_fwd);
    add(ModuleKind::Backbone, lm_fwd);
    add(ModuleKind::Generator, gen_fwd);
  }
  return book;
}

}  // namespace mmplan::test
