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

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

namespace mmplan::test {

// Scratch directory with config fixtures for end-to-end command tests.
class ConfigDir {
 public:
  explicit ConfigDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("mmplan_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  ~ConfigDir() { std::filesystem::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& content) {
    const std::filesystem::path path = dir_ / name;
    std::ofstream out(path);
    out << content;
    return path.string();
  }

  std::string path(const std::string& name) const {
    return (dir_ / name).string();
  }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name);
    return std::string(std::istreambuf_iterator<char>(in), {});
  }

 private:
  std::filesystem::path dir_;
};

inline std::string desk_model_json() {
  return R"({
  "seq_len": 8192,
  "frozen_backward_factor": 0.3333333333333333,
  "dp_sync": "0 ms",
  "cost_profile": "profile.csv",
  "expected_tokens": {"encoder": 2048, "generator": 2048},
  "encoder": {
    "arch": {"layers": 32, "hidden": 1280, "ffn_hidden": 5120, "heads": 16, "groups": 16},
    "memory": {"params_and_grads": "3.4 GiB", "optimizer_states": "10 GiB", "activation_per_microbatch": "0.25 GiB"}
  },
  "backbone": {
    "arch": {"layers": 32, "hidden": 4096, "ffn_hidden": 11008, "heads": 32, "groups": 32},
    "memory": {"params_and_grads": "26 GiB", "optimizer_states": "78 GiB", "activation_per_microbatch": "2 GiB"}
  },
  "generator": {
    "arch": {"layers": 32, "hidden": 1280, "ffn_hidden": 5120, "heads": 16, "groups": 16},
    "memory": {"params_and_grads": "4 GiB", "optimizer_states": "12 GiB", "activation_per_microbatch": "0.25 GiB"}
  }
})";
}

// Whole-module seconds measured at two token loads per TP size; backward
// omitted on some rows to exercise the 2x default.
inline std::string desk_profile_csv() {
  std::string csv = "# module,tp,token_load,fwd_s,bwd_s\n";
  const struct {
    const char* name;
    double base;      // fwd seconds at 8192 tokens, tp=1
    double floor;     // fwd seconds at 0 tokens
  } rows[] = {{"encoder", 0.110, 0.004},
              {"backbone", 0.760, 0.760},
              {"generator", 0.420, 0.008}};
  for (const auto& row : rows) {
    for (int tp : {1, 2, 4, 8}) {
      double speedup = 1.0;
      for (int k = 1; k < tp; k *= 2) speedup *= 1.8;
      for (double load : {0.0, 8192.0}) {
        const double fwd =
            (row.floor + (row.base - row.floor) * load / 8192.0) / speedup;
        csv += std::string(row.name) + "," + std::to_string(tp) + "," +
               std::to_string(load) + "," + std::to_string(fwd) + "," +
               std::to_string(2.0 * fwd) + "\n";
      }
    }
  }
  return csv;
}

inline std::string desk_cluster_json(int gpus) {
  return std::string(R"({
  "total_gpus": )") +
         std::to_string(gpus) + R"(,
  "gpus_per_node": 8,
  "peak_flops": "312 TFLOPS",
  "gpu_memory": "80 GiB",
  "intra_node_bw": "150 GB/s",
  "inter_node_bw": "25 GB/s"
})";
}

inline std::string skewed_workload_json(unsigned seed) {
  return std::string(R"({
  "seq_len": 8192,
  "seed": )") +
         std::to_string(seed) + R"(,
  "text_tokens": {"dist": "lognormal", "median": 600, "sigma": 0.8},
  "image_subseq_tokens": {"dist": "lognormal", "median": 1024, "sigma": 0.47},
  "image_count": {"dist": "geometric", "mean": 2.0}
})";
}

inline std::string uniform_workload_json() {
  return R"({
  "seq_len": 8192,
  "seed": 1,
  "text_tokens": {"dist": "point", "value": 2048},
  "image_subseq_tokens": {"dist": "point", "value": 1024},
  "image_count": {"dist": "point", "value": 2}
})";
}

}  // namespace mmplan::test
