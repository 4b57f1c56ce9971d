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

#include "mmplan/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mmplan/errors.hpp"

namespace mmplan {

namespace {

using nlohmann::json;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  try {
    return json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

struct Quantity {
  double value = 0.0;
  std::string unit;
};

Quantity split_quantity(const std::string& text) {
  std::istringstream in(text);
  Quantity q;
  if (!(in >> q.value)) {
    throw ConfigError("expected '<number> <unit>', got '" + text + "'");
  }
  in >> q.unit;
  if (q.unit.empty()) {
    throw ConfigError("quantity '" + text + "' is missing its unit");
  }
  std::string extra;
  if (in >> extra) {
    throw ConfigError("trailing text in quantity '" + text + "'");
  }
  return q;
}

double scaled(const std::string& text,
              const std::map<std::string, double>& units,
              const char* what) {
  const Quantity q = split_quantity(text);
  const auto it = units.find(q.unit);
  if (it == units.end()) {
    throw ConfigError(std::string("unknown ") + what + " unit '" + q.unit +
                      "' in '" + text + "'");
  }
  return q.value * it->second;
}

const std::map<std::string, double>& byte_units() {
  static const std::map<std::string, double> units = {
      {"B", 1.0},
      {"kB", 1e3},    {"KB", 1e3},    {"KiB", 1024.0},
      {"MB", 1e6},    {"MiB", 1024.0 * 1024},
      {"GB", 1e9},    {"GiB", 1024.0 * 1024 * 1024},
      {"TB", 1e12},   {"TiB", 1024.0 * 1024 * 1024 * 1024},
  };
  return units;
}

}  // namespace

double parse_bytes(const std::string& text) {
  return scaled(text, byte_units(), "byte");
}

double parse_bytes_per_second(const std::string& text) {
  static const std::map<std::string, double> units = [] {
    std::map<std::string, double> u;
    for (const auto& [name, scale] : byte_units()) u[name + "/s"] = scale;
    return u;
  }();
  return scaled(text, units, "bandwidth");
}

double parse_flops_per_second(const std::string& text) {
  static const std::map<std::string, double> units = {
      {"FLOPS", 1.0},   {"FLOP/s", 1.0},
      {"kFLOPS", 1e3},  {"kFLOP/s", 1e3},
      {"MFLOPS", 1e6},  {"MFLOP/s", 1e6},
      {"GFLOPS", 1e9},  {"GFLOP/s", 1e9},
      {"TFLOPS", 1e12}, {"TFLOP/s", 1e12},
      {"PFLOPS", 1e15}, {"PFLOP/s", 1e15},
  };
  return scaled(text, units, "compute-rate");
}

double parse_seconds(const std::string& text) {
  static const std::map<std::string, double> units = {
      {"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}, {"min", 60.0},
  };
  return scaled(text, units, "time");
}

namespace {

ArchDesc parse_arch(const json& j, const std::string& where) {
  ArchDesc arch;
  try {
    arch.layers = j.at("layers").get<int>();
    arch.hidden = j.at("hidden").get<std::int64_t>();
    arch.ffn_hidden = j.at("ffn_hidden").get<std::int64_t>();
    arch.heads = j.at("heads").get<int>();
    arch.groups = j.value("groups", arch.heads);
  } catch (const std::exception& e) {
    throw ConfigError(where + ".arch: " + e.what());
  }
  if (!arch.valid()) {
    throw ConfigError(where + ".arch: fields must be positive integers with "
                              "groups <= heads");
  }
  return arch;
}

ModuleSpec parse_module(const json& j, const std::string& where) {
  ModuleSpec mod;
  mod.arch = parse_arch(j.at("arch"), where);
  const json& mem = j.at("memory");
  try {
    mod.mem.param_grad_bytes =
        parse_bytes(mem.at("params_and_grads").get<std::string>());
    mod.mem.optimizer_bytes =
        parse_bytes(mem.at("optimizer_states").get<std::string>());
    mod.mem.activation_bytes_per_mb =
        parse_bytes(mem.at("activation_per_microbatch").get<std::string>());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(where + ".memory: " + e.what());
  }
  if (mod.mem.param_grad_bytes <= 0.0 || mod.mem.optimizer_bytes <= 0.0 ||
      mod.mem.activation_bytes_per_mb < 0.0) {
    throw ConfigError(where + ".memory: sizes must be positive");
  }
  mod.frozen = j.value("frozen", false);
  return mod;
}

}  // namespace

ModelConfig load_model_config(const std::string& path) {
  const json j = load_json_file(path);
  ModelConfig config;
  try {
    config.model.seq_len = j.at("seq_len").get<std::int64_t>();
    config.model.encoder = parse_module(j.at("encoder"), "encoder");
    config.model.backbone = parse_module(j.at("backbone"), "backbone");
    config.model.generator = parse_module(j.at("generator"), "generator");
    if (j.contains("frozen_backward_factor")) {
      config.model.frozen_backward_factor =
          j.at("frozen_backward_factor").get<double>();
    }
    if (j.contains("dp_sync")) {
      config.model.dp_sync_seconds =
          parse_seconds(j.at("dp_sync").get<std::string>());
    }
    if (j.contains("analytic")) {
      const json& a = j.at("analytic");
      config.analytic.efficiency =
          a.value("efficiency", config.analytic.efficiency);
      config.analytic.bwd_fwd_ratio =
          a.value("bwd_fwd_ratio", config.analytic.bwd_fwd_ratio);
    }
    if (j.contains("expected_tokens")) {
      const json& t = j.at("expected_tokens");
      config.expected_encoder_tokens = t.value("encoder", 0.0);
      config.expected_generator_tokens = t.value("generator", 0.0);
    }
    if (j.contains("cost_profile")) {
      const std::filesystem::path base =
          std::filesystem::path(path).parent_path();
      config.profile_path =
          (base / j.at("cost_profile").get<std::string>()).string();
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (config.model.seq_len < 1) {
    throw ConfigError(path + ": seq_len must be >= 1");
  }
  return config;
}

ClusterSpec load_cluster_config(const std::string& path) {
  const json j = load_json_file(path);
  ClusterSpec cluster;
  try {
    cluster.total_gpus = j.at("total_gpus").get<int>();
    cluster.gpus_per_node = j.value("gpus_per_node", 8);
    cluster.peak_flops =
        parse_flops_per_second(j.at("peak_flops").get<std::string>());
    cluster.gpu_mem_bytes = parse_bytes(j.at("gpu_memory").get<std::string>());
    cluster.intra_node_bw =
        parse_bytes_per_second(j.at("intra_node_bw").get<std::string>());
    cluster.inter_node_bw =
        parse_bytes_per_second(j.at("inter_node_bw").get<std::string>());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (cluster.total_gpus < 3) {
    throw ConfigError(path + ": total_gpus must be >= 3 (one per module)");
  }
  if (cluster.gpus_per_node < 1 || cluster.peak_flops <= 0.0 ||
      cluster.gpu_mem_bytes <= 0.0 || cluster.intra_node_bw <= 0.0 ||
      cluster.inter_node_bw <= 0.0) {
    throw ConfigError(path + ": cluster quantities must be positive");
  }
  return cluster;
}

namespace {

DistSpec parse_dist(const json& j, const std::string& where) {
  DistSpec d;
  try {
    const std::string family = j.at("dist").get<std::string>();
    if (family == "point") {
      d.family = DistSpec::Family::Point;
      d.value = j.at("value").get<double>();
    } else if (family == "lognormal") {
      d.family = DistSpec::Family::LogNormal;
      d.median = j.at("median").get<double>();
      d.sigma = j.at("sigma").get<double>();
      if (d.median <= 0.0 || d.sigma < 0.0) {
        throw ConfigError(where + ": lognormal needs median > 0, sigma >= 0");
      }
    } else if (family == "geometric") {
      d.family = DistSpec::Family::Geometric;
      d.value = j.at("mean").get<double>();
      if (d.value < 0.0) {
        throw ConfigError(where + ": geometric mean must be >= 0");
      }
    } else {
      throw ConfigError(where + ": unknown distribution '" + family + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return d;
}

}  // namespace

WorkloadSpec load_workload_config(const std::string& path) {
  const json j = load_json_file(path);
  WorkloadSpec spec;
  try {
    spec.seq_len = j.at("seq_len").get<std::int64_t>();
    spec.text_tokens = parse_dist(j.at("text_tokens"), "text_tokens");
    spec.image_subseq_tokens =
        parse_dist(j.at("image_subseq_tokens"), "image_subseq_tokens");
    spec.image_count = parse_dist(j.at("image_count"), "image_count");
    spec.seed = j.value("seed", 0);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (spec.seq_len < 1) throw ConfigError(path + ": seq_len must be >= 1");
  return spec;
}

CostModel load_cost_model(const ModelConfig& config,
                          const ClusterSpec& cluster) {
  CostBook book;
  if (config.profile_path) {
    book = load_profile_csv(*config.profile_path);
  }
  book.analytic = config.analytic;
  return CostModel(config.model, cluster, std::move(book));
}

}  // namespace mmplan
