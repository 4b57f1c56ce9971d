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

#include "mmplan/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mmplan/errors.hpp"

namespace mmplan {

namespace {

ModuleKind parse_module_name(const std::string& name, int line) {
  if (name == "encoder") return ModuleKind::Encoder;
  if (name == "backbone") return ModuleKind::Backbone;
  if (name == "generator") return ModuleKind::Generator;
  throw TraceError("ParseError", line, "unknown module '" + name + "'");
}

}  // namespace

void CostProfile::add_row(int tp, double token_load, double fwd_s,
                          std::optional<double> bwd_s) {
  if (!tp_allowed(tp)) {
    throw ConfigError("profile TP size " + std::to_string(tp) +
                      " is not one of {1,2,4,8}");
  }
  if (!(fwd_s > 0.0) || (bwd_s && !(*bwd_s > 0.0))) {
    throw ConfigError("profile times must be strictly positive");
  }
  if (token_load < 0.0) {
    throw ConfigError("profile token load must be non-negative");
  }
  auto& rows = rows_[tp];
  Point pt{token_load, fwd_s, bwd_s};
  auto it = std::lower_bound(rows.begin(), rows.end(), token_load,
                             [](const Point& p, double v) {
                               return p.token_load < v;
                             });
  if (it != rows.end() && it->token_load == token_load) {
    *it = pt;  // last row wins for duplicate keys
  } else {
    rows.insert(it, pt);
  }
}

std::vector<int> CostProfile::tp_sizes() const {
  std::vector<int> out;
  out.reserve(rows_.size());
  for (const auto& [tp, _] : rows_) out.push_back(tp);
  return out;
}

const std::vector<CostProfile::Point>& CostProfile::rows_for(int tp) const {
  auto it = rows_.find(tp);
  if (it == rows_.end() || it->second.empty()) {
    throw EmptyProfileError("no profile rows for tp=" + std::to_string(tp));
  }
  return it->second;
}

namespace {

template <typename ValueFn>
double interpolate(const std::vector<CostProfile::Point>& rows,
                   double token_load, ValueFn value,
                   std::vector<std::string>* warnings) {
  if (token_load <= rows.front().token_load) {
    if (token_load < rows.front().token_load && warnings != nullptr) {
      warnings->push_back("token load " + std::to_string(token_load) +
                          " below profile range; clamped");
    }
    return value(rows.front());
  }
  if (token_load >= rows.back().token_load) {
    if (token_load > rows.back().token_load && warnings != nullptr) {
      warnings->push_back("token load " + std::to_string(token_load) +
                          " above profile range; clamped");
    }
    return value(rows.back());
  }
  auto hi = std::lower_bound(
      rows.begin(), rows.end(), token_load,
      [](const CostProfile::Point& p, double v) { return p.token_load < v; });
  if (hi->token_load == token_load) return value(*hi);
  auto lo = hi - 1;
  const double t =
      (token_load - lo->token_load) / (hi->token_load - lo->token_load);
  return value(*lo) + t * (value(*hi) - value(*lo));
}

}  // namespace

double CostProfile::forward_seconds(int tp, double token_load,
                                    std::vector<std::string>* warnings) const {
  return interpolate(
      rows_for(tp), token_load, [](const Point& p) { return p.fwd_s; },
      warnings);
}

double CostProfile::backward_seconds(int tp, double token_load,
                                     std::vector<std::string>* warnings) const {
  // Rows with no measured backward fall back to twice their forward.
  return interpolate(
      rows_for(tp), token_load,
      [](const Point& p) { return p.bwd_s ? *p.bwd_s : 2.0 * p.fwd_s; },
      warnings);
}

CostBook parse_profile_csv(std::istream& in) {
  CostBook book;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() < 4 || fields.size() > 5) {
      throw TraceError("ParseError", lineno,
                       "expected module,tp,token_load,fwd_s[,bwd_s]");
    }
    try {
      const ModuleKind kind = parse_module_name(fields[0], lineno);
      const int tp = std::stoi(fields[1]);
      const double load = std::stod(fields[2]);
      const double fwd = std::stod(fields[3]);
      std::optional<double> bwd;
      if (fields.size() == 5) {
        const auto pos = fields[4].find_first_not_of(" \t\r");
        if (pos != std::string::npos) bwd = std::stod(fields[4]);
      }
      book.profile(kind).add_row(tp, load, fwd, bwd);
    } catch (const TraceError&) {
      throw;
    } catch (const std::exception& e) {
      throw TraceError("ParseError", lineno, e.what());
    }
  }
  return book;
}

CostBook load_profile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile table: " + path);
  return parse_profile_csv(in);
}

MemoryReport memory_check(const Plan& plan, const ModelSpec& model,
                          const ClusterSpec& cluster) {
  MemoryReport report;
  report.capacity_bytes = cluster.gpu_mem_bytes;
  report.pass = true;
  const double dp_lm = static_cast<double>(plan.backbone.dp);
  for (ModuleKind kind : kModuleKinds) {
    const ParallelismChoice& pc = plan.unit(kind);
    const ModuleMemory& mem = model.module(kind).mem;
    const double gpus = static_cast<double>(pc.gpus());
    const double bytes = (static_cast<double>(pc.dp) * mem.param_grad_bytes +
                          mem.optimizer_bytes +
                          dp_lm * mem.activation_bytes_per_mb * pc.pp) /
                         gpus;
    UnitMemoryUse use;
    use.unit = kind;
    use.bytes_per_gpu = bytes;
    use.fits = bytes <= cluster.gpu_mem_bytes;
    report.units[static_cast<int>(kind)] = use;
    report.pass = report.pass && use.fits;
  }
  return report;
}

double pp_boundary_seconds(const Plan& plan, ModuleKind unit,
                           const ClusterSpec& cluster,
                           double layer_output_bytes) {
  const ParallelismChoice& pc = plan.unit(unit);
  // Two adjacent stage replica groups on one node keep the hop on NVLink.
  const bool intra = 2 * pc.tp * pc.dp <= cluster.gpus_per_node;
  const double bw = intra ? cluster.intra_node_bw : cluster.inter_node_bw;
  return layer_output_bytes / bw;
}

double pp_comm_time(const Plan& plan, ModuleKind unit,
                    const ClusterSpec& cluster, double layer_output_bytes) {
  return plan.unit(unit).pp *
         pp_boundary_seconds(plan, unit, cluster, layer_output_bytes);
}

double model_flops_per_batch(const ModelSpec& model, const WorkloadStats& stats,
                             std::int64_t global_batch) {
  double total = 0.0;
  for (ModuleKind kind : kModuleKinds) {
    const ModuleSpec& mod = model.module(kind);
    const double tokens_per_sample =
        kind == ModuleKind::Backbone
            ? static_cast<double>(stats.seq_len)
            : (kind == ModuleKind::Encoder ? stats.mean_encoder_tokens
                                           : stats.mean_generator_tokens);
    const double tokens = tokens_per_sample * static_cast<double>(global_batch);
    const double fwd = 2.0 * mod.arch.param_count() * tokens;
    const double bwd = 2.0 * fwd * model.backward_factor(kind);
    total += fwd + bwd;
  }
  return total;
}

double mfu(const Plan& plan, const ModelSpec& model, const ClusterSpec& cluster,
           const WorkloadStats& stats, double iteration_time) {
  if (!(iteration_time > 0.0)) {
    throw InternalError("mfu requires a positive iteration time");
  }
  const double achieved = model_flops_per_batch(model, stats, plan.global_batch);
  const double peak =
      iteration_time * cluster.peak_flops * plan.total_gpus();
  return achieved / peak;
}

CostModel::CostModel(const ModelSpec& model, const ClusterSpec& cluster,
                     CostBook book)
    : model_(model), cluster_(cluster), book_(std::move(book)) {}

double CostModel::analytic_forward(ModuleKind kind, double token_load) const {
  const AnalyticCoeffs& c = book_.analytic;
  if (!(c.efficiency > 0.0) || !(cluster_.peak_flops > 0.0)) {
    throw EmptyProfileError(
        std::string("no profile rows for module '") + to_string(kind) +
        "' and no usable analytic fallback");
  }
  const double flops = 2.0 * model_.module(kind).arch.param_count() * token_load;
  if (warnings_ != nullptr) {
    warnings_->push_back(std::string("module '") + to_string(kind) +
                         "' has no profile; using analytic estimate");
  }
  return flops / (cluster_.peak_flops * c.efficiency);
}

double CostModel::unit_forward_time(ModuleKind kind, int tp,
                                    double token_load) const {
  if (!tp_allowed(tp)) {
    throw InternalError("tp size " + std::to_string(tp) + " not allowed");
  }
  if (token_load < 0.0) throw InternalError("negative token load");
  const CostProfile& profile = book_.profile(kind);
  if (profile.empty()) return analytic_forward(kind, token_load);
  return profile.forward_seconds(tp, token_load, warnings_);
}

double CostModel::unit_backward_time(ModuleKind kind, int tp,
                                     double token_load) const {
  const CostProfile& profile = book_.profile(kind);
  double bwd;
  if (profile.empty()) {
    bwd = book_.analytic.bwd_fwd_ratio * analytic_forward(kind, token_load);
  } else {
    bwd = profile.backward_seconds(tp, token_load, warnings_);
  }
  return bwd * model_.backward_factor(kind);
}

double CostModel::unit_fwdbwd_time(ModuleKind kind, int tp,
                                   double token_load) const {
  return unit_forward_time(kind, tp, token_load) +
         unit_backward_time(kind, tp, token_load);
}

double CostModel::token_load(ModuleKind kind, const Microbatch& mb) const {
  switch (kind) {
    case ModuleKind::Encoder:
      return mb.mean_encoder_tokens();
    case ModuleKind::Generator:
      return mb.mean_generator_tokens();
    case ModuleKind::Backbone:
      return static_cast<double>(model_.seq_len);
  }
  throw InternalError("bad ModuleKind");
}

double CostModel::token_load(ModuleKind kind, const WorkloadStats& stats) const {
  switch (kind) {
    case ModuleKind::Encoder:
      return stats.mean_encoder_tokens;
    case ModuleKind::Generator:
      return stats.mean_generator_tokens;
    case ModuleKind::Backbone:
      return static_cast<double>(model_.seq_len);
  }
  throw InternalError("bad ModuleKind");
}

double CostModel::stage_time(ModuleKind kind, const Plan& plan,
                             const Microbatch& mb, Phase phase) const {
  const ParallelismChoice& pc = plan.unit(kind);
  const double coupling =
      kind == ModuleKind::Backbone
          ? 1.0
          : static_cast<double>(plan.backbone.dp) / static_cast<double>(pc.dp);
  const double load = token_load(kind, mb);
  const double whole = phase == Phase::Forward
                           ? unit_forward_time(kind, pc.tp, load)
                           : unit_backward_time(kind, pc.tp, load);
  return coupling * whole / static_cast<double>(pc.pp);
}

double CostModel::boundary_bytes(ModuleKind unit, const Plan& plan,
                                 double tokens_per_sample) const {
  const ParallelismChoice& pc = plan.unit(unit);
  const double coupling =
      unit == ModuleKind::Backbone
          ? 1.0
          : static_cast<double>(plan.backbone.dp) / static_cast<double>(pc.dp);
  const double hidden =
      static_cast<double>(model_.module(unit).arch.hidden);
  return 2.0 * hidden * tokens_per_sample * coupling;
}

StageTimes CostModel::build_stage_times(
    const Plan& plan, std::span<const Microbatch> microbatches) const {
  // Virtual-stage granularity: interleaving splits each physical stage into
  // vpp chunks, each sending its own boundary tensor.
  const int l = static_cast<int>(microbatches.size());
  StageTimes times = StageTimes::zeros(l, plan.virtual_stages());
  times.unit_stages = {plan.encoder.pp * plan.vpp, plan.backbone.pp * plan.vpp,
                       plan.generator.pp * plan.vpp};

  for (int i = 0; i < l; ++i) {
    const Microbatch& mb = microbatches[i];
    int stage = 0;
    for (ModuleKind kind : kModuleKinds) {
      const ParallelismChoice& pc = plan.unit(kind);
      const double comm = pp_boundary_seconds(
          plan, kind, cluster_,
          boundary_bytes(kind, plan, token_load(kind, mb)));
      const double f =
          stage_time(kind, plan, mb, Phase::Forward) / plan.vpp + comm;
      const double b =
          stage_time(kind, plan, mb, Phase::Backward) / plan.vpp + comm;
      for (int k = 0; k < pc.pp * plan.vpp; ++k, ++stage) {
        times.f(i, stage) = f;
        times.b(i, stage) = b;
      }
    }
  }
  return times;
}

}  // namespace mmplan
