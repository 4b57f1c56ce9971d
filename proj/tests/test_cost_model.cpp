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

#include <doctest.h>

#include <sstream>

#include "mmplan/cost_model.hpp"
#include "mmplan/errors.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mmplan;

TEST_CASE("interpolation: exact key, midpoint, and clamp with warning") {
  CostProfile profile;
  profile.add_row(8, 4096, 1.0, {});
  profile.add_row(8, 8192, 2.0, {});
  std::vector<std::string> warnings;
  CHECK(profile.forward_seconds(8, 4096, &warnings) == doctest::Approx(1.0));
  CHECK(profile.forward_seconds(8, 6144, &warnings) == doctest::Approx(1.5));
  CHECK(warnings.empty());
  CHECK(profile.forward_seconds(8, 10000, &warnings) == doctest::Approx(2.0));
  CHECK(warnings.size() == 1);
  // Cross-check against an independent interpolation of the same table.
  const std::vector<double> xs = {4096, 8192};
  const std::vector<double> ys = {1.0, 2.0};
  for (double q : {0.0, 4096.0, 5000.0, 6144.0, 8192.0, 10000.0}) {
    CHECK(profile.forward_seconds(8, q, nullptr) ==
          doctest::Approx(test::interp_clamped(xs, ys, q)).epsilon(1e-12));
  }
}

TEST_CASE("interpolation is monotone for a monotone table") {
  CostProfile profile;
  profile.add_row(4, 1000, 0.5, {});
  profile.add_row(4, 2000, 0.9, {});
  profile.add_row(4, 5000, 2.5, {});
  double prev = 0.0;
  for (double q = 0; q <= 6000; q += 97) {
    const double v = profile.forward_seconds(4, q, nullptr);
    CHECK(v >= prev - 1e-15);
    prev = v;
  }
}

TEST_CASE("missing tp rows raise EmptyProfile") {
  CostProfile profile;
  profile.add_row(8, 4096, 1.0, {});
  CHECK_THROWS_AS(profile.forward_seconds(4, 4096, nullptr),
                  EmptyProfileError);
  CostProfile empty;
  CHECK_THROWS_AS(empty.forward_seconds(1, 0, nullptr), EmptyProfileError);
}

TEST_CASE("backward defaults to twice the forward when not measured") {
  CostProfile profile;
  profile.add_row(2, 1024, 0.3, {});
  profile.add_row(2, 2048, 0.5, 1.4);
  // First row has no backward: the column falls back rowwise to 2x forward.
  CHECK(profile.backward_seconds(2, 1024, nullptr) == doctest::Approx(0.6));
  CHECK(profile.backward_seconds(2, 2048, nullptr) == doctest::Approx(1.4));
  CHECK(profile.backward_seconds(2, 1536, nullptr) == doctest::Approx(1.0));
}

TEST_CASE("profile csv round trip with comments and blank backward") {
  std::istringstream in(
      "# module,tp,token_load,fwd_s,bwd_s\n"
      "encoder,1,1024,0.4,\n"
      "encoder,1,4096,1.6,3.4\n"
      "backbone,8,8192,2.0,4.1\n"
      "generator,4,512,0.2,0.5\n");
  const CostBook book = parse_profile_csv(in);
  CHECK(book.profile(ModuleKind::Encoder).forward_seconds(1, 1024, nullptr) ==
        doctest::Approx(0.4));
  CHECK(book.profile(ModuleKind::Backbone).backward_seconds(8, 8192, nullptr) ==
        doctest::Approx(4.1));
  CHECK(book.profile(ModuleKind::Generator).empty() == false);
}

TEST_CASE("malformed profile rows carry their line number") {
  std::istringstream in("encoder,1,1024,0.4\nbadmodule,1,1,1\n");
  try {
    parse_profile_csv(in);
    FAIL("expected TraceError");
  } catch (const TraceError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("stage time applies the dp coupling factor") {
  const ModelSpec model = test::toy_model();
  const ClusterSpec cluster = test::toy_cluster(8);
  CostBook book;
  book.profile(ModuleKind::Encoder).add_row(1, 0, 0.4, 0.8);
  book.profile(ModuleKind::Backbone).add_row(1, 0, 2.0, 4.0);
  book.profile(ModuleKind::Generator).add_row(1, 0, 0.6, 1.2);
  const CostModel costs(model, cluster, book);

  Plan plan;
  plan.encoder = {1, 2, 1};
  plan.backbone = {1, 4, 1};
  plan.generator = {1, 4, 1};
  plan.global_batch = 8;
  const Microbatch mb = Microbatch::from({test::sample_with(100, {50})});

  // Encoder: dp_lm/dp_me = 2, whole-module 0.4 s, one stage.
  CHECK(costs.stage_time(ModuleKind::Encoder, plan, mb, Phase::Forward) ==
        doctest::Approx(0.8));
  // Generator coupling is 1.
  CHECK(costs.stage_time(ModuleKind::Generator, plan, mb, Phase::Forward) ==
        doctest::Approx(0.6));

  // Backbone: whole-module time split across stages.
  Plan deep = plan;
  deep.backbone = {1, 1, 4};
  deep.encoder = {1, 1, 1};
  deep.generator = {1, 1, 1};
  CHECK(costs.stage_time(ModuleKind::Backbone, deep, mb, Phase::Forward) ==
        doctest::Approx(0.5));
}

TEST_CASE("encoder stage time doubles when the backbone dp doubles") {
  const ModelSpec model = test::toy_model();
  const ClusterSpec cluster = test::toy_cluster(64);
  CostBook book;
  book.profile(ModuleKind::Encoder).add_row(1, 0, 0.4, 0.8);
  const CostModel costs(model, cluster, book);
  const Microbatch mb = Microbatch::from({test::sample_with(100, {50})});
  Plan plan;
  plan.encoder = {1, 2, 1};
  plan.backbone = {1, 4, 1};
  plan.global_batch = 16;
  const double base =
      costs.stage_time(ModuleKind::Encoder, plan, mb, Phase::Forward);
  plan.backbone.dp = 8;
  CHECK(costs.stage_time(ModuleKind::Encoder, plan, mb, Phase::Forward) ==
        doctest::Approx(2.0 * base));
}

TEST_CASE("pp communication: volume over bandwidth, scaled by pp size") {
  ClusterSpec cluster = test::toy_cluster(16);
  cluster.inter_node_bw = 100e6;  // 100 MB/s
  cluster.intra_node_bw = 100e6;
  Plan plan;
  plan.backbone = {1, 1, 4};
  CHECK(pp_boundary_seconds(plan, ModuleKind::Backbone, cluster, 100e6) ==
        doctest::Approx(1.0));
  CHECK(pp_comm_time(plan, ModuleKind::Backbone, cluster, 100e6 * 0.1) ==
        doctest::Approx(0.4));
  CHECK(pp_comm_time(plan, ModuleKind::Backbone, cluster, 0.0) ==
        doctest::Approx(0.0));
}

TEST_CASE("memory accounting matches the hand-evaluated formula") {
  // P = 80 GB params+grads, S = 160 GB optimizer, L = 2 GB per microbatch,
  // DP_lm = 2, PP_lm = 4, y = 16 GPUs: (160 + 160 + 16) GB / 16 = 21 GB.
  ModelSpec model = test::toy_model();
  model.backbone.mem = {80e9, 160e9, 2e9};
  ClusterSpec cluster = test::toy_cluster(32);
  cluster.gpu_mem_bytes = 100e9;
  Plan plan;
  plan.encoder = {1, 1, 1};
  plan.generator = {1, 1, 1};
  plan.backbone = {2, 2, 4};  // tp*dp*pp = 16
  plan.global_batch = 4;
  const MemoryReport report = memory_check(plan, model, cluster);
  CHECK(report.units[1].bytes_per_gpu == doctest::Approx(21e9));
  CHECK(report.units[1].fits);

  // Doubling the backbone's GPUs at fixed DP and PP halves every term.
  Plan wide = plan;
  wide.backbone = {4, 2, 4};
  const MemoryReport half = memory_check(wide, model, cluster);
  CHECK(half.units[1].bytes_per_gpu ==
        doctest::Approx(report.units[1].bytes_per_gpu / 2.0).epsilon(1e-12));
}

TEST_CASE("memory accounting without activations keeps static terms only") {
  ModelSpec model = test::toy_model();
  model.backbone.mem = {80e9, 160e9, 0.0};
  Plan plan;
  plan.backbone = {2, 2, 4};
  const MemoryReport report =
      memory_check(plan, model, test::toy_cluster(32));
  CHECK(report.units[1].bytes_per_gpu ==
        doctest::Approx((2.0 * 80e9 + 160e9) / 16.0));
}

TEST_CASE("mfu definition and scaling") {
  const ModelSpec model = test::toy_model();
  ClusterSpec cluster = test::toy_cluster(8);
  WorkloadStats stats;
  stats.seq_len = model.seq_len;
  stats.mean_encoder_tokens = 500;
  stats.mean_generator_tokens = 500;
  Plan plan;
  plan.encoder = {1, 1, 1};
  plan.backbone = {1, 1, 2};
  plan.generator = {1, 1, 1};
  plan.global_batch = 4;

  const double t = 2.0;
  const double m1 = mfu(plan, model, cluster, stats, t);
  CHECK(mfu(plan, model, cluster, stats, 2.0 * t) == doctest::Approx(m1 / 2));

  // Achieved == peak over the used GPUs gives exactly 1.
  const double flops = model_flops_per_batch(model, stats, plan.global_batch);
  cluster.peak_flops = flops / (t * plan.total_gpus());
  CHECK(mfu(plan, model, cluster, stats, t) == doctest::Approx(1.0));
}

TEST_CASE("model flops match an independent counter") {
  const ModelSpec model = test::toy_model();
  WorkloadStats stats;
  stats.seq_len = model.seq_len;
  stats.mean_encoder_tokens = 700;
  stats.mean_generator_tokens = 300;
  const std::int64_t bs = 16;
  double expect = 0.0;
  const auto count = [&](const ModuleSpec& mod, double tokens_per_sample) {
    const double params =
        test::analytic_params(mod.arch.layers, double(mod.arch.hidden),
                              double(mod.arch.ffn_hidden), mod.arch.heads,
                              mod.arch.groups);
    return 6.0 * params * tokens_per_sample * double(bs);
  };
  expect += count(model.encoder, 700);
  expect += count(model.backbone, double(model.seq_len));
  expect += count(model.generator, 300);
  CHECK(model_flops_per_batch(model, stats, bs) ==
        doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("frozen modules cut backward cost by the configured factor") {
  ModelSpec model = test::toy_model();
  model.generator.frozen = true;
  const ClusterSpec cluster = test::toy_cluster(8);
  CostBook book;
  book.profile(ModuleKind::Generator).add_row(1, 0, 0.6, 1.2);
  const CostModel costs(model, cluster, book);
  CHECK(costs.unit_backward_time(ModuleKind::Generator, 1, 0) ==
        doctest::Approx(1.2 / 3.0));
  CHECK(costs.unit_forward_time(ModuleKind::Generator, 1, 0) ==
        doctest::Approx(0.6));
}

TEST_CASE("analytic fallback fires only without profile rows, with warning") {
  ModelSpec model = test::toy_model();
  const ClusterSpec cluster = test::toy_cluster(8);
  CostBook book;
  book.analytic.efficiency = 0.5;
  CostModel costs(model, cluster, book);
  std::vector<std::string> warnings;
  costs.set_warning_sink(&warnings);
  const double tokens = 1000;
  const double expect = 2.0 * model.encoder.arch.param_count() * tokens /
                        (cluster.peak_flops * 0.5);
  CHECK(costs.unit_forward_time(ModuleKind::Encoder, 1, tokens) ==
        doctest::Approx(expect).epsilon(1e-12));
  CHECK(warnings.size() == 1);
}
