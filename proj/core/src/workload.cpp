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

#include "mmplan/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mmplan/errors.hpp"

namespace mmplan {

namespace {

// Hand-rolled transforms on top of mt19937_64 keep draws identical across
// standard-library implementations.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform01() {
    // (0, 1]: never zero, so log() is safe.
    return (static_cast<double>(rng_() >> 11) + 1.0) / 9007199254740993.0;
  }

  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643 * u2);
  }

  std::int64_t draw_count(const DistSpec& d) {
    switch (d.family) {
      case DistSpec::Family::Point:
        return static_cast<std::int64_t>(std::llround(d.value));
      case DistSpec::Family::Geometric: {
        if (d.value <= 0.0) return 0;
        const double q = 1.0 / (1.0 + d.value);  // success prob, mean = value
        const double u = uniform01();
        return static_cast<std::int64_t>(
            std::floor(std::log(u) / std::log(1.0 - q)));
      }
      case DistSpec::Family::LogNormal:
        return std::max<std::int64_t>(0, draw_tokens(d));
    }
    return 0;
  }

  std::int64_t draw_tokens(const DistSpec& d) {
    switch (d.family) {
      case DistSpec::Family::Point:
        return static_cast<std::int64_t>(std::llround(d.value));
      case DistSpec::Family::LogNormal: {
        const double v = d.median * std::exp(d.sigma * normal());
        return std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                             std::llround(v)));
      }
      case DistSpec::Family::Geometric:
        return draw_count(d);
    }
    return 0;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<Sample> synth_batch(const WorkloadSpec& spec, std::int64_t batch) {
  if (batch < 1) throw InternalError("batch size must be >= 1");
  if (spec.seq_len < 1) throw ConfigError("seq_len must be >= 1");
  Sampler sampler(spec.seed);
  std::vector<Sample> out;
  out.reserve(batch);
  for (std::int64_t i = 0; i < batch; ++i) {
    Sample s;
    std::int64_t budget = spec.seq_len;
    const std::int64_t text =
        std::clamp<std::int64_t>(sampler.draw_tokens(spec.text_tokens), 1,
                                 budget);
    s.text_tokens = text;
    budget -= text;
    const std::int64_t images = sampler.draw_count(spec.image_count);
    for (std::int64_t k = 0; k < images && budget > 0; ++k) {
      const std::int64_t tokens =
          std::min(budget, sampler.draw_tokens(spec.image_subseq_tokens));
      if (tokens > 0) {
        s.image_subseqs.push_back(tokens);
        budget -= tokens;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> ingest_trace(std::istream& in, std::int64_t seq_len_cap) {
  std::vector<Sample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw TraceError("ParseError", lineno, e.what());
    }
    Sample s;
    try {
      if (!record.is_object() || !record.contains("text_tokens")) {
        throw std::runtime_error("record must be an object with text_tokens");
      }
      s.text_tokens = record.at("text_tokens").get<std::int64_t>();
      if (record.contains("image_subseqs")) {
        s.image_subseqs =
            record.at("image_subseqs").get<std::vector<std::int64_t>>();
      }
      if (record.contains("audio_subseqs")) {
        s.audio_subseqs =
            record.at("audio_subseqs").get<std::vector<std::int64_t>>();
      }
    } catch (const std::exception& e) {
      throw TraceError("ParseError", lineno, e.what());
    }
    std::string why;
    if (!s.valid(seq_len_cap, &why)) {
      throw TraceError("InvariantViolation", lineno, why);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> ingest_trace_file(const std::string& path,
                                      std::int64_t seq_len_cap) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace: " + path);
  return ingest_trace(in, seq_len_cap);
}

void write_trace(std::ostream& out, std::span<const Sample> samples) {
  for (const Sample& s : samples) {
    nlohmann::ordered_json record;
    record["text_tokens"] = s.text_tokens;
    record["image_subseqs"] = s.image_subseqs;
    if (!s.audio_subseqs.empty()) record["audio_subseqs"] = s.audio_subseqs;
    out << record.dump() << "\n";
  }
}

void write_trace_file(const std::string& path,
                      std::span<const Sample> samples) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write trace: " + path);
  write_trace(out, samples);
}

std::vector<std::vector<Microbatch>> assemble_microbatches(
    std::span<const Sample> samples, const Plan& plan) {
  if (static_cast<std::int64_t>(samples.size()) != plan.global_batch) {
    throw BatchSizeMismatchError(
        "batch has " + std::to_string(samples.size()) +
        " samples, plan expects " + std::to_string(plan.global_batch));
  }
  const std::int64_t per_group = plan.global_batch / plan.backbone.dp;
  const int coupled = plan.coupled_group_count();
  const int span = plan.samples_per_microbatch();
  std::vector<std::vector<Microbatch>> groups(coupled);
  for (int e = 0; e < coupled; ++e) {
    groups[e].reserve(per_group);
    for (std::int64_t i = 0; i < per_group; ++i) {
      std::vector<Sample> mb_samples;
      mb_samples.reserve(span);
      for (int j = 0; j < span; ++j) {
        const std::size_t idx =
            static_cast<std::size_t>(e * span + j) * per_group + i;
        mb_samples.push_back(samples[idx]);
      }
      groups[e].push_back(Microbatch::from(std::move(mb_samples)));
    }
  }
  return groups;
}

WorkloadStats compute_stats(std::span<const Sample> samples,
                            std::int64_t seq_len) {
  WorkloadStats stats;
  stats.seq_len = seq_len;
  if (samples.empty()) return stats;
  double enc = 0.0;
  double gen = 0.0;
  for (const Sample& s : samples) {
    enc += static_cast<double>(s.encoder_tokens());
    gen += static_cast<double>(s.generator_tokens());
  }
  stats.mean_encoder_tokens = enc / static_cast<double>(samples.size());
  stats.mean_generator_tokens = gen / static_cast<double>(samples.size());
  return stats;
}

TokenTotals token_totals(std::span<const Sample> samples,
                         std::int64_t seq_len) {
  TokenTotals totals;
  for (const Sample& s : samples) {
    totals.text += s.text_tokens;
    totals.modality += s.modality_tokens();
    totals.padding += seq_len - s.total_tokens();
  }
  return totals;
}

}  // namespace mmplan
