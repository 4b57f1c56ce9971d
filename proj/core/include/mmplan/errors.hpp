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

#include <stdexcept>
#include <string>

namespace mmplan {

// Malformed configs, traces, or profile tables. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A cost profile has no usable rows for the requested module/TP size.
class EmptyProfileError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Trace ingestion failure carrying the offending line number.
class TraceError : public ConfigError {
 public:
  TraceError(const std::string& kind, int line, const std::string& what)
      : ConfigError(kind + " at line " + std::to_string(line) + ": " + what),
        kind_(kind),
        line_(line) {}
  const std::string& kind() const { return kind_; }
  int line() const { return line_; }

 private:
  std::string kind_;
  int line_;
};

// No plan satisfies the resource/memory constraints. CLI exit code 3.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken internal invariant; indicates a bug, not bad input. CLI exit code 4.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Selection asked for more microbatches than are pending.
class KTooLargeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Exhaustive search refused: the cluster exceeds the configured cap.
class CapExceededError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Stage count (or microbatch count) is not divisible as the interleaved
// schedule requires.
class IndivisibleVppError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A sample batch does not match the plan's global batch size.
class BatchSizeMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mmplan
