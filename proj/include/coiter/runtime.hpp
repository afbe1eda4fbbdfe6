// Copyright 2026 The coiter Authors
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

// Running compiled kernels on tensors, and checking them against the oracle.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "coiter/interpreter.hpp"
#include "coiter/lower.hpp"
#include "coiter/oracle.hpp"
#include "coiter/storage.hpp"

namespace coiter {

using Tensors = std::map<std::string, Tensor>;

TensorMetas metas_of(const Tensors& tensors);

struct RunResult {
  /// Outputs in their declared formats.
  Tensors outputs;
  ExecResult exec;
};

/// Empty when `given` can run code compiled for `compiled`, else the reason.
std::string meta_mismatch(const TensorMeta& compiled, const TensorMeta& given);

/// Throws ExecError when an input differs from the metadata it was compiled for.
RunResult run_kernel(const CompiledKernel& k, const Tensors& inputs, const Params& params,
                     bool trace = false);

DenseArrays dense_arrays(const Tensors& tensors);

struct Mismatch {
  std::string tensor;
  size_t offset = 0;
  Value got, want;
};

/// Elementwise comparison of every output against the oracle; float values
/// use relative tolerance `rtol`.
std::vector<Mismatch> compare_outputs(const Tensors& got, const DenseArrays& want, double rtol);

struct CheckResult {
  bool ok = false;
  std::vector<Mismatch> mismatches;
  RunResult run;
};

/// Compiles, runs, evaluates the oracle on the same inputs and compares.
CheckResult check_kernel(const CinStmtPtr& kernel, const Tensors& inputs, const Params& params,
                         const CompileOptions& opts = {}, double rtol = 1e-9);

}  // namespace coiter
