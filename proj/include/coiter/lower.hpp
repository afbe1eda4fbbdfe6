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

// Lowering CIN to target IR. Each forall unfurls the accesses it heads into
// looplets, then one pass per dispatch consumes the highest-priority style
// and lowers what remains recursively.

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "coiter/analysis.hpp"
#include "coiter/cin.hpp"
#include "coiter/rewrite.hpp"
#include "coiter/target_ir.hpp"
#include "coiter/unfurl.hpp"

namespace coiter {

struct CompileOptions {
  /// Protocol for uses of index INDEX on tensor TENSOR, keyed "TENSOR.INDEX".
  /// An annotation in the kernel text takes precedence.
  std::map<std::string, Protocol> protocols;
  /// Record the CIN at every pass dispatch.
  bool record_stages = false;
  /// Rules used by every simplification; the standard set when null.
  const RuleSet* rules = nullptr;
  /// Most cases a Switch pass may enumerate.
  size_t max_switch_branches = 64;
};

struct Stage {
  std::string pass;
  std::string cin;
};

struct CompiledKernel {
  TStmt program;
  /// Every tensor the program touches, auto-declared outputs included.
  TensorMetas metas;
  std::vector<std::string> inputs;
  /// Results of the kernel; where-scoped temporaries are not among them.
  std::vector<std::string> outputs;
  /// Kernel with sizes, extents and outputs bound; what the oracle evaluates.
  CinStmtPtr bound;
  /// After scatter normalization and a first simplification.
  CinStmtPtr simplified;
  std::vector<Stage> stages;
};

/// `inputs` holds metadata for bound tensors; written tensors that are not
/// bound are declared dense float with fill 0. Throws CompileError (also for
/// unsupported format/protocol pairs).
CompiledKernel compile_kernel(const CinStmtPtr& kernel, const TensorMetas& inputs,
                              const Params& params, const CompileOptions& opts = {});

/// Front half of compile_kernel: bind sizes, infer extents, declare outputs.
/// Returns the bound kernel and fills `metas` with the declared outputs.
CinStmtPtr bind_kernel(const CinStmtPtr& kernel, TensorMetas& metas, const Params& params);

std::string format_stages(const std::vector<Stage>& stages);

}  // namespace coiter
