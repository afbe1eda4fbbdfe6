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

// Dense reference semantics for CIN. Loops run every index of their extent,
// accesses read row-major arrays, and writes of missing are skipped. Shares
// no code with lowering beyond the AST.

#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "coiter/analysis.hpp"
#include "coiter/cin.hpp"

namespace coiter {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DenseArray {
  std::vector<int64_t> dims;
  std::vector<Value> data;  // row-major
};

using DenseArrays = std::map<std::string, DenseArray>;

/// Evaluates a bound kernel (see bind_kernel). `inputs` holds every read
/// tensor; outputs start at their fill and are returned coerced to their
/// element type. Where-scoped temporaries are not returned.
DenseArrays oracle_eval(const CinStmtPtr& bound, const TensorMetas& metas,
                        const DenseArrays& inputs, const Params& params);

}  // namespace coiter
