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

// Analyses and binding passes over CIN that run before lowering.

#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "coiter/cin.hpp"
#include "coiter/storage.hpp"

namespace coiter {

using TensorMetas = std::map<std::string, TensorMeta>;
using Params = std::map<std::string, Value>;

/// Bottom-up rebuild: children first, then `f` on the rebuilt node.
using ExprFn = std::function<CinExprPtr(const CinExprPtr&)>;
CinExprPtr transform(const CinExprPtr& e, const ExprFn& f);
/// Applies `transform` to every expression of a statement, lhs included.
CinStmtPtr transform_exprs(const CinStmtPtr& s, const ExprFn& f);

bool mentions_index(const CinExprPtr& e, const std::string& index);
bool mentions_index(const CinStmtPtr& s, const std::string& index);

/// Tensors accessed on a right-hand side, in a condition or an extent.
std::set<std::string> tensors_read(const CinStmtPtr& s);
/// Tensors on the left of some assignment.
std::set<std::string> tensors_written(const CinStmtPtr& s);
/// Tensors named by pass statements in `s`.
std::set<std::string> tensors_passed(const CinStmtPtr& s);
/// Every tensor the statement names.
std::set<std::string> tensors_named(const CinStmtPtr& s);

/// Replaces size(A, d) with the bound dimension.
CinStmtPtr bind_sizes(const CinStmtPtr& s, const TensorMetas& metas);

/// Checks that every read tensor is bound, with matching rank. The error
/// message names the first unbound tensor.
void check_bindings(const CinStmtPtr& s, const TensorMetas& metas);

/// Gives every forall an explicit extent. A plain index slot bounds its index
/// to 1:dim, window(a,b) bounds it to 1:b-a+1, permit and offset impose
/// nothing. Inferred bounds must agree; an explicit extent wins.
CinStmtPtr infer_extents(const CinStmtPtr& s, const TensorMetas& metas, const Params& params);

/// Metadata for written tensors with no binding: dense float, fill 0, shape
/// from the extents of the left-hand indices.
TensorMetas declare_outputs(const CinStmtPtr& s, const TensorMetas& metas, const Params& params);

/// Rewrites opaque read indices to fresh sieved foralls:
///   @V i A[i] = B[f(i)]  ->  @V i j @sieve j == f(i) A[i] = B[j]
CinStmtPtr normalize_scatter(const CinStmtPtr& s, const TensorMetas& metas,
                             const std::function<std::string(const std::string&)>& fresh);

/// Where each result is initialized and finalized: the outermost where whose
/// producer writes it and whose consumer reads it, else the program start
/// (nullptr).
std::map<std::string, const CinStmt*> result_scopes(const CinStmtPtr& s);

/// Conservative test for whether `e` can evaluate to missing.
bool may_be_missing(const CinExprPtr& e, const TensorMetas* metas = nullptr);

/// Integer constant value of `e` under `params`, if it has one.
std::optional<int64_t> const_int_of(const CinExprPtr& e, const Params& params);

/// Evaluates a closed scalar expression (literals, params, calls).
std::optional<Value> const_value_of(const CinExprPtr& e, const Params& params);

}  // namespace coiter
