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

// Imperative target IR produced by lowering. Nodes are immutable and shared.
// Buffers are flat, 0-based arrays of Value addressed by name.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coiter/value.hpp"

namespace coiter {

enum class TExprKind {
  Lit,
  Var,
  Read,    // name[args[0]]
  Call,    // op(args...), strict
  LAnd,    // short-circuit conjunction over booleans
  LOr,     // short-circuit disjunction over booleans
  Select,  // args[0] ? args[1] : args[2], lazy in the branches
  Search,  // first position q in [args[0], args[1]) with name[q] >= args[2], else args[1]
};

struct TExprNode;
using TExpr = std::shared_ptr<const TExprNode>;

struct TExprNode {
  TExprKind kind = TExprKind::Lit;
  Value lit;
  std::string name;
  Op op = Op::Identity;
  std::vector<TExpr> args;
};

namespace ir {

TExpr lit(Value v);
TExpr var(std::string name);
TExpr read(std::string buffer, TExpr index);
TExpr call(Op op, std::vector<TExpr> args);
TExpr add(TExpr a, TExpr b);
TExpr sub(TExpr a, TExpr b);
TExpr mul(TExpr a, TExpr b);
TExpr min(std::vector<TExpr> args);
TExpr max(std::vector<TExpr> args);
TExpr eq(TExpr a, TExpr b);
TExpr le(TExpr a, TExpr b);
TExpr lt(TExpr a, TExpr b);
TExpr land(std::vector<TExpr> args);
TExpr lor(std::vector<TExpr> args);
TExpr select(TExpr c, TExpr a, TExpr b);
TExpr search(std::string buffer, TExpr lo, TExpr hi, TExpr key);

}  // namespace ir

std::optional<Value> const_value(const TExpr& e);
std::optional<int64_t> const_int(const TExpr& e);
bool same_expr(const TExpr& a, const TExpr& b);
bool mentions_var(const TExpr& e, const std::string& name);

/// Constant folding over all node kinds. Keeps evaluation order and float
/// association unchanged.
TExpr fold(const TExpr& e);

/// Normalizer for integer index arithmetic: linearizes sums and differences,
/// flattens min/max, drops dominated min/max arguments that differ by a
/// constant, and decides comparisons whose operands differ by a constant.
TExpr normalize_index(const TExpr& e);

/// Replaces every Var named `name` by `with`.
TExpr substitute(const TExpr& e, const std::string& name, const TExpr& with);

std::string print(const TExpr& e);

// Statements ---------------------------------------------------------------------

enum class TStmtKind { Block, Let, Assign, Write, For, While, If, Hook, Nop };

enum class HookKind { Init, Finalize, Append };

struct TStmtNode;
using TStmt = std::shared_ptr<const TStmtNode>;

struct TStmtNode {
  TStmtKind kind = TStmtKind::Nop;
  std::string name;            // Let/Assign var, Write buffer, For var, While cursor, Hook tensor
  TExpr value;                 // Let/Assign/Write/Append value, While cond
  std::vector<TExpr> exprs;    // Write/Append: index; For: lo, hi
  UpdateOp op = UpdateOp::Overwrite;
  std::vector<TStmt> body;     // Block children; For/While body is body[0]
  std::vector<std::pair<TExpr, TStmt>> branches;  // If
  TStmt otherwise;             // If else branch (may be null)
  HookKind hook = HookKind::Init;
};

namespace ir {

TStmt nop();
TStmt block(std::vector<TStmt> body);
TStmt let(std::string name, TExpr value);
TStmt assign(std::string name, TExpr value);
TStmt write(std::string buffer, TExpr index, UpdateOp op, TExpr value);
TStmt for_loop(std::string var, TExpr lo, TExpr hi, TStmt body);
TStmt while_loop(TExpr cond, std::string cursor, TStmt body);
TStmt if_chain(std::vector<std::pair<TExpr, TStmt>> branches, TStmt otherwise = nullptr);
TStmt hook_init(std::string tensor);
TStmt hook_finalize(std::string tensor);
TStmt hook_append(std::string tensor, TExpr coord, UpdateOp op, TExpr value);

}  // namespace ir

bool is_nop(const TStmt& s);
/// Number of For and While nodes.
size_t count_loops(const TStmt& s);
/// Structural counts used by golden and asymptotic tests.
struct IrCensus {
  size_t searches = 0;
  size_t whiles = 0;
  size_t fors = 0;
  size_t ifs = 0;
  std::map<std::string, size_t> reads;
};
IrCensus census(const TStmt& s);

/// Deterministic text rendering: one statement per line, two-space indentation.
std::string print_ir(const TStmt& s);

}  // namespace coiter
