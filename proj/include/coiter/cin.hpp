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

// Extended concrete index notation: AST, text parser and printer.
//
//   @V i j C[i] += A[i,j] * x[j]
//   @V k l (O[k,l] = sqrt(o[])) where (@V i o[] += A[i,k] * A[i,l])
//   @sieve j == i + 1 A[i] = B[j]
//   C[i] = coalesce(A[permit[i]], B[permit[offset(3)[i]]])

#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coiter/target_ir.hpp"
#include "coiter/unfurl.hpp"
#include "coiter/value.hpp"

namespace coiter {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
        line_(line),
        col_(col) {}
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

class CompileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Opaque compiler-internal term spliced into CIN during lowering.
class VirtualTerm {
 public:
  virtual ~VirtualTerm() = default;
  virtual std::string print() const = 0;
  virtual bool may_be_missing() const = 0;
  virtual bool mentions(const std::string& index) const = 0;
};

enum class ExprKind { Literal, Index, Param, Call, Access, Size, Escape, Virtual };

struct CinExpr;
using CinExprPtr = std::shared_ptr<const CinExpr>;

struct Modifier {
  ModKind kind = ModKind::Permit;
  std::vector<CinExprPtr> args;  // Offset: delta; Window: lo, hi
};

struct IndexSlot {
  CinExprPtr index;
  std::vector<Modifier> mods;  // from the tensor outward
  std::optional<Protocol> proto;
};

struct CinExpr {
  ExprKind kind = ExprKind::Literal;
  Value value;              // Literal
  std::string name;         // Index, Param, Access tensor, Size tensor; Call: opaque function
  Op op = Op::Identity;     // Call
  std::vector<CinExprPtr> args;   // Call
  std::vector<IndexSlot> slots;   // Access
  int64_t dim = 0;                // Size: 1-based mode
  TExpr escape;                   // Escape
  std::optional<ElemType> type;   // Escape: element type when known
  std::shared_ptr<const VirtualTerm> virt;  // Virtual
};

enum class StmtKind { Assign, Forall, Where, Multi, Sieve, Pass };

struct CinStmt;
using CinStmtPtr = std::shared_ptr<const CinStmt>;

struct CinStmt {
  StmtKind kind = StmtKind::Pass;
  CinExprPtr lhs;  // Assign: an Access
  UpdateOp op = UpdateOp::Overwrite;
  CinExprPtr rhs;
  std::string index;           // Forall
  CinExprPtr lo, hi;           // Forall extent, both or neither
  bool nonempty = false;       // Forall: extent known to be nonempty
  CinStmtPtr body;             // Forall, Sieve
  CinStmtPtr consumer;         // Where
  CinStmtPtr producer;         // Where
  std::vector<CinStmtPtr> parts;  // Multi
  CinExprPtr cond;                // Sieve
  std::vector<std::string> tensors;  // Pass
};

namespace cin {

CinExprPtr lit(Value v);
CinExprPtr index(std::string name);
CinExprPtr param(std::string name);
CinExprPtr call(Op op, std::vector<CinExprPtr> args);
CinExprPtr access(std::string tensor, std::vector<IndexSlot> slots);
CinExprPtr access(std::string tensor, const std::vector<std::string>& indices);
CinExprPtr size_of(std::string tensor, int64_t dim);
CinExprPtr escape(TExpr e, std::optional<ElemType> type = std::nullopt);
CinExprPtr virt(std::shared_ptr<const VirtualTerm> v);

CinStmtPtr assign(CinExprPtr lhs, UpdateOp op, CinExprPtr rhs);
CinStmtPtr forall(std::string index, CinStmtPtr body, CinExprPtr lo = nullptr,
                  CinExprPtr hi = nullptr, bool nonempty = false);
CinStmtPtr where(CinStmtPtr consumer, CinStmtPtr producer);
CinStmtPtr multi(std::vector<CinStmtPtr> parts);
CinStmtPtr sieve(CinExprPtr cond, CinStmtPtr body);
CinStmtPtr pass(std::vector<std::string> tensors);

}  // namespace cin

/// Parses a kernel and audits its binders.
CinStmtPtr parse_kernel(const std::string& text);
CinExprPtr parse_expr(const std::string& text);

std::string print(const CinExprPtr& e);
std::string print(const CinStmtPtr& s);

bool same_expr(const CinExprPtr& a, const CinExprPtr& b);
bool same_stmt(const CinStmtPtr& a, const CinStmtPtr& b);

/// Every index used is bound by an enclosing forall, and no forall rebinds
/// an index that is already in scope. Throws CompileError.
void audit_binders(const CinStmtPtr& s);

/// Tensors written by assignments in `s` (its results, including Pass).
std::vector<std::string> results(const CinStmtPtr& s);

/// Node count, used as the rewrite termination measure.
size_t node_count(const CinStmtPtr& s);
size_t node_count(const CinExprPtr& e);

}  // namespace coiter
