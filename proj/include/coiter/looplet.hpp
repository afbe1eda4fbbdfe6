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

// Looplets describe the structure of a value sequence over an extent together
// with the code that walks it. Leaf and Fiber nodes are payloads: the value at
// a single index (a scalar, or a subfiber still to be unfurled).

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "coiter/interpreter.hpp"
#include "coiter/storage.hpp"
#include "coiter/target_ir.hpp"

namespace coiter {

class LoopletError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inclusive index range in the coordinates of the enclosing loop.
struct Extent {
  TExpr start;
  TExpr stop;
};

Extent shift_extent(const Extent& e, const TExpr& delta);  // e - delta

/// A fiber of `meta` at `level`, located at position `pos`. A fill-only fiber
/// denotes an unstored subtree whose every element is the fill value.
struct FiberRef {
  const TensorMeta* meta = nullptr;
  size_t level = 0;
  TExpr pos;
  bool fill_only = false;
};

enum class LoopletKind {
  Leaf,
  Fiber,
  Run,
  Spike,
  Lookup,
  Switch,
  Pipeline,
  Stepper,
  Jumper,
  Shift,
  Simplify,
};

const char* looplet_kind_name(LoopletKind k);

struct Looplet;
using LoopletPtr = std::shared_ptr<const Looplet>;

struct Case {
  TExpr cond;
  LoopletPtr body;
};

struct Phase {
  TExpr stop;  // null: extends to the target stop
  LoopletPtr body;
};

using LookupFn = std::function<LoopletPtr(const TExpr& index)>;
using SeekFn = std::function<TStmt(const TExpr& start)>;

struct Looplet {
  LoopletKind kind = LoopletKind::Leaf;
  TExpr value;            // Leaf scalar, Shift delta, Stepper/Jumper stop
  FiberRef fiber;         // Fiber
  LoopletPtr body;        // Run, Spike, Stepper, Jumper, Shift, Simplify
  LoopletPtr tail;        // Spike
  std::string index_sym;  // Lookup (for rendering)
  LookupFn lookup;        // Lookup
  std::vector<Case> cases;   // Switch, first match wins
  TStmt prelude;             // Switch: code run before the conditions
  std::vector<Phase> phases;  // Pipeline
  SeekFn seek;                // Stepper, Jumper
  TStmt next;                 // Stepper, Jumper
};

namespace lp {

LoopletPtr leaf(TExpr value);
LoopletPtr fiber(FiberRef f);
LoopletPtr run(LoopletPtr body);
LoopletPtr run(TExpr value);
LoopletPtr spike(LoopletPtr body, LoopletPtr tail);
LoopletPtr lookup(std::string index_sym, LookupFn f);
LoopletPtr switch_of(std::vector<Case> cases, TStmt prelude = nullptr);
LoopletPtr pipeline(std::vector<Phase> phases);
LoopletPtr stepper(SeekFn seek, TExpr stop, LoopletPtr body, TStmt next);
LoopletPtr jumper(SeekFn seek, TExpr stop, LoopletPtr body, TStmt next);
LoopletPtr shift(TExpr delta, LoopletPtr body);
LoopletPtr simplify(LoopletPtr body);

}  // namespace lp

inline bool is_payload(const LoopletPtr& l) {
  return l->kind == LoopletKind::Leaf || l->kind == LoopletKind::Fiber;
}

/// Lowering priority, lowest first.
enum class Style { Terminal, Lookup, Stepper, Jumper, Pipeline, Spike, Run, Switch };

const char* style_name(Style s);
Style style_of(const LoopletPtr& l);
Style resolve_style(Style a, Style b);

/// Restricts `l`, described over `target`, to the subrange `sub`.
LoopletPtr truncate(const LoopletPtr& l, const Extent& target, const Extent& sub);

/// Moves a head Shift inward until the head is some other kind. Strips a
/// head Simplify marker as well.
LoopletPtr push_shift(const LoopletPtr& l);

/// The payload at index `x` of `l` over `ext`. Steppers and Jumpers have no
/// point form and raise LoopletError.
LoopletPtr point(const LoopletPtr& l, const Extent& ext, const TExpr& x);

/// One element of a materialized sequence.
struct MatItem {
  Value value;
  bool is_fiber = false;
  FiberRef fiber;
  int64_t pos = 0;
};

/// Reference denotation: the value sequence of `l` over lo:hi. Seek and next
/// code runs in `env`, so every symbol the looplet uses must be bound there.
std::vector<MatItem> materialize(const LoopletPtr& l, int64_t lo, int64_t hi, Interpreter& env);
std::vector<Value> materialize_values(const LoopletPtr& l, int64_t lo, int64_t hi,
                                      Interpreter& env);

/// One node per line, two-space indentation, `NodeName(field=..., ...)`.
std::string render(const LoopletPtr& l);

/// Single-line form of a payload or looplet head, used inside CIN dumps.
std::string render_inline(const LoopletPtr& l);

}  // namespace coiter
