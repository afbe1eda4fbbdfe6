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

// Where storage meets looplets: per-level unfurling under a protocol, index
// modifiers, sieve masks and output writers.

#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coiter/looplet.hpp"
#include "coiter/storage.hpp"

namespace coiter {

enum class Protocol { Walk, Gallop, Follow, FollowZeroCheck, Extrude };

const char* protocol_name(Protocol p);
/// Accepts walk, gallop, follow, followzero (also followzerocheck), extrude.
std::optional<Protocol> protocol_from_name(const std::string& s);

class UnfurlError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using FreshFn = std::function<std::string(const std::string& hint)>;

/// Checks that `p` can traverse level `level` of `meta`; throws UnfurlError.
void check_protocol(const TensorMeta& meta, size_t level, Protocol p);

/// Looplet nest for one fiber over 1:size of its mode.
LoopletPtr unfurl(const FiberRef& f, Protocol p, const FreshFn& fresh);

/// Payload for position `pos` of the level below `level`: a Leaf reading the
/// value buffer, or the next Fiber.
LoopletPtr child_payload(const TensorMeta& meta, size_t level, const TExpr& pos);
LoopletPtr fill_payload(const TensorMeta& meta, size_t level);

enum class ModKind { Window, Offset, Permit };

struct IndexMod {
  ModKind kind = ModKind::Permit;
  TExpr a;  // Window lo, Offset delta
  TExpr b;  // Window hi
};

/// Applies modifiers to `base`, which spans 1:size. `mods` are ordered from
/// the tensor outward, so in A[permit[offset(d)[i]]] permit comes first.
LoopletPtr unfurl_modified(LoopletPtr base, TExpr size, const std::vector<IndexMod>& mods);

/// Bool sequence that is true exactly at `target`.
LoopletPtr mask_looplet(const TExpr& target);

/// How lowered code writes an output tensor. Dense outputs are written in
/// place through the value buffer; SparseList and RepeatRLE outputs receive
/// appends in ascending linear order.
struct WriterDescriptor {
  std::string tensor;
  bool in_place = true;
  TStmt init;
  TStmt finalize;
  std::function<TStmt(const TExpr& linear, UpdateOp op, const TExpr& value)> write;
};

WriterDescriptor unfurl_output(const TensorMeta& meta);

/// 0-based row-major position of 1-based indices.
TExpr linear_position(const TensorMeta& meta, const std::vector<TExpr>& indices);

}  // namespace coiter
