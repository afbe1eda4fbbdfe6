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

// Hierarchical level storage. A tensor is a tree of levels; each mode is
// stored by one non-leaf level (or by a RepeatRLE leaf for the last mode) and
// scalars live in an Element leaf. Index values are 1-based everywhere;
// positions into level arrays are 0-based.

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "coiter/value.hpp"

namespace coiter {

enum class LevelKind { Dense, SparseList, SparseBand, SparseVBL, RepeatRLE, Element };

const char* level_kind_name(LevelKind k);
/// Accepts "dense", "sparselist"/"list", "sparseband"/"band", "sparsevbl"/"vbl",
/// "repeatrle"/"rle", "element" (case-insensitive).
LevelKind level_kind_from_name(const std::string& name);

inline bool is_leaf(LevelKind k) { return k == LevelKind::RepeatRLE || k == LevelKind::Element; }

/// Storage for every fiber of one mode.
///
///   Dense:      child position = p * size + (i - 1)
///   SparseList: entries q in [pos[p], pos[p+1]) with coordinate idx[q]
///   SparseBand: one block start[p]..stop[p]; child positions from pos[p]
///   SparseVBL:  blocks b in [pos[p], pos[p+1]) ending at idx[b], children
///               ofs[b] .. ofs[b+1]-1
///   RepeatRLE:  runs r in [pos[p], pos[p+1]) ending at idx[r], value val[r]
///   Element:    val[p]
struct Level {
  LevelKind kind = LevelKind::Element;
  int64_t size = 0;
  std::vector<int64_t> pos;
  std::vector<int64_t> idx;
  std::vector<int64_t> ofs;
  std::vector<int64_t> start;
  std::vector<int64_t> stop;
  std::vector<Value> val;
};

using FormatSpec = std::vector<LevelKind>;

/// Parses a comma separated level list such as "dense,sparselist,element".
FormatSpec parse_format(const std::string& text);
std::string format_to_string(const FormatSpec& f);

/// Compile-time view of a tensor: shape, level kinds and fill.
struct TensorMeta {
  std::string name;
  std::vector<int64_t> dims;
  FormatSpec format;
  Value fill = 0.0;
  ElemType type = ElemType::Float;
  /// Every element equals fill. Lowering treats the whole tensor as one run.
  bool all_fill = false;

  /// Level index that stores mode `mode` (0-based).
  size_t level_of_mode(size_t mode) const { return mode; }
  size_t rank() const { return dims.size(); }
  /// Buffer name for array `field` of level `level` (0-based), e.g. "A_idx1".
  std::string buffer(const std::string& field, size_t level) const;
  std::string value_buffer() const { return name + "_val"; }
};

struct Tensor {
  TensorMeta meta;
  std::vector<Level> levels;

  const std::string& name() const { return meta.name; }
  const std::vector<int64_t>& dims() const { return meta.dims; }
  const Value& fill() const { return meta.fill; }
};

enum class FormatErrorCode {
  BadSpec,
  Unsupported,
  ShapeMismatch,
  PosLength,
  PosRegression,
  UnsortedIdx,
  IdxOutOfBounds,
  RleNotTiling,
  VblOverlap,
  BandOutOfBounds,
  ValueLength,
};

class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  FormatErrorCode code() const { return code_; }

 private:
  FormatErrorCode code_;
};

/// Checks the format (leaf last, one non-Element level per mode) against a rank.
void validate_format(const FormatSpec& f, size_t rank);

/// Builds a tensor from row-major data. Slots equal to `fill` may go unstored.
Tensor from_dense(const std::string& name, const std::vector<int64_t>& dims,
                  const std::vector<Value>& data, const FormatSpec& format, const Value& fill,
                  ElemType type);
/// Same, inferring the element type from the data (float if any float,
/// bool if all bool, else int).
Tensor from_dense(const std::string& name, const std::vector<int64_t>& dims,
                  const std::vector<Value>& data, const FormatSpec& format, const Value& fill);

std::vector<Value> to_dense(const Tensor& t);

/// True when every element of `t` equals its fill.
bool holds_only_fill(const Tensor& t);

/// Checks the structural invariants of every level. Each violation kind has
/// its own FormatErrorCode.
void validate(const Tensor& t);

/// One fiber within a level: the position path from the root.
struct Fiber {
  const Tensor* tensor = nullptr;
  size_t level = 0;
  std::vector<int64_t> path;  // one position per level visited; back() is current
  bool virtual_fill = false;  // an unstored slot: every element equals fill

  int64_t position() const { return path.empty() ? 0 : path.back(); }
};

Fiber root_fiber(const Tensor& t);
/// Child fiber at 1-based index `i`, or the leaf value when `f` is the last mode.
std::variant<Fiber, Value> subfiber(const Fiber& f, int64_t i);

/// Named flat arrays a compiled kernel reads. Integer arrays are exposed as
/// int values.
std::map<std::string, std::vector<Value>> tensor_buffers(const Tensor& t);

size_t product(const std::vector<int64_t>& dims);

// MatrixMarket ------------------------------------------------------------------

struct Triple {
  int64_t row;
  int64_t col;
  Value value;
};

struct MatrixMarketData {
  std::vector<int64_t> dims;
  std::vector<Triple> entries;  // 1-based, sorted row-major, duplicates summed
  ElemType type = ElemType::Float;
  size_t duplicates = 0;
};

class ParseFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

MatrixMarketData read_matrix_market(const std::string& path);
MatrixMarketData parse_matrix_market(const std::string& text);
/// Scatters the entries into a row-major array of `fill`.
std::vector<Value> assemble_dense(const MatrixMarketData& m, const Value& fill);

// Dense text format: "dims: d1 d2 ..." then row-major values. -------------------

struct DenseText {
  std::vector<int64_t> dims;
  std::vector<Value> data;
};

DenseText parse_dense_text(const std::string& text);
DenseText read_dense_text(const std::string& path);
std::string write_dense_text(const std::vector<int64_t>& dims, const std::vector<Value>& data);

}  // namespace coiter
