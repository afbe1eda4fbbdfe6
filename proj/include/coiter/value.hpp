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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>

namespace coiter {

/// Raised when a scalar operation is applied to values it does not accept
/// (boolean logic on numbers, integer overflow, missing reaching a store).
class ValueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ElemType { Int, Float, Bool };

struct Missing {
  bool operator==(const Missing&) const = default;
};

/// Scalar domain shared by tensors, the interpreter and the oracle.
class Value {
 public:
  Value() : v_(Missing{}) {}
  Value(Missing m) : v_(m) {}
  Value(int64_t i) : v_(i) {}
  Value(int i) : v_(static_cast<int64_t>(i)) {}
  Value(double d) : v_(d) {}
  Value(bool b) : v_(b) {}

  bool is_missing() const { return std::holds_alternative<Missing>(v_); }
  bool is_int() const { return std::holds_alternative<int64_t>(v_); }
  bool is_float() const { return std::holds_alternative<double>(v_); }
  bool is_bool() const { return std::holds_alternative<bool>(v_); }
  bool is_numeric() const { return is_int() || is_float() || is_bool(); }

  int64_t as_int() const;
  double as_double() const;
  bool as_bool() const;

  /// Structural equality: same alternative and same payload. NaN equals NaN.
  bool identical(const Value& o) const;
  bool operator==(const Value& o) const { return identical(o); }

  /// Numeric equality across int/float/bool (1 == 1.0 == true).
  bool numerically_equal(const Value& o) const;

 private:
  std::variant<Missing, int64_t, double, bool> v_;
};

inline const Value kMissing{Missing{}};

enum class Op {
  Add, Sub, Mul, Div, Neg, Pow, Mod, IDiv,
  Min, Max,
  Eq, Ne, Lt, Le, Gt, Ge,
  And, Or, Not,
  Coalesce,
  Sqrt, Round, Abs,
  Identity,  // single-argument pass-through, used for n-ary folds with one operand
};

/// Update operators shared by assignments and buffer writes.
enum class UpdateOp { Overwrite, Add, Mul, Min, Max, Or };

const char* op_name(Op op);
std::optional<Op> op_from_name(const std::string& name);
const char* update_op_token(UpdateOp op);

bool is_comparison(Op op);

/// Evaluates `op` strictly: missing in any argument yields missing, except
/// for Coalesce which returns its first non-missing argument.
Value apply_op(Op op, std::span<const Value> args);

/// Combines the stored element with an update value.
Value apply_update(UpdateOp op, const Value& old, const Value& v);

/// Converts a value to a tensor element type on store. Throws ValueError on
/// missing, or when the conversion would lose information.
Value coerce_to(ElemType t, const Value& v);

Value zero_of(ElemType t);
const char* elem_type_name(ElemType t);
std::optional<ElemType> elem_type_from_name(const std::string& s);

std::string to_string(const Value& v);
/// Parses "3", "2.5", "true", "false", "missing".
std::optional<Value> parse_value(const std::string& s);

/// Exact match for int/bool pairs; relative tolerance for anything
/// involving float. Missing only matches missing.
bool values_close(const Value& a, const Value& b, double rtol);
double relative_error(const Value& a, const Value& b);

}  // namespace coiter
