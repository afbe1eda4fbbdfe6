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

#include "coiter/value.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <vector>

namespace coiter {

int64_t Value::as_int() const {
  if (auto p = std::get_if<int64_t>(&v_)) return *p;
  if (auto p = std::get_if<bool>(&v_)) return *p ? 1 : 0;
  if (auto p = std::get_if<double>(&v_)) {
    if (std::trunc(*p) == *p && std::abs(*p) < 9.0e18) return static_cast<int64_t>(*p);
    throw ValueError("non-integral value " + to_string(*this) + " used as integer");
  }
  throw ValueError("missing used as integer");
}

double Value::as_double() const {
  if (auto p = std::get_if<double>(&v_)) return *p;
  if (auto p = std::get_if<int64_t>(&v_)) return static_cast<double>(*p);
  if (auto p = std::get_if<bool>(&v_)) return *p ? 1.0 : 0.0;
  throw ValueError("missing used as number");
}

bool Value::as_bool() const {
  if (auto p = std::get_if<bool>(&v_)) return *p;
  if (is_missing()) throw ValueError("missing used as boolean");
  throw ValueError("number " + to_string(*this) + " used as boolean");
}

bool Value::identical(const Value& o) const {
  if (v_.index() != o.v_.index()) return false;
  if (is_float()) {
    double a = std::get<double>(v_), b = std::get<double>(o.v_);
    return a == b || (std::isnan(a) && std::isnan(b));
  }
  return v_ == o.v_;
}

bool Value::numerically_equal(const Value& o) const {
  if (is_missing() || o.is_missing()) return is_missing() && o.is_missing();
  if (is_float() || o.is_float()) {
    double a = as_double(), b = o.as_double();
    return a == b || (std::isnan(a) && std::isnan(b));
  }
  return as_int() == o.as_int();
}

namespace {

struct OpInfo {
  Op op;
  const char* name;
};

constexpr OpInfo kOps[] = {
    {Op::Add, "add"},       {Op::Sub, "sub"},     {Op::Mul, "mul"},     {Op::Div, "div"},
    {Op::Neg, "neg"},       {Op::Pow, "pow"},     {Op::Mod, "mod"},     {Op::IDiv, "idiv"},
    {Op::Min, "min"},       {Op::Max, "max"},     {Op::Eq, "eq"},       {Op::Ne, "ne"},
    {Op::Lt, "lt"},         {Op::Le, "le"},       {Op::Gt, "gt"},       {Op::Ge, "ge"},
    {Op::And, "and"},       {Op::Or, "or"},       {Op::Not, "not"},     {Op::Coalesce, "coalesce"},
    {Op::Sqrt, "sqrt"},     {Op::Round, "round"}, {Op::Abs, "abs"},     {Op::Identity, "identity"},
};

bool both_int(const Value& a, const Value& b) {
  return !a.is_float() && !b.is_float();
}

void require_numeric(const Value& v, Op op) {
  if (!v.is_numeric()) throw ValueError(std::string("bad operand for ") + op_name(op));
}

int64_t checked(bool overflow, int64_t r) {
  if (overflow) throw ValueError("integer overflow");
  return r;
}

Value binary_arith(Op op, const Value& a, const Value& b) {
  require_numeric(a, op);
  require_numeric(b, op);
  if (both_int(a, b)) {
    int64_t x = a.as_int(), y = b.as_int(), r = 0;
    switch (op) {
      case Op::Add: {
        bool overflow = __builtin_add_overflow(x, y, &r);
        return checked(overflow, r);
      }
      case Op::Sub: {
        bool overflow = __builtin_sub_overflow(x, y, &r);
        return checked(overflow, r);
      }
      case Op::Mul: {
        bool overflow = __builtin_mul_overflow(x, y, &r);
        return checked(overflow, r);
      }
      case Op::Min: return x < y ? x : y;
      case Op::Max: return x > y ? x : y;
      case Op::Mod: {
        if (y == 0) throw ValueError("integer modulo by zero");
        int64_t m = x % y;
        if (m != 0 && ((m < 0) != (y < 0))) m += y;
        return m;
      }
      case Op::IDiv: {
        if (y == 0) throw ValueError("integer division by zero");
        int64_t q = x / y;
        if ((x % y != 0) && ((x < 0) != (y < 0))) --q;
        return q;
      }
      case Op::Pow: {
        if (y < 0) return std::pow(static_cast<double>(x), static_cast<double>(y));
        int64_t acc = 1, base = x;
        for (int64_t e = y; e > 0; e >>= 1) {
          if (e & 1) {
            bool overflow = __builtin_mul_overflow(acc, base, &r);
            acc = checked(overflow, r);
          }
          if (e > 1) {
            bool overflow = __builtin_mul_overflow(base, base, &r);
            base = checked(overflow, r);
          }
        }
        return acc;
      }
      case Op::Div: return static_cast<double>(x) / static_cast<double>(y);
      default: break;
    }
  }
  double x = a.as_double(), y = b.as_double();
  switch (op) {
    case Op::Add: return x + y;
    case Op::Sub: return x - y;
    case Op::Mul: return x * y;
    case Op::Div: return x / y;
    case Op::Min: return std::fmin(x, y);
    case Op::Max: return std::fmax(x, y);
    case Op::Pow: return std::pow(x, y);
    case Op::Mod: return x - y * std::floor(x / y);
    case Op::IDiv: return std::floor(x / y);
    default: break;
  }
  throw ValueError(std::string("not an arithmetic op: ") + op_name(op));
}

Value compare(Op op, const Value& a, const Value& b) {
  require_numeric(a, op);
  require_numeric(b, op);
  if (both_int(a, b)) {
    int64_t x = a.as_int(), y = b.as_int();
    switch (op) {
      case Op::Eq: return x == y;
      case Op::Ne: return x != y;
      case Op::Lt: return x < y;
      case Op::Le: return x <= y;
      case Op::Gt: return x > y;
      case Op::Ge: return x >= y;
      default: break;
    }
  }
  double x = a.as_double(), y = b.as_double();
  switch (op) {
    case Op::Eq: return x == y;
    case Op::Ne: return x != y;
    case Op::Lt: return x < y;
    case Op::Le: return x <= y;
    case Op::Gt: return x > y;
    case Op::Ge: return x >= y;
    default: break;
  }
  throw ValueError("not a comparison");
}

void require_arity(Op op, std::span<const Value> args, size_t lo, size_t hi) {
  if (args.size() < lo || args.size() > hi)
    throw ValueError(std::string("wrong number of arguments to ") + op_name(op));
}

}  // namespace

const char* op_name(Op op) {
  for (const auto& info : kOps)
    if (info.op == op) return info.name;
  return "?";
}

std::optional<Op> op_from_name(const std::string& name) {
  for (const auto& info : kOps)
    if (name == info.name) return info.op;
  return std::nullopt;
}

const char* update_op_token(UpdateOp op) {
  switch (op) {
    case UpdateOp::Overwrite: return "=";
    case UpdateOp::Add: return "+=";
    case UpdateOp::Mul: return "*=";
    case UpdateOp::Min: return "<<min>>=";
    case UpdateOp::Max: return "<<max>>=";
    case UpdateOp::Or: return "<<or>>=";
  }
  return "?";
}

bool is_comparison(Op op) {
  return op == Op::Eq || op == Op::Ne || op == Op::Lt || op == Op::Le || op == Op::Gt ||
         op == Op::Ge;
}

Value apply_op(Op op, std::span<const Value> args) {
  if (op == Op::Coalesce) {
    for (const auto& a : args)
      if (!a.is_missing()) return a;
    return kMissing;
  }
  for (const auto& a : args)
    if (a.is_missing()) return kMissing;

  switch (op) {
    case Op::Identity:
      require_arity(op, args, 1, 1);
      return args[0];
    case Op::Add:
    case Op::Mul:
    case Op::Min:
    case Op::Max: {
      require_arity(op, args, 1, std::numeric_limits<size_t>::max());
      if (args.size() == 1) {
        require_numeric(args[0], op);
        return args[0].is_bool() ? Value(args[0].as_int()) : args[0];
      }
      Value acc = binary_arith(op, args[0], args[1]);
      for (size_t k = 2; k < args.size(); ++k) acc = binary_arith(op, acc, args[k]);
      return acc;
    }
    case Op::Sub:
    case Op::Div:
    case Op::Pow:
    case Op::Mod:
    case Op::IDiv:
      require_arity(op, args, 2, 2);
      return binary_arith(op, args[0], args[1]);
    case Op::Neg: {
      require_arity(op, args, 1, 1);
      require_numeric(args[0], op);
      if (args[0].is_float()) return -args[0].as_double();
      int64_t r = 0;
      bool overflow = __builtin_sub_overflow(int64_t{0}, args[0].as_int(), &r);
      return checked(overflow, r);
    }
    case Op::Eq:
    case Op::Ne:
    case Op::Lt:
    case Op::Le:
    case Op::Gt:
    case Op::Ge:
      require_arity(op, args, 2, 2);
      return compare(op, args[0], args[1]);
    case Op::And: {
      bool r = true;
      for (const auto& a : args) r = a.as_bool() && r;
      return r;
    }
    case Op::Or: {
      bool r = false;
      for (const auto& a : args) r = a.as_bool() || r;
      return r;
    }
    case Op::Not:
      require_arity(op, args, 1, 1);
      return !args[0].as_bool();
    case Op::Sqrt:
      require_arity(op, args, 1, 1);
      require_numeric(args[0], op);
      return std::sqrt(args[0].as_double());
    case Op::Round:
      require_arity(op, args, 1, 1);
      require_numeric(args[0], op);
      return std::nearbyint(args[0].as_double());
    case Op::Abs:
      require_arity(op, args, 1, 1);
      require_numeric(args[0], op);
      if (args[0].is_float()) return std::abs(args[0].as_double());
      return args[0].as_int() < 0 ? apply_op(Op::Neg, args) : Value(args[0].as_int());
    case Op::Coalesce:
      break;
  }
  throw ValueError("unknown op");
}

Value apply_update(UpdateOp op, const Value& old, const Value& v) {
  switch (op) {
    case UpdateOp::Overwrite: return v;
    case UpdateOp::Add: {
      Value a[] = {old, v};
      return apply_op(Op::Add, a);
    }
    case UpdateOp::Mul: {
      Value a[] = {old, v};
      return apply_op(Op::Mul, a);
    }
    case UpdateOp::Min: {
      Value a[] = {old, v};
      return apply_op(Op::Min, a);
    }
    case UpdateOp::Max: {
      Value a[] = {old, v};
      return apply_op(Op::Max, a);
    }
    case UpdateOp::Or: {
      Value a[] = {old, v};
      return apply_op(Op::Or, a);
    }
  }
  return v;
}

Value coerce_to(ElemType t, const Value& v) {
  if (v.is_missing()) throw ValueError("missing value reached a tensor store");
  switch (t) {
    case ElemType::Float: return v.as_double();
    case ElemType::Int:
      if (v.is_float()) return v.as_int();
      return v.as_int();
    case ElemType::Bool:
      if (!v.is_bool()) throw ValueError("number " + to_string(v) + " stored into boolean tensor");
      return v;
  }
  return v;
}

Value zero_of(ElemType t) {
  switch (t) {
    case ElemType::Int: return int64_t{0};
    case ElemType::Float: return 0.0;
    case ElemType::Bool: return false;
  }
  return 0.0;
}

const char* elem_type_name(ElemType t) {
  switch (t) {
    case ElemType::Int: return "int";
    case ElemType::Float: return "float";
    case ElemType::Bool: return "bool";
  }
  return "?";
}

std::optional<ElemType> elem_type_from_name(const std::string& s) {
  if (s == "int") return ElemType::Int;
  if (s == "float") return ElemType::Float;
  if (s == "bool") return ElemType::Bool;
  return std::nullopt;
}

std::string to_string(const Value& v) {
  if (v.is_missing()) return "missing";
  if (v.is_bool()) return v.as_bool() ? "true" : "false";
  if (v.is_int()) return std::to_string(v.as_int());
  double d = v.as_double();
  if (std::isnan(d)) return "NaN";
  if (std::isinf(d)) return d > 0 ? "Inf" : "-Inf";
  char buf[64];
  if (d == std::floor(d) && std::fabs(d) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.1f", d);
    return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", d);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char tmp[64];
    std::snprintf(tmp, sizeof tmp, "%.*g", prec, d);
    if (std::strtod(tmp, nullptr) == d) {
      std::snprintf(buf, sizeof buf, "%s", tmp);
      break;
    }
  }
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::optional<Value> parse_value(const std::string& s) {
  if (s == "true") return Value(true);
  if (s == "false") return Value(false);
  if (s == "missing") return kMissing;
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  bool looks_float = s.find_first_of(".eE") != std::string::npos || s == "NaN" || s == "Inf" ||
                     s == "-Inf";
  if (!looks_float) {
    long long i = std::strtoll(s.c_str(), &end, 10);
    if (end && *end == '\0') return Value(static_cast<int64_t>(i));
  }
  double d = std::strtod(s.c_str(), &end);
  if (end && *end == '\0') return Value(d);
  return std::nullopt;
}

double relative_error(const Value& a, const Value& b) {
  if (a.is_missing() || b.is_missing()) return a.is_missing() && b.is_missing() ? 0.0 : INFINITY;
  double x = a.as_double(), y = b.as_double();
  if (x == y || (std::isnan(x) && std::isnan(y))) return 0.0;
  double scale = std::max(std::abs(x), std::abs(y));
  return std::abs(x - y) / scale;
}

bool values_close(const Value& a, const Value& b, double rtol) {
  if (a.is_missing() || b.is_missing()) return a.is_missing() && b.is_missing();
  if (!a.is_float() && !b.is_float()) return a.as_int() == b.as_int();
  return relative_error(a, b) <= rtol;
}

}  // namespace coiter
