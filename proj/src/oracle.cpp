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

#include "coiter/oracle.hpp"

#include <limits>

#include "coiter/interpreter.hpp"

namespace coiter {
namespace {

constexpr int64_t kInf = std::numeric_limits<int64_t>::max() / 4;

struct Range {
  int64_t lo, hi;
};

class Oracle {
 public:
  Oracle(const TensorMetas& metas, const Params& params, DenseArrays& arrays,
         std::map<std::string, const CinStmt*> scopes)
      : metas_(metas), params_(params), arrays_(arrays), scopes_(std::move(scopes)) {}

  void run(const CinStmtPtr& s) {
    switch (s->kind) {
      case StmtKind::Pass:
        return;
      case StmtKind::Assign:
        return assign(s);
      case StmtKind::Multi:
        for (const auto& p : s->parts) run(p);
        return;
      case StmtKind::Sieve: {
        Value c = eval(s->cond);
        if (!c.is_bool()) throw OracleError("sieve condition " + print(s->cond) + " is not boolean");
        if (c.as_bool()) run(s->body);
        return;
      }
      case StmtKind::Where:
        for (const auto& [name, where] : scopes_)
          if (where == s.get()) reset(name);
        run(s->producer);
        run(s->consumer);
        return;
      case StmtKind::Forall: {
        int64_t lo = as_index(eval(s->lo)), hi = as_index(eval(s->hi));
        auto saved = env_.find(s->index) != env_.end() ? std::optional(env_[s->index]) : std::nullopt;
        for (int64_t i = lo; i <= hi; ++i) {
          env_[s->index] = i;
          run(s->body);
        }
        if (saved) env_[s->index] = *saved;
        else env_.erase(s->index);
        return;
      }
    }
  }

  void reset(const std::string& name) {
    const TensorMeta& m = metas_.at(name);
    arrays_[name] = DenseArray{m.dims, std::vector<Value>(product(m.dims), m.fill)};
  }

 private:
  const TensorMetas& metas_;
  const Params& params_;
  DenseArrays& arrays_;
  std::map<std::string, const CinStmt*> scopes_;
  std::map<std::string, int64_t> env_;

  static int64_t as_index(const Value& v) {
    if (!v.is_int()) throw OracleError("index value " + to_string(v) + " is not an integer");
    return v.as_int();
  }

  DenseArray& array(const std::string& name) {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw OracleError("no data for tensor " + name);
    return it->second;
  }

  // Tensor coordinate for one slot, or nullopt where a permit yields missing.
  std::optional<int64_t> coordinate(const IndexSlot& sl, int64_t n) {
    std::vector<Range> inner;  // range seen by each modifier, innermost first
    Range r{1, n};
    std::vector<std::pair<int64_t, int64_t>> args;
    for (const auto& m : sl.mods) {
      inner.push_back(r);
      int64_t a = m.args.empty() ? 0 : as_index(eval(m.args[0]));
      int64_t b = m.args.size() > 1 ? as_index(eval(m.args[1])) : 0;
      args.emplace_back(a, b);
      switch (m.kind) {
        case ModKind::Permit:
          r = {-kInf, kInf};
          break;
        case ModKind::Offset:
          r = {r.lo + a, r.hi + a};
          break;
        case ModKind::Window:
          if (a < r.lo || b > r.hi)
            throw OracleError("window " + std::to_string(a) + ":" + std::to_string(b) +
                              " leaves the valid range");
          r = {1, b - a + 1};
          break;
      }
    }
    int64_t c = as_index(eval(sl.index));
    for (size_t k = sl.mods.size(); k-- > 0;) {
      switch (sl.mods[k].kind) {
        case ModKind::Offset:
          c -= args[k].first;
          break;
        case ModKind::Window:
          c += args[k].first - 1;
          break;
        case ModKind::Permit:
          if (c < inner[k].lo || c > inner[k].hi) return std::nullopt;
          break;
      }
    }
    return c;
  }

  // Row-major offset, or nullopt for a permitted out-of-range read.
  std::optional<size_t> offset(const std::string& name, const std::vector<IndexSlot>& slots,
                               const std::vector<int64_t>& dims) {
    if (slots.size() != dims.size())
      throw OracleError("access to " + name + " has the wrong number of indices");
    size_t off = 0;
    for (size_t d = 0; d < slots.size(); ++d) {
      auto c = coordinate(slots[d], dims[d]);
      if (!c) return std::nullopt;
      if (*c < 1 || *c > dims[d])
        throw OracleError("index " + std::to_string(*c) + " out of bounds for mode " +
                          std::to_string(d + 1) + " of " + name);
      off = off * static_cast<size_t>(dims[d]) + static_cast<size_t>(*c - 1);
    }
    return off;
  }

  void assign(const CinStmtPtr& s) {
    Value v = eval(s->rhs);
    if (v.is_missing()) return;
    DenseArray& a = array(s->lhs->name);
    auto off = offset(s->lhs->name, s->lhs->slots, a.dims);
    if (!off) return;
    a.data[*off] = apply_update(s->op, a.data[*off], v);
  }

  Value eval(const CinExprPtr& e) {
    switch (e->kind) {
      case ExprKind::Literal:
        return e->value;
      case ExprKind::Index: {
        auto it = env_.find(e->name);
        if (it == env_.end()) throw OracleError("unbound index " + e->name);
        return Value(it->second);
      }
      case ExprKind::Param: {
        auto it = params_.find(e->name);
        if (it == params_.end()) throw OracleError("no value for parameter $" + e->name);
        return it->second;
      }
      case ExprKind::Call: {
        if (!e->name.empty()) throw OracleError("unknown function " + e->name);
        std::vector<Value> args;
        for (const auto& a : e->args) args.push_back(eval(a));
        return apply_op(e->op, args);
      }
      case ExprKind::Access: {
        DenseArray& a = array(e->name);
        auto off = offset(e->name, e->slots, a.dims);
        if (!off) return kMissing;
        return a.data[*off];
      }
      case ExprKind::Size: {
        const TensorMeta& m = metas_.at(e->name);
        return Value(m.dims.at(static_cast<size_t>(e->dim - 1)));
      }
      case ExprKind::Escape: {
        // Closed scalar code, e.g. a trip count from the loop-invariant add rule.
        Buffers none;
        Interpreter in(none);
        for (const auto& [name, v] : env_) in.set(name, Value(v));
        for (const auto& [name, v] : params_) in.set("$" + name, v);
        try {
          return in.eval(e->escape);
        } catch (const ExecError& err) {
          throw OracleError(std::string("cannot evaluate ") + print(e) + ": " + err.what());
        }
      }
      case ExprKind::Virtual:
        throw OracleError("oracle cannot evaluate lowered term " + print(e));
    }
    return kMissing;
  }
};

}  // namespace

DenseArrays oracle_eval(const CinStmtPtr& bound, const TensorMetas& metas,
                        const DenseArrays& inputs, const Params& params) {
  DenseArrays arrays = inputs;
  auto scopes = result_scopes(bound);
  Oracle o(metas, params, arrays, scopes);
  for (const auto& [name, where] : scopes) {
    (void)where;
    o.reset(name);
  }
  o.run(bound);
  DenseArrays out;
  for (const auto& [name, where] : scopes) {
    if (where) continue;  // temporaries are not observable
    DenseArray a = arrays.at(name);
    ElemType t = metas.at(name).type;
    for (auto& v : a.data)
      if (!v.is_missing()) v = coerce_to(t, v);
    out[name] = std::move(a);
  }
  return out;
}

}  // namespace coiter
