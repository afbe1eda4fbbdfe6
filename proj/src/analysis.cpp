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

#include "coiter/analysis.hpp"

#include <algorithm>

namespace coiter {

CinExprPtr transform(const CinExprPtr& e, const ExprFn& f) {
  if (!e) return e;
  bool changed = false;
  std::vector<CinExprPtr> args;
  args.reserve(e->args.size());
  for (const auto& a : e->args) {
    args.push_back(transform(a, f));
    changed |= args.back() != a;
  }
  std::vector<IndexSlot> slots = e->slots;
  for (auto& s : slots) {
    auto idx = transform(s.index, f);
    changed |= idx != s.index;
    s.index = idx;
    for (auto& m : s.mods) {
      for (auto& a : m.args) {
        auto b = transform(a, f);
        changed |= b != a;
        a = b;
      }
    }
  }
  if (!changed) return f(e);
  auto copy = std::make_shared<CinExpr>(*e);
  copy->args = std::move(args);
  copy->slots = std::move(slots);
  return f(copy);
}

CinStmtPtr transform_exprs(const CinStmtPtr& s, const ExprFn& f) {
  auto copy = std::make_shared<CinStmt>(*s);
  switch (s->kind) {
    case StmtKind::Assign:
      copy->lhs = transform(s->lhs, f);
      copy->rhs = transform(s->rhs, f);
      break;
    case StmtKind::Forall:
      copy->lo = transform(s->lo, f);
      copy->hi = transform(s->hi, f);
      copy->body = transform_exprs(s->body, f);
      break;
    case StmtKind::Where:
      copy->consumer = transform_exprs(s->consumer, f);
      copy->producer = transform_exprs(s->producer, f);
      break;
    case StmtKind::Multi:
      for (auto& p : copy->parts) p = transform_exprs(p, f);
      break;
    case StmtKind::Sieve:
      copy->cond = transform(s->cond, f);
      copy->body = transform_exprs(s->body, f);
      break;
    case StmtKind::Pass: break;
  }
  return copy;
}

bool mentions_index(const CinExprPtr& e, const std::string& index) {
  if (!e) return false;
  switch (e->kind) {
    case ExprKind::Index: return e->name == index;
    case ExprKind::Escape: return mentions_var(e->escape, index);
    case ExprKind::Virtual: return e->virt->mentions(index);
    default: break;
  }
  for (const auto& a : e->args)
    if (mentions_index(a, index)) return true;
  for (const auto& s : e->slots) {
    if (mentions_index(s.index, index)) return true;
    for (const auto& m : s.mods)
      for (const auto& a : m.args)
        if (mentions_index(a, index)) return true;
  }
  return false;
}

bool mentions_index(const CinStmtPtr& s, const std::string& index) {
  if (!s) return false;
  switch (s->kind) {
    case StmtKind::Assign: return mentions_index(s->lhs, index) || mentions_index(s->rhs, index);
    case StmtKind::Forall:
      return mentions_index(s->lo, index) || mentions_index(s->hi, index) ||
             (s->index != index && mentions_index(s->body, index));
    case StmtKind::Where:
      return mentions_index(s->consumer, index) || mentions_index(s->producer, index);
    case StmtKind::Multi:
      return std::any_of(s->parts.begin(), s->parts.end(),
                         [&](const CinStmtPtr& p) { return mentions_index(p, index); });
    case StmtKind::Sieve: return mentions_index(s->cond, index) || mentions_index(s->body, index);
    case StmtKind::Pass: return false;
  }
  return false;
}

namespace {

void expr_tensors(const CinExprPtr& e, std::set<std::string>& out) {
  if (!e) return;
  if (e->kind == ExprKind::Access || e->kind == ExprKind::Size) out.insert(e->name);
  for (const auto& a : e->args) expr_tensors(a, out);
  for (const auto& s : e->slots) {
    expr_tensors(s.index, out);
    for (const auto& m : s.mods)
      for (const auto& a : m.args) expr_tensors(a, out);
  }
}

template <typename Fn>
void visit_stmts(const CinStmtPtr& s, const Fn& fn) {
  fn(s);
  switch (s->kind) {
    case StmtKind::Forall:
    case StmtKind::Sieve: visit_stmts(s->body, fn); break;
    case StmtKind::Where:
      visit_stmts(s->consumer, fn);
      visit_stmts(s->producer, fn);
      break;
    case StmtKind::Multi:
      for (const auto& p : s->parts) visit_stmts(p, fn);
      break;
    default: break;
  }
}

}  // namespace

std::set<std::string> tensors_read(const CinStmtPtr& s) {
  std::set<std::string> out;
  visit_stmts(s, [&](const CinStmtPtr& n) {
    expr_tensors(n->rhs, out);
    expr_tensors(n->cond, out);
    expr_tensors(n->lo, out);
    expr_tensors(n->hi, out);
    if (n->lhs)
      for (const auto& slot : n->lhs->slots) expr_tensors(slot.index, out);
  });
  return out;
}

std::set<std::string> tensors_written(const CinStmtPtr& s) {
  std::set<std::string> out;
  visit_stmts(s, [&](const CinStmtPtr& n) {
    if (n->kind == StmtKind::Assign) out.insert(n->lhs->name);
  });
  return out;
}

std::set<std::string> tensors_passed(const CinStmtPtr& s) {
  std::set<std::string> out;
  visit_stmts(s, [&](const CinStmtPtr& n) {
    if (n->kind == StmtKind::Pass) out.insert(n->tensors.begin(), n->tensors.end());
  });
  return out;
}

std::set<std::string> tensors_named(const CinStmtPtr& s) {
  auto out = tensors_read(s);
  for (const auto& t : tensors_written(s)) out.insert(t);
  visit_stmts(s, [&](const CinStmtPtr& n) {
    for (const auto& t : n->tensors) out.insert(t);
  });
  return out;
}

CinStmtPtr bind_sizes(const CinStmtPtr& s, const TensorMetas& metas) {
  return transform_exprs(s, [&](const CinExprPtr& e) -> CinExprPtr {
    if (e->kind != ExprKind::Size) return e;
    auto it = metas.find(e->name);
    if (it == metas.end()) throw CompileError("size of unbound tensor " + e->name);
    if (e->dim < 1 || static_cast<size_t>(e->dim) > it->second.rank())
      throw CompileError("size(" + e->name + ", " + std::to_string(e->dim) + ") out of range");
    return cin::lit(it->second.dims[static_cast<size_t>(e->dim - 1)]);
  });
}

void check_bindings(const CinStmtPtr& s, const TensorMetas& metas) {
  auto written = tensors_written(s);
  for (const auto& t : tensors_read(s)) {
    if (!metas.count(t) && !written.count(t)) throw CompileError("unbound tensor " + t);
  }
  visit_stmts(s, [&](const CinStmtPtr& n) {
    auto check = [&](const CinExprPtr& root) {
      transform(root, [&](const CinExprPtr& e) {
        if (e->kind != ExprKind::Access) return e;
        auto it = metas.find(e->name);
        if (it != metas.end() && it->second.rank() != e->slots.size())
          throw CompileError("tensor " + e->name + " has rank " +
                             std::to_string(it->second.rank()) + " but is accessed with " +
                             std::to_string(e->slots.size()) + " indices");
        return e;
      });
    };
    check(n->lhs);
    check(n->rhs);
    check(n->cond);
  });
}

std::optional<Value> const_value_of(const CinExprPtr& e, const Params& params) {
  if (!e) return std::nullopt;
  switch (e->kind) {
    case ExprKind::Literal: return e->value;
    case ExprKind::Param: {
      auto it = params.find(e->name);
      if (it == params.end()) return std::nullopt;
      return it->second;
    }
    case ExprKind::Escape: return const_value(e->escape);
    case ExprKind::Call: {
      if (!e->name.empty()) return std::nullopt;
      std::vector<Value> vals;
      for (const auto& a : e->args) {
        auto v = const_value_of(a, params);
        if (!v) return std::nullopt;
        vals.push_back(*v);
      }
      try {
        return apply_op(e->op, vals);
      } catch (const ValueError&) {
        return std::nullopt;
      }
    }
    default: return std::nullopt;
  }
}

std::optional<int64_t> const_int_of(const CinExprPtr& e, const Params& params) {
  auto v = const_value_of(e, params);
  if (!v || !v->is_int()) return std::nullopt;
  return v->as_int();
}

namespace {

struct Bound {
  CinExprPtr lo, hi;
  std::string origin;
};

// Extent constraints that accesses in `s` place on `index`.
void collect_bounds(const CinStmtPtr& s, const std::string& index, const TensorMetas& metas,
                    std::vector<Bound>& out) {
  auto scan = [&](const CinExprPtr& root) {
    if (!root) return;
    transform(root, [&](const CinExprPtr& e) {
      if (e->kind != ExprKind::Access) return e;
      auto it = metas.find(e->name);
      if (it == metas.end()) return e;
      for (size_t k = 0; k < e->slots.size(); ++k) {
        const auto& slot = e->slots[k];
        if (slot.index->kind != ExprKind::Index || slot.index->name != index) continue;
        std::string origin = e->name + " mode " + std::to_string(k + 1);
        if (slot.mods.empty()) {
          out.push_back({cin::lit(1), cin::lit(it->second.dims.at(k)), origin});
          continue;
        }
        // Only the modifier nearest the index decides its range.
        const Modifier& m = slot.mods.back();
        if (m.kind == ModKind::Window) {
          auto n = cin::call(Op::Add, {cin::call(Op::Sub, {m.args[1], m.args[0]}), cin::lit(1)});
          out.push_back({cin::lit(1), n, origin});
        }
      }
      return e;
    });
  };
  visit_stmts(s, [&](const CinStmtPtr& n) {
    scan(n->lhs);
    scan(n->rhs);
    scan(n->cond);
  });
}

CinStmtPtr infer_stmt(const CinStmtPtr& s, const TensorMetas& metas, const Params& params) {
  auto copy = std::make_shared<CinStmt>(*s);
  switch (s->kind) {
    case StmtKind::Forall: {
      copy->body = infer_stmt(s->body, metas, params);
      if (s->lo) return copy;
      std::vector<Bound> bounds;
      collect_bounds(s->body, s->index, metas, bounds);
      if (bounds.empty())
        throw CompileError("cannot infer the extent of index " + s->index +
                           "; give it explicitly with `in lo:hi`");
      const Bound& first = bounds.front();
      auto flo = const_int_of(first.lo, params), fhi = const_int_of(first.hi, params);
      for (const auto& b : bounds) {
        auto lo = const_int_of(b.lo, params), hi = const_int_of(b.hi, params);
        bool agree = (flo && fhi && lo && hi) ? (*flo == *lo && *fhi == *hi)
                                              : same_expr(first.lo, b.lo) && same_expr(first.hi, b.hi);
        if (!agree)
          throw CompileError("extent of index " + s->index + " differs between " + first.origin +
                             " (" + print(first.lo) + ":" + print(first.hi) + ") and " + b.origin +
                             " (" + print(b.lo) + ":" + print(b.hi) + ")");
      }
      copy->lo = flo ? cin::lit(*flo) : first.lo;
      copy->hi = fhi ? cin::lit(*fhi) : first.hi;
      copy->nonempty = flo && fhi && *flo <= *fhi;
      return copy;
    }
    case StmtKind::Sieve: copy->body = infer_stmt(s->body, metas, params); return copy;
    case StmtKind::Where:
      copy->consumer = infer_stmt(s->consumer, metas, params);
      copy->producer = infer_stmt(s->producer, metas, params);
      return copy;
    case StmtKind::Multi:
      for (auto& p : copy->parts) p = infer_stmt(p, metas, params);
      return copy;
    default: return copy;
  }
}

void mark_nonempty(CinStmt& s, const Params& params) {
  if (s.kind != StmtKind::Forall || !s.lo) return;
  auto lo = const_int_of(s.lo, params), hi = const_int_of(s.hi, params);
  s.nonempty = lo && hi && *lo <= *hi;
}

CinStmtPtr mark_all(const CinStmtPtr& s, const Params& params) {
  auto copy = std::make_shared<CinStmt>(*s);
  mark_nonempty(*copy, params);
  if (s->body) copy->body = mark_all(s->body, params);
  if (s->consumer) copy->consumer = mark_all(s->consumer, params);
  if (s->producer) copy->producer = mark_all(s->producer, params);
  for (auto& p : copy->parts) p = mark_all(p, params);
  return copy;
}

}  // namespace

CinStmtPtr infer_extents(const CinStmtPtr& s, const TensorMetas& metas, const Params& params) {
  return mark_all(infer_stmt(s, metas, params), params);
}

TensorMetas declare_outputs(const CinStmtPtr& s, const TensorMetas& metas, const Params& params) {
  TensorMetas out;
  std::map<std::string, int64_t> extent;
  std::function<void(const CinStmtPtr&)> walk = [&](const CinStmtPtr& n) {
    switch (n->kind) {
      case StmtKind::Forall: {
        auto hi = const_int_of(n->hi, params);
        auto lo = const_int_of(n->lo, params);
        if (hi && lo && *lo == 1) extent[n->index] = *hi;
        walk(n->body);
        extent.erase(n->index);
        return;
      }
      case StmtKind::Sieve: walk(n->body); return;
      case StmtKind::Where: walk(n->consumer); walk(n->producer); return;
      case StmtKind::Multi:
        for (const auto& p : n->parts) walk(p);
        return;
      case StmtKind::Pass: return;
      case StmtKind::Assign: break;
    }
    const auto& name = n->lhs->name;
    if (metas.count(name)) return;
    std::vector<int64_t> dims;
    for (const auto& slot : n->lhs->slots) {
      if (slot.index->kind != ExprKind::Index || !extent.count(slot.index->name))
        throw CompileError("cannot infer the shape of output " + name +
                           "; bind it with --tensor " + name + "=zeros:dims=...");
      dims.push_back(extent[slot.index->name]);
    }
    auto it = out.find(name);
    if (it != out.end()) {
      if (it->second.dims != dims)
        throw CompileError("output " + name + " is written with two different shapes");
      return;
    }
    TensorMeta m;
    m.name = name;
    m.dims = dims;
    m.format.assign(dims.size(), LevelKind::Dense);
    m.format.push_back(LevelKind::Element);
    m.fill = 0.0;
    m.type = ElemType::Float;
    out[name] = m;
  };
  walk(s);
  return out;
}

CinStmtPtr normalize_scatter(const CinStmtPtr& s, const TensorMetas& metas,
                             const std::function<std::string(const std::string&)>& fresh) {
  switch (s->kind) {
    case StmtKind::Assign: break;
    case StmtKind::Pass: return s;
    default: {
      auto copy = std::make_shared<CinStmt>(*s);
      if (s->body) copy->body = normalize_scatter(s->body, metas, fresh);
      if (s->consumer) copy->consumer = normalize_scatter(s->consumer, metas, fresh);
      if (s->producer) copy->producer = normalize_scatter(s->producer, metas, fresh);
      for (auto& p : copy->parts) p = normalize_scatter(p, metas, fresh);
      return copy;
    }
  }
  auto lm = metas.find(s->lhs->name);
  if (lm != metas.end()) {
    bool append_only = std::any_of(lm->second.format.begin(), lm->second.format.end(),
                                   [](LevelKind k) {
                                     return k != LevelKind::Dense && k != LevelKind::Element;
                                   });
    for (const auto& slot : s->lhs->slots)
      if (append_only && slot.index->kind != ExprKind::Index)
        throw CompileError("opaque write position " + print(slot.index) +
                           " on append-only output " + s->lhs->name);
  }
  struct Opaque {
    std::string index;
    CinExprPtr expr;
    int64_t size;
  };
  std::vector<Opaque> found;
  // Pre-order over the right-hand side so outer and leftmost uses come first.
  std::function<CinExprPtr(const CinExprPtr&)> rewrite = [&](const CinExprPtr& e) -> CinExprPtr {
    if (!e) return e;
    if (e->kind == ExprKind::Call) {
      auto copy = std::make_shared<CinExpr>(*e);
      for (auto& a : copy->args) a = rewrite(a);
      return copy;
    }
    if (e->kind != ExprKind::Access) return e;
    auto copy = std::make_shared<CinExpr>(*e);
    auto it = metas.find(e->name);
    for (size_t k = 0; k < copy->slots.size(); ++k) {
      auto& slot = copy->slots[k];
      if (slot.index->kind == ExprKind::Index) continue;
      if (!slot.mods.empty())
        throw CompileError("opaque index " + print(slot.index) + " cannot carry modifiers");
      if (it == metas.end()) throw CompileError("unbound tensor " + e->name);
      std::string j = fresh("j");
      found.push_back({j, slot.index, it->second.dims.at(k)});
      slot.index = cin::index(j);
    }
    return copy;
  };
  auto rhs = rewrite(s->rhs);
  if (found.empty()) return s;
  CinStmtPtr body = cin::assign(s->lhs, s->op, rhs);
  for (auto it = found.rbegin(); it != found.rend(); ++it) {
    body = cin::sieve(cin::call(Op::Eq, {cin::index(it->index), it->expr}), body);
    body = cin::forall(it->index, body, cin::lit(1), cin::lit(it->size), it->size >= 1);
  }
  return body;
}

namespace {

void scopes_of(const CinStmtPtr& s, std::map<std::string, const CinStmt*>& out,
               std::set<std::string>& claimed) {
  switch (s->kind) {
    case StmtKind::Forall:
    case StmtKind::Sieve: scopes_of(s->body, out, claimed); return;
    case StmtKind::Where: {
      auto produced = tensors_written(s->producer);
      for (const auto& t : tensors_passed(s->producer)) produced.insert(t);
      auto consumed = tensors_read(s->consumer);
      std::vector<std::string> mine;
      for (const auto& t : produced)
        if (consumed.count(t) && !claimed.count(t)) mine.push_back(t);
      for (const auto& t : mine) {
        out[t] = s.get();
        claimed.insert(t);
      }
      scopes_of(s->consumer, out, claimed);
      scopes_of(s->producer, out, claimed);
      return;
    }
    case StmtKind::Multi: {
      std::map<std::string, size_t> writer;
      for (size_t k = 0; k < s->parts.size(); ++k) {
        for (const auto& t : results(s->parts[k])) {
          auto [it, fresh] = writer.emplace(t, k);
          if (!fresh && it->second != k && !claimed.count(t))
            throw CompileError("tensor " + t + " is written by two parts of a multi statement");
        }
      }
      for (const auto& p : s->parts) scopes_of(p, out, claimed);
      return;
    }
    default: return;
  }
}

}  // namespace

std::map<std::string, const CinStmt*> result_scopes(const CinStmtPtr& s) {
  std::map<std::string, const CinStmt*> out;
  std::set<std::string> claimed;
  scopes_of(s, out, claimed);
  // Pass statements name tensors without writing them; they keep their scope.
  auto written = tensors_written(s);
  for (const auto& t : tensors_passed(s)) written.insert(t);
  for (const auto& t : written)
    if (!out.count(t)) out[t] = nullptr;
  return out;
}

bool may_be_missing(const CinExprPtr& e, const TensorMetas* metas) {
  if (!e) return false;
  switch (e->kind) {
    case ExprKind::Literal: return e->value.is_missing();
    case ExprKind::Index:
    case ExprKind::Param:
    case ExprKind::Size: return false;
    case ExprKind::Escape: return false;
    case ExprKind::Virtual: return e->virt->may_be_missing();
    case ExprKind::Access: {
      for (const auto& s : e->slots)
        for (const auto& m : s.mods)
          if (m.kind == ModKind::Permit) return true;
      if (!metas) return false;
      auto it = metas->find(e->name);
      return it != metas->end() && it->second.fill.is_missing();
    }
    case ExprKind::Call:
      if (e->op == Op::Coalesce)
        return std::all_of(e->args.begin(), e->args.end(),
                           [&](const CinExprPtr& a) { return may_be_missing(a, metas); });
      return std::any_of(e->args.begin(), e->args.end(),
                         [&](const CinExprPtr& a) { return may_be_missing(a, metas); });
  }
  return true;
}

}  // namespace coiter
