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

#include "coiter/rewrite.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace coiter {

namespace {

bool is_lit(const CinExprPtr& e) { return e->kind == ExprKind::Literal; }

bool is_missing_lit(const CinExprPtr& e) { return is_lit(e) && e->value.is_missing(); }

bool is_zero(const CinExprPtr& e) {
  if (!is_lit(e)) return false;
  const Value& v = e->value;
  return (v.is_int() && v.as_int() == 0) || (v.is_bool() && !v.as_bool()) ||
         (v.is_float() && v.as_double() == 0.0);
}

bool is_one(const CinExprPtr& e) {
  if (!is_lit(e)) return false;
  const Value& v = e->value;
  return (v.is_int() && v.as_int() == 1) || (v.is_bool() && v.as_bool()) ||
         (v.is_float() && v.as_double() == 1.0);
}

bool is_bool_lit(const CinExprPtr& e, bool b) {
  return is_lit(e) && e->value.is_bool() && e->value.as_bool() == b;
}

bool is_call(const CinExprPtr& e, Op op) { return e->kind == ExprKind::Call && e->op == op; }

CinExprPtr with_args(const CinExprPtr& e, std::vector<CinExprPtr> args) {
  auto copy = std::make_shared<CinExpr>(*e);
  copy->args = std::move(args);
  return copy;
}

// Splices a left-nested operand of the same associative op: op(op(a,b),c) is
// op(a,b,c). Only the first position, so float evaluation order is unchanged.
CinExprPtr flatten_left(const CinExprPtr& e) {
  if (e->args.empty() || !is_call(e->args[0], e->op)) return nullptr;
  std::vector<CinExprPtr> args = e->args[0]->args;
  args.insert(args.end(), e->args.begin() + 1, e->args.end());
  return with_args(e, std::move(args));
}

bool any_missing(const std::vector<CinExprPtr>& args, size_t skip, const RewriteContext& ctx) {
  for (size_t k = 0; k < args.size(); ++k)
    if (k != skip && ctx.may_be_missing(args[k])) return true;
  return false;
}

// Expression rules ----------------------------------------------------------------

CinExprPtr rule_fold(const CinExprPtr& e, const RewriteContext&) {
  if (e->kind != ExprKind::Call || !e->name.empty()) return nullptr;
  std::vector<Value> vals;
  for (const auto& a : e->args) {
    if (!is_lit(a)) return nullptr;
    vals.push_back(a->value);
  }
  try {
    return cin::lit(apply_op(e->op, vals));
  } catch (const ValueError&) {
    return nullptr;
  }
}

CinExprPtr rule_missing(const CinExprPtr& e, const RewriteContext&) {
  if (e->kind == ExprKind::Call && e->op != Op::Coalesce) {
    for (const auto& a : e->args)
      if (is_missing_lit(a)) return cin::lit(kMissing);
  }
  if (e->kind == ExprKind::Access) {
    for (const auto& s : e->slots)
      if (is_missing_lit(s.index)) return cin::lit(kMissing);
  }
  return nullptr;
}

CinExprPtr rule_coalesce(const CinExprPtr& e, const RewriteContext& ctx) {
  if (!is_call(e, Op::Coalesce)) return nullptr;
  std::vector<CinExprPtr> args;
  for (const auto& a : e->args)
    if (!is_missing_lit(a)) args.push_back(a);
  if (args.empty()) return cin::lit(kMissing);
  if (args.size() == 1) return args[0];
  if (!ctx.may_be_missing(args[0])) return args[0];
  if (args.size() != e->args.size()) return with_args(e, std::move(args));
  return nullptr;
}

// Integer literal operands of an n-ary add or mul, combined into one at the end.
CinExprPtr combine_int_literals(const CinExprPtr& e) {
  std::vector<CinExprPtr> rest;
  std::vector<Value> lits;
  for (const auto& a : e->args) {
    if (is_lit(a) && a->value.is_int()) lits.push_back(a->value);
    else rest.push_back(a);
  }
  if (lits.size() < 2) return nullptr;
  try {
    rest.push_back(cin::lit(apply_op(e->op, lits)));
  } catch (const ValueError&) {
    return nullptr;
  }
  return with_args(e, std::move(rest));
}

CinExprPtr rule_add(const CinExprPtr& e, const RewriteContext&) {
  if (!is_call(e, Op::Add)) return nullptr;
  if (auto f = flatten_left(e)) return f;
  if (auto c = combine_int_literals(e)) return c;
  std::vector<CinExprPtr> args;
  for (const auto& a : e->args)
    if (!is_zero(a)) args.push_back(a);
  if (args.empty()) return cin::lit(0);
  if (args.size() == 1 && !(is_lit(args[0]) && args[0]->value.is_bool())) return args[0];
  if (args.size() != e->args.size()) return with_args(e, std::move(args));
  return nullptr;
}

CinExprPtr rule_sub(const CinExprPtr& e, const RewriteContext&) {
  if (!is_call(e, Op::Sub) || e->args.size() != 2) return nullptr;
  return cin::call(Op::Add, {e->args[0], cin::call(Op::Neg, {e->args[1]})});
}

CinExprPtr rule_neg(const CinExprPtr& e, const RewriteContext&) {
  if (!is_call(e, Op::Neg) || e->args.size() != 1) return nullptr;
  const auto& a = e->args[0];
  if (is_call(a, Op::Neg) && a->args.size() == 1) return a->args[0];
  return nullptr;
}

CinExprPtr rule_mul(const CinExprPtr& e, const RewriteContext& ctx) {
  if (!is_call(e, Op::Mul)) return nullptr;
  if (e->args.size() == 1) return e->args[0];
  if (auto f = flatten_left(e)) return f;
  if (auto c = combine_int_literals(e)) return c;
  for (size_t k = 0; k < e->args.size(); ++k) {
    if (is_zero(e->args[k]) && !any_missing(e->args, k, ctx)) {
      const Value& z = e->args[k]->value;
      return cin::lit(z.is_float() ? Value(0.0) : Value(0));
    }
  }
  bool negated = false, changed = false;
  std::vector<CinExprPtr> args;
  for (const auto& a : e->args) {
    if (is_one(a)) {
      changed = true;
      continue;
    }
    if (is_call(a, Op::Neg) && a->args.size() == 1) {
      negated = !negated;
      changed = true;
      args.push_back(a->args[0]);
      continue;
    }
    args.push_back(a);
  }
  if (!changed) return nullptr;
  CinExprPtr out;
  if (args.empty()) out = cin::lit(1);
  else if (args.size() == 1) out = args[0];
  else out = with_args(e, std::move(args));
  return negated ? cin::call(Op::Neg, {out}) : out;
}

// and/or: drop the identity, collapse on the absorbing literal.
CinExprPtr logic_rule(const CinExprPtr& e, const RewriteContext& ctx, Op op) {
  if (!is_call(e, op)) return nullptr;
  bool unit = op == Op::And;
  std::vector<CinExprPtr> args;
  bool changed = false;
  for (const auto& a : e->args) {
    if (is_call(a, op)) {
      args.insert(args.end(), a->args.begin(), a->args.end());
      changed = true;
    } else {
      args.push_back(a);
    }
  }
  for (size_t k = 0; k < args.size(); ++k)
    if (is_bool_lit(args[k], !unit) && !any_missing(args, k, ctx)) return cin::lit(!unit);
  std::vector<CinExprPtr> kept;
  for (const auto& a : args) {
    if (is_bool_lit(a, unit)) {
      changed = true;
      continue;
    }
    kept.push_back(a);
  }
  if (kept.empty()) return cin::lit(unit);
  if (kept.size() == 1) return kept[0];
  if (changed) return with_args(e, std::move(kept));
  return nullptr;
}

CinExprPtr rule_and(const CinExprPtr& e, const RewriteContext& ctx) {
  return logic_rule(e, ctx, Op::And);
}

CinExprPtr rule_or(const CinExprPtr& e, const RewriteContext& ctx) {
  return logic_rule(e, ctx, Op::Or);
}

CinExprPtr rule_not(const CinExprPtr& e, const RewriteContext&) {
  if (!is_call(e, Op::Not) || e->args.size() != 1) return nullptr;
  const auto& a = e->args[0];
  if (is_call(a, Op::Not) && a->args.size() == 1) return a->args[0];
  return nullptr;
}

// Statement rules -----------------------------------------------------------------

CinStmtPtr pass_of(const CinStmtPtr& s) { return cin::pass(results(s)); }

CinStmtPtr rule_assign(const CinStmtPtr& s, const RewriteContext&) {
  if (s->kind != StmtKind::Assign) return nullptr;
  if (is_missing_lit(s->rhs)) return pass_of(s);
  if (s->op == UpdateOp::Add && is_zero(s->rhs)) return pass_of(s);
  if (s->op == UpdateOp::Mul && is_one(s->rhs)) return pass_of(s);
  if (s->op == UpdateOp::Or && is_bool_lit(s->rhs, false)) return pass_of(s);
  return nullptr;
}

CinStmtPtr rule_loop_pass(const CinStmtPtr& s, const RewriteContext&) {
  if (s->kind != StmtKind::Forall || s->body->kind != StmtKind::Pass) return nullptr;
  return s->body;
}

CinStmtPtr rule_where_pass(const CinStmtPtr& s, const RewriteContext&) {
  if (s->kind != StmtKind::Where) return nullptr;
  if (s->producer->kind == StmtKind::Pass && s->producer->tensors.empty()) return s->consumer;
  return nullptr;
}

CinStmtPtr rule_sieve(const CinStmtPtr& s, const RewriteContext&) {
  if (s->kind != StmtKind::Sieve) return nullptr;
  if (is_bool_lit(s->cond, true)) return s->body;
  if (is_bool_lit(s->cond, false) || is_missing_lit(s->cond)) return pass_of(s->body);
  return nullptr;
}

CinStmtPtr rule_multi(const CinStmtPtr& s, const RewriteContext&) {
  if (s->kind != StmtKind::Multi) return nullptr;
  std::vector<CinStmtPtr> parts;
  bool changed = false;
  for (const auto& p : s->parts) {
    if (p->kind == StmtKind::Multi) {
      parts.insert(parts.end(), p->parts.begin(), p->parts.end());
      changed = true;
    } else if (p->kind == StmtKind::Pass && p->tensors.empty()) {
      changed = true;
    } else {
      parts.push_back(p);
    }
  }
  if (parts.empty()) return cin::pass({});
  if (parts.size() == 1) return parts[0];
  if (changed) return cin::multi(std::move(parts));
  return nullptr;
}

// Body of a forall that repeats the same update on every iteration.
bool invariant_update(const CinStmtPtr& s) {
  if (s->kind != StmtKind::Forall || !s->lo || s->body->kind != StmtKind::Assign) return false;
  const auto& a = s->body;
  if (mentions_index(a->lhs, s->index) || mentions_index(a->rhs, s->index)) return false;
  return !tensors_read(a).count(a->lhs->name);
}

// Writing the same value many times is the same as once, if there is a time.
CinStmtPtr rule_idempotent(const CinStmtPtr& s, const RewriteContext&) {
  if (!invariant_update(s)) return nullptr;
  UpdateOp op = s->body->op;
  if (op != UpdateOp::Overwrite && op != UpdateOp::Min && op != UpdateOp::Max &&
      op != UpdateOp::Or)
    return nullptr;
  if (s->nonempty) return s->body;
  return cin::sieve(cin::call(Op::Le, {s->lo, s->hi}), s->body);
}

bool index_like(const CinExprPtr& e) {
  return e->kind == ExprKind::Escape || (is_lit(e) && e->value.is_int());
}

TExpr as_texpr(const CinExprPtr& e) {
  return e->kind == ExprKind::Escape ? e->escape : ir::lit(e->value);
}

// Adding b on each of n iterations adds b * n, with n = stop - start + 1.
CinStmtPtr rule_invariant_add(const CinStmtPtr& s, const RewriteContext&) {
  if (!invariant_update(s) || s->body->op != UpdateOp::Add) return nullptr;
  CinExprPtr count;
  if (index_like(s->lo) && index_like(s->hi)) {
    TExpr n = ir::add(ir::sub(as_texpr(s->hi), as_texpr(s->lo)), ir::lit(1));
    if (!s->nonempty) n = ir::max({ir::lit(0), n});
    count = cin::escape(normalize_index(n), ElemType::Int);
  } else {
    count = cin::call(Op::Add, {cin::call(Op::Sub, {s->hi, s->lo}), cin::lit(1)});
    if (!s->nonempty) count = cin::call(Op::Max, {cin::lit(0), count});
  }
  return cin::assign(s->body->lhs, UpdateOp::Add, cin::call(Op::Mul, {s->body->rhs, count}));
}

Rule expr_rule(std::string name, CinExprPtr (*fn)(const CinExprPtr&, const RewriteContext&)) {
  Rule r;
  r.name = std::move(name);
  r.on_expr = fn;
  return r;
}

Rule stmt_rule(std::string name, CinStmtPtr (*fn)(const CinStmtPtr&, const RewriteContext&)) {
  Rule r;
  r.name = std::move(name);
  r.on_stmt = fn;
  return r;
}

}  // namespace

RuleSet RuleSet::standard() {
  RuleSet rs;
  rs.add(expr_rule("fold", rule_fold));
  rs.add(expr_rule("missing", rule_missing));
  rs.add(expr_rule("coalesce", rule_coalesce));
  rs.add(expr_rule("add", rule_add));
  rs.add(expr_rule("sub", rule_sub));
  rs.add(expr_rule("neg", rule_neg));
  rs.add(expr_rule("mul", rule_mul));
  rs.add(expr_rule("and", rule_and));
  rs.add(expr_rule("or", rule_or));
  rs.add(expr_rule("not", rule_not));
  rs.add(stmt_rule("assign", rule_assign));
  rs.add(stmt_rule("loop-pass", rule_loop_pass));
  rs.add(stmt_rule("where-pass", rule_where_pass));
  rs.add(stmt_rule("sieve", rule_sieve));
  rs.add(stmt_rule("multi", rule_multi));
  rs.add(stmt_rule("loop-idempotent", rule_idempotent));
  rs.add(stmt_rule("loop-add", rule_invariant_add));
  return rs;
}

bool RuleSet::replace(const std::string& name, Rule r) {
  for (auto& x : rules_) {
    if (x.name == name) {
      x = std::move(r);
      return true;
    }
  }
  return false;
}

bool RuleSet::remove(const std::string& name) {
  auto it = std::remove_if(rules_.begin(), rules_.end(),
                           [&](const Rule& r) { return r.name == name; });
  bool found = it != rules_.end();
  rules_.erase(it, rules_.end());
  return found;
}

std::vector<std::string> RuleSet::names() const {
  std::vector<std::string> out;
  for (const auto& r : rules_) out.push_back(r.name);
  return out;
}

RuleSet faulty_rules(const std::string& which) {
  RuleSet rs = RuleSet::standard();
  Rule bad;
  bad.name = which;
  if (which == "mul") {
    // Drops the last factor.
    bad.on_expr = [](const CinExprPtr& e, const RewriteContext&) -> CinExprPtr {
      if (!is_call(e, Op::Mul) || e->args.size() < 2) return nullptr;
      std::vector<CinExprPtr> args(e->args.begin(), e->args.end() - 1);
      return args.size() == 1 ? args[0] : cin::call(Op::Mul, std::move(args));
    };
  } else if (which == "add") {
    // Drops the last term.
    bad.on_expr = [](const CinExprPtr& e, const RewriteContext&) -> CinExprPtr {
      if (!is_call(e, Op::Add) || e->args.size() < 2) return nullptr;
      std::vector<CinExprPtr> args(e->args.begin(), e->args.end() - 1);
      return args.size() == 1 ? args[0] : cin::call(Op::Add, std::move(args));
    };
  } else if (which == "loop-add") {
    // Off-by-one trip count.
    bad.on_stmt = [](const CinStmtPtr& s, const RewriteContext&) -> CinStmtPtr {
      if (!invariant_update(s) || s->body->op != UpdateOp::Add) return nullptr;
      auto n = cin::call(Op::Sub, {s->hi, s->lo});
      return cin::assign(s->body->lhs, UpdateOp::Add, cin::call(Op::Mul, {s->body->rhs, n}));
    };
  } else {
    throw std::invalid_argument("no faulty variant of rule " + which);
  }
  rs.replace(which, std::move(bad));
  return rs;
}

// Engine --------------------------------------------------------------------------

namespace {

class Engine {
 public:
  Engine(const RuleSet& rules, const SimplifyOptions& opts, SimplifyStats* stats)
      : rules_(rules), opts_(opts), stats_(stats), rng_(opts.shuffle_seed) {
    ctx_.metas = opts.metas;
    order_.resize(rules.rules().size());
    std::iota(order_.begin(), order_.end(), 0);
  }

  CinExprPtr expr(const CinExprPtr& e) {
    if (!e) return e;
    CinExprPtr node = rebuild(e);
    for (size_t k : order()) {
      const Rule& r = rules_.rules()[k];
      if (!r.on_expr) continue;
      if (auto out = r.on_expr(node, ctx_)) {
        fired(r.name);
        return expr(out);
      }
    }
    return node;
  }

  CinStmtPtr stmt(const CinStmtPtr& s) {
    CinStmtPtr node = rebuild(s);
    for (size_t k : order()) {
      const Rule& r = rules_.rules()[k];
      if (!r.on_stmt) continue;
      if (auto out = r.on_stmt(node, ctx_)) {
        fired(r.name);
        return stmt(out);
      }
    }
    return node;
  }

 private:
  const std::vector<size_t>& order() {
    if (opts_.shuffle_seed) std::shuffle(order_.begin(), order_.end(), rng_);
    return order_;
  }

  void fired(const std::string& name) {
    if (++steps_ > opts_.max_steps) throw std::logic_error("simplify did not reach a fixpoint");
    if (stats_) {
      ++stats_->steps;
      ++stats_->fired[name];
    }
  }

  CinExprPtr rebuild(const CinExprPtr& e) {
    if (e->kind == ExprKind::Call) {
      std::vector<CinExprPtr> args;
      bool changed = false;
      for (const auto& a : e->args) {
        args.push_back(expr(a));
        changed |= args.back() != a;
      }
      return changed ? with_args(e, std::move(args)) : e;
    }
    if (e->kind == ExprKind::Access) {
      auto copy = std::make_shared<CinExpr>(*e);
      bool changed = false;
      for (auto& s : copy->slots) {
        auto idx = expr(s.index);
        changed |= idx != s.index;
        s.index = idx;
        for (auto& m : s.mods) {
          for (auto& a : m.args) {
            auto b = expr(a);
            changed |= b != a;
            a = b;
          }
        }
      }
      return changed ? CinExprPtr(copy) : e;
    }
    return e;
  }

  CinStmtPtr rebuild(const CinStmtPtr& s) {
    auto copy = std::make_shared<CinStmt>(*s);
    switch (s->kind) {
      case StmtKind::Assign:
        copy->lhs = expr(s->lhs);
        copy->rhs = expr(s->rhs);
        break;
      case StmtKind::Forall:
        copy->lo = expr(s->lo);
        copy->hi = expr(s->hi);
        copy->body = stmt(s->body);
        break;
      case StmtKind::Where:
        copy->consumer = stmt(s->consumer);
        copy->producer = stmt(s->producer);
        break;
      case StmtKind::Multi:
        for (auto& p : copy->parts) p = stmt(p);
        break;
      case StmtKind::Sieve:
        copy->cond = expr(s->cond);
        copy->body = stmt(s->body);
        break;
      case StmtKind::Pass: return s;
    }
    return copy;
  }

  const RuleSet& rules_;
  SimplifyOptions opts_;
  SimplifyStats* stats_;
  RewriteContext ctx_;
  std::mt19937_64 rng_;
  std::vector<size_t> order_;
  size_t steps_ = 0;
};

}  // namespace

CinStmtPtr simplify(const CinStmtPtr& s, const RuleSet& rules, const SimplifyOptions& opts,
                    SimplifyStats* stats) {
  return Engine(rules, opts, stats).stmt(s);
}

CinExprPtr simplify(const CinExprPtr& e, const RuleSet& rules, const SimplifyOptions& opts,
                    SimplifyStats* stats) {
  return Engine(rules, opts, stats).expr(e);
}

CinStmtPtr simplify(const CinStmtPtr& s, const SimplifyOptions& opts) {
  static const RuleSet rules = RuleSet::standard();
  return simplify(s, rules, opts);
}

CinExprPtr simplify(const CinExprPtr& e, const SimplifyOptions& opts) {
  static const RuleSet rules = RuleSet::standard();
  return simplify(e, rules, opts);
}

}  // namespace coiter
