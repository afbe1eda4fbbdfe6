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

#include "coiter/target_ir.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace coiter {

namespace ir {

namespace {
TExpr make(TExprKind k, std::string name, Op op, std::vector<TExpr> args, Value v = {}) {
  auto n = std::make_shared<TExprNode>();
  n->kind = k;
  n->name = std::move(name);
  n->op = op;
  n->args = std::move(args);
  n->lit = std::move(v);
  return n;
}
}  // namespace

TExpr lit(Value v) { return make(TExprKind::Lit, "", Op::Identity, {}, std::move(v)); }
TExpr var(std::string name) { return make(TExprKind::Var, std::move(name), Op::Identity, {}); }
TExpr read(std::string buffer, TExpr index) {
  return make(TExprKind::Read, std::move(buffer), Op::Identity, {std::move(index)});
}
TExpr call(Op op, std::vector<TExpr> args) {
  return make(TExprKind::Call, "", op, std::move(args));
}
TExpr add(TExpr a, TExpr b) { return call(Op::Add, {std::move(a), std::move(b)}); }
TExpr sub(TExpr a, TExpr b) { return call(Op::Sub, {std::move(a), std::move(b)}); }
TExpr mul(TExpr a, TExpr b) { return call(Op::Mul, {std::move(a), std::move(b)}); }
TExpr min(std::vector<TExpr> args) {
  if (args.size() == 1) return args[0];
  return call(Op::Min, std::move(args));
}
TExpr max(std::vector<TExpr> args) {
  if (args.size() == 1) return args[0];
  return call(Op::Max, std::move(args));
}
TExpr eq(TExpr a, TExpr b) { return call(Op::Eq, {std::move(a), std::move(b)}); }
TExpr le(TExpr a, TExpr b) { return call(Op::Le, {std::move(a), std::move(b)}); }
TExpr lt(TExpr a, TExpr b) { return call(Op::Lt, {std::move(a), std::move(b)}); }
TExpr land(std::vector<TExpr> args) {
  if (args.empty()) return lit(true);
  if (args.size() == 1) return args[0];
  return make(TExprKind::LAnd, "", Op::Identity, std::move(args));
}
TExpr lor(std::vector<TExpr> args) {
  if (args.empty()) return lit(false);
  if (args.size() == 1) return args[0];
  return make(TExprKind::LOr, "", Op::Identity, std::move(args));
}
TExpr select(TExpr c, TExpr a, TExpr b) {
  return make(TExprKind::Select, "", Op::Identity, {std::move(c), std::move(a), std::move(b)});
}
TExpr search(std::string buffer, TExpr lo, TExpr hi, TExpr key) {
  return make(TExprKind::Search, std::move(buffer), Op::Identity,
              {std::move(lo), std::move(hi), std::move(key)});
}

}  // namespace ir

std::optional<Value> const_value(const TExpr& e) {
  if (e && e->kind == TExprKind::Lit) return e->lit;
  return std::nullopt;
}

std::optional<int64_t> const_int(const TExpr& e) {
  if (e && e->kind == TExprKind::Lit && e->lit.is_int()) return e->lit.as_int();
  return std::nullopt;
}

bool same_expr(const TExpr& a, const TExpr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->name != b->name || a->op != b->op ||
      a->args.size() != b->args.size())
    return false;
  if (a->kind == TExprKind::Lit && !a->lit.identical(b->lit)) return false;
  for (size_t k = 0; k < a->args.size(); ++k)
    if (!same_expr(a->args[k], b->args[k])) return false;
  return true;
}

bool mentions_var(const TExpr& e, const std::string& name) {
  if (!e) return false;
  if (e->kind == TExprKind::Var && e->name == name) return true;
  for (const auto& a : e->args)
    if (mentions_var(a, name)) return true;
  return false;
}

namespace {

TExpr with_args(const TExpr& e, std::vector<TExpr> args) {
  auto n = std::make_shared<TExprNode>(*e);
  n->args = std::move(args);
  return n;
}

template <class F>
TExpr map_args(const TExpr& e, F&& f) {
  if (e->args.empty()) return e;
  std::vector<TExpr> args;
  bool changed = false;
  for (const auto& a : e->args) {
    args.push_back(f(a));
    changed = changed || args.back() != a;
  }
  return changed ? with_args(e, std::move(args)) : e;
}

}  // namespace

TExpr fold(const TExpr& e) {
  if (!e) return e;
  TExpr n = map_args(e, fold);
  switch (n->kind) {
    case TExprKind::Call: {
      std::vector<Value> vals;
      for (const auto& a : n->args) {
        auto v = const_value(a);
        if (!v) return n;
        vals.push_back(*v);
      }
      try {
        return ir::lit(apply_op(n->op, vals));
      } catch (const ValueError&) {
        return n;
      }
    }
    case TExprKind::LAnd:
    case TExprKind::LOr: {
      bool is_and = n->kind == TExprKind::LAnd;
      std::vector<TExpr> keep;
      for (const auto& a : n->args) {
        auto v = const_value(a);
        if (v && v->is_bool()) {
          if (v->as_bool() != is_and) return ir::lit(!is_and);
          continue;
        }
        keep.push_back(a);
      }
      if (keep.size() == n->args.size()) return n;
      return is_and ? ir::land(std::move(keep)) : ir::lor(std::move(keep));
    }
    case TExprKind::Select: {
      auto c = const_value(n->args[0]);
      if (c && c->is_bool()) return c->as_bool() ? n->args[1] : n->args[2];
      if (same_expr(n->args[1], n->args[2])) return n->args[1];
      return n;
    }
    default:
      return n;
  }
}

// Index normalization -------------------------------------------------------------

namespace {

struct Linear {
  int64_t constant = 0;
  std::vector<std::pair<TExpr, int64_t>> terms;

  void add_term(const TExpr& t, int64_t coeff) {
    if (coeff == 0) return;
    for (auto& [u, c] : terms) {
      if (same_expr(u, t)) {
        c += coeff;
        return;
      }
    }
    terms.emplace_back(t, coeff);
  }
  void add(const Linear& o, int64_t scale) {
    constant += o.constant * scale;
    for (const auto& [t, c] : o.terms) add_term(t, c * scale);
  }
  void prune() {
    std::erase_if(terms, [](const auto& p) { return p.second == 0; });
  }
  bool same_terms(const Linear& o) const {
    if (terms.size() != o.terms.size()) return false;
    for (const auto& [t, c] : terms) {
      bool found = false;
      for (const auto& [u, d] : o.terms)
        if (c == d && same_expr(t, u)) found = true;
      if (!found) return false;
    }
    return true;
  }
};

TExpr norm(const TExpr& e);

Linear linearize(const TExpr& e) {
  Linear l;
  if (auto c = const_int(e)) {
    l.constant = *c;
    return l;
  }
  if (e->kind == TExprKind::Call) {
    switch (e->op) {
      case Op::Add:
        for (const auto& a : e->args) l.add(linearize(a), 1);
        l.prune();
        return l;
      case Op::Sub:
        if (e->args.size() == 2) {
          l.add(linearize(e->args[0]), 1);
          l.add(linearize(e->args[1]), -1);
          l.prune();
          return l;
        }
        break;
      case Op::Neg:
        l.add(linearize(e->args[0]), -1);
        return l;
      case Op::Mul:
        if (e->args.size() == 2) {
          auto a = const_int(e->args[0]), b = const_int(e->args[1]);
          if (a) {
            l.add(linearize(e->args[1]), *a);
            l.prune();
            return l;
          }
          if (b) {
            l.add(linearize(e->args[0]), *b);
            l.prune();
            return l;
          }
        }
        break;
      default:
        break;
    }
  }
  l.add_term(norm(e), 1);
  return l;
}

TExpr delinearize(const Linear& l) {
  TExpr acc;
  for (const auto& [t, c] : l.terms) {
    if (c <= 0) continue;
    TExpr term = c == 1 ? t : ir::mul(ir::lit(c), t);
    acc = acc ? ir::add(acc, term) : term;
  }
  for (const auto& [t, c] : l.terms) {
    if (c >= 0) continue;
    TExpr term = c == -1 ? t : ir::mul(ir::lit(-c), t);
    acc = acc ? ir::sub(acc, term) : ir::call(Op::Neg, {term});
  }
  if (!acc) return ir::lit(l.constant);
  if (l.constant > 0) return ir::add(acc, ir::lit(l.constant));
  if (l.constant < 0) return ir::sub(acc, ir::lit(-l.constant));
  return acc;
}

TExpr norm_minmax(const TExpr& e) {
  bool is_min = e->op == Op::Min;
  std::vector<TExpr> flat;
  std::function<void(const TExpr&)> collect = [&](const TExpr& a) {
    TExpr n = norm(a);
    if (n->kind == TExprKind::Call && n->op == e->op) {
      for (const auto& b : n->args) collect(b);
    } else {
      flat.push_back(n);
    }
  };
  for (const auto& a : e->args) collect(a);
  std::vector<Linear> forms;
  std::vector<TExpr> kept;
  for (const auto& a : flat) {
    Linear la = linearize(a);
    bool merged = false;
    for (size_t k = 0; k < forms.size(); ++k) {
      if (forms[k].same_terms(la)) {
        bool better = is_min ? la.constant < forms[k].constant : la.constant > forms[k].constant;
        if (better) {
          forms[k] = la;
          kept[k] = a;
        }
        merged = true;
        break;
      }
    }
    if (!merged) {
      forms.push_back(la);
      kept.push_back(a);
    }
  }
  // Constants go last for readability.
  std::stable_partition(kept.begin(), kept.end(),
                        [](const TExpr& a) { return !const_int(a).has_value(); });
  return is_min ? ir::min(std::move(kept)) : ir::max(std::move(kept));
}

TExpr norm(const TExpr& e) {
  if (!e) return e;
  switch (e->kind) {
    case TExprKind::Lit:
    case TExprKind::Var:
      return e;
    case TExprKind::Call:
      switch (e->op) {
        case Op::Add:
        case Op::Sub:
        case Op::Neg:
        case Op::Mul: {
          Linear l = linearize(e);
          if (l.terms.size() == 1 && l.constant == 0 && l.terms[0].second == 1 &&
              same_expr(l.terms[0].first, e))
            return fold(map_args(e, norm));
          return fold(delinearize(l));
        }
        case Op::Min:
        case Op::Max:
          return fold(norm_minmax(e));
        case Op::Eq:
        case Op::Ne:
        case Op::Lt:
        case Op::Le:
        case Op::Gt:
        case Op::Ge: {
          TExpr a = norm(e->args[0]), b = norm(e->args[1]);
          Linear d = linearize(a);
          d.add(linearize(b), -1);
          d.prune();
          if (d.terms.empty()) {
            Value args[] = {Value(d.constant), Value(int64_t{0})};
            return ir::lit(apply_op(e->op, args));
          }
          return fold(ir::call(e->op, {a, b}));
        }
        default:
          return fold(map_args(e, norm));
      }
    default:
      return fold(map_args(e, norm));
  }
}

}  // namespace

TExpr normalize_index(const TExpr& e) { return norm(e); }

TExpr substitute(const TExpr& e, const std::string& name, const TExpr& with) {
  if (!e) return e;
  if (e->kind == TExprKind::Var) return e->name == name ? with : e;
  return map_args(e, [&](const TExpr& a) { return substitute(a, name, with); });
}

// Printing -----------------------------------------------------------------------

namespace {

int precedence(const TExpr& e) {
  switch (e->kind) {
    case TExprKind::LOr: return 1;
    case TExprKind::LAnd: return 2;
    case TExprKind::Call:
      switch (e->op) {
        case Op::Eq:
        case Op::Ne:
        case Op::Lt:
        case Op::Le:
        case Op::Gt:
        case Op::Ge: return 3;
        case Op::Add:
        case Op::Sub: return 4;
        case Op::Mul:
        case Op::Div: return 5;
        case Op::Neg: return 6;
        case Op::Pow: return 7;
        default: return 9;
      }
    case TExprKind::Lit: {
      bool negative = (e->lit.is_int() && e->lit.as_int() < 0) ||
                      (e->lit.is_float() && std::signbit(e->lit.as_double()));
      return negative ? 6 : 9;
    }
    default: return 9;
  }
}

const char* infix(Op op) {
  switch (op) {
    case Op::Add: return " + ";
    case Op::Sub: return " - ";
    case Op::Mul: return " * ";
    case Op::Div: return " / ";
    case Op::Pow: return "^";
    case Op::Eq: return " == ";
    case Op::Ne: return " != ";
    case Op::Lt: return " < ";
    case Op::Le: return " <= ";
    case Op::Gt: return " > ";
    case Op::Ge: return " >= ";
    default: return nullptr;
  }
}

void print_to(std::ostream& os, const TExpr& e);

void print_operand(std::ostream& os, const TExpr& e, int parent, bool right_assoc_strict) {
  int p = precedence(e);
  bool paren = p < parent || (right_assoc_strict && p == parent);
  if (paren) os << '(';
  print_to(os, e);
  if (paren) os << ')';
}

void print_list(std::ostream& os, const std::vector<TExpr>& args) {
  for (size_t k = 0; k < args.size(); ++k) {
    if (k) os << ", ";
    print_to(os, args[k]);
  }
}

void print_to(std::ostream& os, const TExpr& e) {
  if (!e) {
    os << "<null>";
    return;
  }
  switch (e->kind) {
    case TExprKind::Lit: os << to_string(e->lit); return;
    case TExprKind::Var: os << e->name; return;
    case TExprKind::Read:
      os << e->name << '[';
      print_to(os, e->args[0]);
      os << ']';
      return;
    case TExprKind::LAnd:
    case TExprKind::LOr: {
      int p = precedence(e);
      for (size_t k = 0; k < e->args.size(); ++k) {
        if (k) os << (e->kind == TExprKind::LAnd ? " && " : " || ");
        print_operand(os, e->args[k], p, false);
      }
      return;
    }
    case TExprKind::Select:
      os << "ifelse(";
      print_list(os, e->args);
      os << ')';
      return;
    case TExprKind::Search:
      os << "search(" << e->name << ", ";
      print_list(os, e->args);
      os << ')';
      return;
    case TExprKind::Call: {
      const char* sym = infix(e->op);
      int p = precedence(e);
      if (e->op == Op::Neg) {
        os << '-';
        print_operand(os, e->args[0], p + 1, false);
        return;
      }
      if (sym && e->args.size() >= 2 && !(e->args.size() > 2 && (is_comparison(e->op) ||
                                                                e->op == Op::Sub ||
                                                                e->op == Op::Div))) {
        bool strict_right = e->op == Op::Sub || e->op == Op::Div || is_comparison(e->op) ||
                            e->op == Op::Pow;
        for (size_t k = 0; k < e->args.size(); ++k) {
          if (k) os << sym;
          bool left_pow = e->op == Op::Pow && k == 0;
          print_operand(os, e->args[k], left_pow ? p + 1 : p, k > 0 && strict_right);
        }
        return;
      }
      os << op_name(e->op) << '(';
      print_list(os, e->args);
      os << ')';
      return;
    }
  }
}

}  // namespace

std::string print(const TExpr& e) {
  std::ostringstream os;
  print_to(os, e);
  return os.str();
}

// Statements ---------------------------------------------------------------------

namespace ir {

namespace {
std::shared_ptr<TStmtNode> node(TStmtKind k) {
  auto n = std::make_shared<TStmtNode>();
  n->kind = k;
  return n;
}
}  // namespace

TStmt nop() {
  static const TStmt n = node(TStmtKind::Nop);
  return n;
}

TStmt block(std::vector<TStmt> body) {
  std::vector<TStmt> flat;
  for (auto& s : body) {
    if (!s || s->kind == TStmtKind::Nop) continue;
    if (s->kind == TStmtKind::Block) {
      for (const auto& c : s->body) flat.push_back(c);
    } else {
      flat.push_back(std::move(s));
    }
  }
  if (flat.empty()) return nop();
  if (flat.size() == 1) return flat[0];
  auto n = node(TStmtKind::Block);
  n->body = std::move(flat);
  return n;
}

TStmt let(std::string name, TExpr value) {
  auto n = node(TStmtKind::Let);
  n->name = std::move(name);
  n->value = std::move(value);
  return n;
}

TStmt assign(std::string name, TExpr value) {
  auto n = node(TStmtKind::Assign);
  n->name = std::move(name);
  n->value = std::move(value);
  return n;
}

TStmt write(std::string buffer, TExpr index, UpdateOp op, TExpr value) {
  auto n = node(TStmtKind::Write);
  n->name = std::move(buffer);
  n->exprs = {std::move(index)};
  n->op = op;
  n->value = std::move(value);
  return n;
}

TStmt for_loop(std::string var, TExpr lo, TExpr hi, TStmt body) {
  auto n = node(TStmtKind::For);
  n->name = std::move(var);
  n->exprs = {std::move(lo), std::move(hi)};
  n->body = {body ? std::move(body) : nop()};
  return n;
}

TStmt while_loop(TExpr cond, std::string cursor, TStmt body) {
  auto n = node(TStmtKind::While);
  n->value = std::move(cond);
  n->name = std::move(cursor);
  n->body = {body ? std::move(body) : nop()};
  return n;
}

TStmt if_chain(std::vector<std::pair<TExpr, TStmt>> branches, TStmt otherwise) {
  std::vector<std::pair<TExpr, TStmt>> kept;
  for (auto& [c, b] : branches) {
    auto v = const_value(c);
    if (v && v->is_bool() && !v->as_bool()) continue;
    if (v && v->is_bool() && v->as_bool()) {
      otherwise = b;
      break;
    }
    kept.emplace_back(c, b ? b : nop());
  }
  if (otherwise && is_nop(otherwise)) otherwise = nullptr;
  while (!otherwise && !kept.empty() && is_nop(kept.back().second)) kept.pop_back();
  if (kept.empty()) return otherwise ? otherwise : nop();
  auto n = node(TStmtKind::If);
  n->branches = std::move(kept);
  n->otherwise = std::move(otherwise);
  return n;
}

TStmt hook_init(std::string tensor) {
  auto n = node(TStmtKind::Hook);
  n->hook = HookKind::Init;
  n->name = std::move(tensor);
  return n;
}

TStmt hook_finalize(std::string tensor) {
  auto n = node(TStmtKind::Hook);
  n->hook = HookKind::Finalize;
  n->name = std::move(tensor);
  return n;
}

TStmt hook_append(std::string tensor, TExpr coord, UpdateOp op, TExpr value) {
  auto n = node(TStmtKind::Hook);
  n->hook = HookKind::Append;
  n->name = std::move(tensor);
  n->exprs = {std::move(coord)};
  n->op = op;
  n->value = std::move(value);
  return n;
}

}  // namespace ir

bool is_nop(const TStmt& s) { return !s || s->kind == TStmtKind::Nop; }

namespace {

void census_expr(const TExpr& e, IrCensus& c) {
  if (!e) return;
  if (e->kind == TExprKind::Search) ++c.searches;
  if (e->kind == TExprKind::Read) ++c.reads[e->name];
  for (const auto& a : e->args) census_expr(a, c);
}

void census_stmt(const TStmt& s, IrCensus& c) {
  if (!s) return;
  census_expr(s->value, c);
  for (const auto& e : s->exprs) census_expr(e, c);
  if (s->kind == TStmtKind::While) ++c.whiles;
  if (s->kind == TStmtKind::For) ++c.fors;
  if (s->kind == TStmtKind::If) ++c.ifs;
  for (const auto& b : s->body) census_stmt(b, c);
  for (const auto& [cond, b] : s->branches) {
    census_expr(cond, c);
    census_stmt(b, c);
  }
  census_stmt(s->otherwise, c);
}

void print_stmt(std::ostream& os, const TStmt& s, int depth) {
  std::string pad(static_cast<size_t>(depth) * 2, ' ');
  switch (s->kind) {
    case TStmtKind::Nop: os << pad << "nop\n"; return;
    case TStmtKind::Block:
      for (const auto& c : s->body) print_stmt(os, c, depth);
      return;
    case TStmtKind::Let: os << pad << "let " << s->name << " = " << print(s->value) << '\n'; return;
    case TStmtKind::Assign: os << pad << s->name << " = " << print(s->value) << '\n'; return;
    case TStmtKind::Write:
      os << pad << s->name << '[' << print(s->exprs[0]) << "] " << update_op_token(s->op) << ' '
         << print(s->value) << '\n';
      return;
    case TStmtKind::For:
      os << pad << "for " << s->name << " = " << print(s->exprs[0]) << ':' << print(s->exprs[1])
         << '\n';
      if (!is_nop(s->body[0])) print_stmt(os, s->body[0], depth + 1);
      os << pad << "end\n";
      return;
    case TStmtKind::While:
      os << pad << "while " << print(s->value) << '\n';
      if (!is_nop(s->body[0])) print_stmt(os, s->body[0], depth + 1);
      os << pad << "end\n";
      return;
    case TStmtKind::If:
      for (size_t k = 0; k < s->branches.size(); ++k) {
        os << pad << (k ? "elseif " : "if ") << print(s->branches[k].first) << '\n';
        if (!is_nop(s->branches[k].second)) print_stmt(os, s->branches[k].second, depth + 1);
      }
      if (s->otherwise) {
        os << pad << "else\n";
        print_stmt(os, s->otherwise, depth + 1);
      }
      os << pad << "end\n";
      return;
    case TStmtKind::Hook:
      switch (s->hook) {
        case HookKind::Init: os << pad << "init " << s->name << '\n'; return;
        case HookKind::Finalize: os << pad << "finalize " << s->name << '\n'; return;
        case HookKind::Append:
          os << pad << "append " << s->name << '[' << print(s->exprs[0]) << "] "
             << update_op_token(s->op) << ' ' << print(s->value) << '\n';
          return;
      }
  }
}

}  // namespace

size_t count_loops(const TStmt& s) {
  IrCensus c = census(s);
  return c.fors + c.whiles;
}

IrCensus census(const TStmt& s) {
  IrCensus c;
  census_stmt(s, c);
  return c;
}

std::string print_ir(const TStmt& s) {
  std::ostringstream os;
  print_stmt(os, s ? s : ir::nop(), 0);
  return os.str();
}

}  // namespace coiter
