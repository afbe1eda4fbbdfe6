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

#include "coiter/lower.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

namespace coiter {
namespace {

TExpr norm(const TExpr& e) { return normalize_index(fold(e)); }

std::optional<bool> decide(const TExpr& e) {
  auto v = const_value(norm(e));
  if (v && v->is_bool()) return v->as_bool();
  return std::nullopt;
}

bool is_simple(const TExpr& e) { return e->kind == TExprKind::Lit || e->kind == TExprKind::Var; }

// An access after unfurling. Headed terms carry the looplet for the index
// `head` of the forall being lowered; unheaded ones carry a payload (a fiber
// or a switch over payloads) with the slots still to consume in `rest`.
class AccessTerm final : public VirtualTerm {
 public:
  std::string tensor;
  const TensorMeta* meta = nullptr;  // null for sieve masks
  LoopletPtr looplet;
  std::string head;
  std::vector<IndexSlot> rest;
  std::set<std::string> depends;
  bool permit = false;
  ElemType type = ElemType::Float;

  std::string print() const override {
    std::string s = tensor + "{" + render_inline(looplet) + "}";
    if (!head.empty()) s += "@" + head;
    if (!rest.empty()) {
      std::string r = coiter::print(cin::access("", rest));
      s += r;
    }
    return s;
  }
  bool may_be_missing() const override {
    return permit || (meta && meta->fill.is_missing());
  }
  bool mentions(const std::string& index) const override {
    if (head == index || depends.count(index)) return true;
    for (const auto& sl : rest) {
      if (mentions_index(sl.index, index)) return true;
      for (const auto& m : sl.mods)
        for (const auto& a : m.args)
          if (mentions_index(a, index)) return true;
    }
    return false;
  }
};

using TermPtr = std::shared_ptr<const AccessTerm>;

TermPtr as_term(const CinExprPtr& e) {
  if (!e || e->kind != ExprKind::Virtual) return nullptr;
  return std::dynamic_pointer_cast<const AccessTerm>(e->virt);
}

CinExprPtr term_expr(AccessTerm t) { return cin::virt(std::make_shared<const AccessTerm>(std::move(t))); }

void add_slot_depends(std::set<std::string>& deps, const IndexSlot& sl) {
  std::function<void(const CinExprPtr&)> walk = [&](const CinExprPtr& e) {
    if (!e) return;
    if (e->kind == ExprKind::Index) deps.insert(e->name);
    for (const auto& a : e->args) walk(a);
    for (const auto& s : e->slots) {
      walk(s.index);
      for (const auto& m : s.mods)
        for (const auto& a : m.args) walk(a);
    }
  };
  walk(sl.index);
  for (const auto& m : sl.mods)
    for (const auto& a : m.args) walk(a);
}

bool has_permit(const IndexSlot& sl) {
  for (const auto& m : sl.mods)
    if (m.kind == ModKind::Permit) return true;
  return false;
}

bool int_op(Op op) {
  switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Neg:
    case Op::Mod:
    case Op::IDiv:
    case Op::Min:
    case Op::Max:
    case Op::Abs:
      return true;
    default:
      return false;
  }
}

class Lowerer {
 public:
  Lowerer(TensorMetas& metas, const Params& params, const CompileOptions& opts,
          const RuleSet& rules, std::vector<Stage>* stages)
      : metas_(metas), params_(params), opts_(opts), rules_(rules), stages_(stages) {
    sopts_.metas = &metas_;
  }

  TStmt program(const CinStmtPtr& s, const std::vector<std::string>& outputs,
                const std::set<std::string>& where_scoped) {
    where_scoped_ = where_scoped;
    for (const auto& name : outputs) {
      outputs_.insert(name);
      try {
        writers_.emplace(name, unfurl_output(metas_.at(name)));
      } catch (const UnfurlError& e) {
        throw CompileError(e.what());
      }
    }
    std::vector<TStmt> out;
    for (const auto& name : outputs)
      if (!where_scoped_.count(name)) out.push_back(writers_.at(name).init);
    out.push_back(lower_stmt(s));
    for (const auto& name : outputs)
      if (!where_scoped_.count(name)) out.push_back(writers_.at(name).finalize);
    return ir::block(std::move(out));
  }

 private:
  TensorMetas& metas_;
  const Params& params_;
  const CompileOptions& opts_;
  const RuleSet& rules_;
  std::vector<Stage>* stages_;
  SimplifyOptions sopts_;
  std::map<std::string, WriterDescriptor> writers_;
  std::set<std::string> outputs_;
  std::set<std::string> where_scoped_;
  std::set<std::string> where_active_;
  std::set<std::string> bound_;
  std::map<std::string, int> counters_;

  std::string fresh(const std::string& hint) { return hint + std::to_string(++counters_[hint]); }

  FreshFn fresh_fn() {
    return [this](const std::string& h) { return fresh(h); };
  }

  // Expression plumbing ----------------------------------------------------------

  // Rebuilds every expression of `s` with `f`, except the output access node on
  // the left of an assignment (its index expressions are visited).
  CinStmtPtr map_exprs(const CinStmtPtr& s, const ExprFn& f) {
    auto x = [&](const CinExprPtr& e) { return e ? transform(e, f) : e; };
    auto out = std::make_shared<CinStmt>(*s);
    switch (s->kind) {
      case StmtKind::Assign: {
        auto lhs = std::make_shared<CinExpr>(*s->lhs);
        for (auto& sl : lhs->slots) {
          sl.index = x(sl.index);
          for (auto& m : sl.mods)
            for (auto& a : m.args) a = x(a);
        }
        out->lhs = lhs;
        out->rhs = x(s->rhs);
        break;
      }
      case StmtKind::Forall:
        out->lo = x(s->lo);
        out->hi = x(s->hi);
        out->body = map_exprs(s->body, f);
        break;
      case StmtKind::Where:
        out->consumer = map_exprs(s->consumer, f);
        out->producer = map_exprs(s->producer, f);
        break;
      case StmtKind::Multi:
        for (auto& p : out->parts) p = map_exprs(p, f);
        break;
      case StmtKind::Sieve:
        out->cond = x(s->cond);
        out->body = map_exprs(s->body, f);
        break;
      case StmtKind::Pass:
        break;
    }
    return out;
  }

  void visit_exprs(const CinStmtPtr& s, const std::function<void(const CinExprPtr&)>& f) {
    map_exprs(s, [&](const CinExprPtr& e) {
      f(e);
      return e;
    });
  }

  CinStmtPtr replace_terms(const CinStmtPtr& s, const std::map<const VirtualTerm*, CinExprPtr>& m) {
    if (m.empty()) return s;
    return map_exprs(s, [&](const CinExprPtr& e) {
      if (e->kind == ExprKind::Virtual) {
        auto it = m.find(e->virt.get());
        if (it != m.end()) return it->second;
      }
      return e;
    });
  }

  std::set<std::string> names_read(const CinStmtPtr& s) {
    std::set<std::string> out;
    visit_exprs(s, [&](const CinExprPtr& e) {
      if (e->kind == ExprKind::Access) out.insert(e->name);
      if (auto t = as_term(e)) out.insert(t->tensor);
    });
    return out;
  }

  const TensorMeta& meta_of(const std::string& name) {
    auto it = metas_.find(name);
    if (it == metas_.end()) throw CompileError("unbound tensor " + name);
    return it->second;
  }

  void check_readable(const std::string& name) {
    auto it = writers_.find(name);
    if (it != writers_.end() && !it->second.in_place)
      throw CompileError("output " + name + " is read, but its format only supports appends");
  }

  TExpr to_texpr(const CinExprPtr& e) {
    switch (e->kind) {
      case ExprKind::Literal:
        return ir::lit(e->value);
      case ExprKind::Index:
        if (!bound_.count(e->name))
          throw CompileError("index " + e->name + " is used outside the loop that binds it");
        return ir::var(e->name);
      case ExprKind::Param:
        if (!params_.count(e->name)) throw CompileError("no value for parameter $" + e->name);
        return ir::var("$" + e->name);
      case ExprKind::Call: {
        if (!e->name.empty()) throw CompileError("unknown function " + e->name);
        std::vector<TExpr> args;
        for (const auto& a : e->args) args.push_back(to_texpr(a));
        return ir::call(e->op, std::move(args));
      }
      case ExprKind::Escape:
        return e->escape;
      case ExprKind::Access:
        if (e->slots.empty()) {
          check_readable(e->name);
          return ir::read(meta_of(e->name).value_buffer(), ir::lit(0));
        }
        throw CompileError("access " + print(e) + " was not lowered");
      case ExprKind::Size:
        throw CompileError("unbound size of " + e->name);
      case ExprKind::Virtual:
        throw CompileError("access " + e->virt->print() + " was not lowered");
    }
    throw CompileError("bad expression");
  }

  CinExprPtr bound_escape(const TExpr& e) { return cin::escape(norm(e), ElemType::Int); }

  bool closed_int(const CinExprPtr& e) {
    switch (e->kind) {
      case ExprKind::Literal:
        return e->value.is_int();
      case ExprKind::Index:
        return bound_.count(e->name) > 0;
      case ExprKind::Param: {
        auto it = params_.find(e->name);
        return it != params_.end() && it->second.is_int();
      }
      case ExprKind::Escape:
        return e->type && *e->type == ElemType::Int;
      case ExprKind::Call:
        if (!int_op(e->op)) return false;
        for (const auto& a : e->args)
          if (!closed_int(a)) return false;
        return true;
      default:
        return false;
    }
  }

  // Unfurling ----------------------------------------------------------------------

  LoopletPtr unfurl_slot(const TensorMeta& meta, const FiberRef& fr, const IndexSlot& sl,
                         const std::string& index, bool follow) {
    Protocol p = Protocol::Walk;
    if (sl.proto) {
      p = *sl.proto;
    } else {
      auto it = opts_.protocols.find(meta.name + "." + index);
      if (it != opts_.protocols.end()) p = it->second;
    }
    if (follow && p != Protocol::FollowZeroCheck && p != Protocol::Extrude) p = Protocol::Follow;
    LoopletPtr l;
    try {
      check_protocol(meta, fr.level, p);
      l = unfurl(fr, p, fresh_fn());
    } catch (const UnfurlError& e) {
      throw CompileError(std::string(e.what()));
    }
    if (!sl.mods.empty()) {
      std::vector<IndexMod> mods;
      for (const auto& m : sl.mods) {
        IndexMod im;
        im.kind = m.kind;
        if (!m.args.empty()) im.a = norm(to_texpr(m.args[0]));
        if (m.args.size() > 1) im.b = norm(to_texpr(m.args[1]));
        mods.push_back(im);
      }
      try {
        l = unfurl_modified(l, ir::lit(meta.dims[fr.level]), mods);
      } catch (const std::exception& e) {
        throw CompileError(std::string(e.what()));
      }
    }
    return l;
  }

  FiberRef root_of(const TensorMeta& meta) { return FiberRef{&meta, 0, ir::lit(0), meta.all_fill}; }

  // The payload left after consuming a slot: a scalar becomes an escape.
  CinExprPtr payload_expr(const AccessTerm& base, const LoopletPtr& payload,
                          std::vector<IndexSlot> rest) {
    LoopletPtr p = push_shift(payload);
    if (p->kind == LoopletKind::Leaf) {
      // Permit padding on an outer mode: everything below it is missing.
      if (!rest.empty() && p->value->kind == TExprKind::Lit && p->value->lit.is_missing())
        return cin::escape(p->value, base.type);
      if (!rest.empty())
        throw CompileError("access to " + base.tensor + " has more indices than its rank");
      return cin::escape(p->value, base.type);
    }
    if (p->kind == LoopletKind::Fiber && rest.empty())
      throw CompileError("access to " + base.tensor + " has fewer indices than its rank");
    AccessTerm t = base;
    if (!t.head.empty()) t.depends.insert(t.head);
    t.head.clear();
    t.looplet = p;
    t.rest = std::move(rest);
    return term_expr(std::move(t));
  }

  CinExprPtr with_looplet(const TermPtr& t, LoopletPtr l) {
    AccessTerm c = *t;
    c.looplet = std::move(l);
    return term_expr(std::move(c));
  }

  // Turns accesses headed by `index` into headed terms.
  CinStmtPtr unfurl_heads(const CinStmtPtr& s, const std::string& index) {
    return map_exprs(s, [&](const CinExprPtr& e) -> CinExprPtr {
      if (e->kind == ExprKind::Access && !e->slots.empty()) {
        const IndexSlot& sl = e->slots[0];
        if (sl.index->kind != ExprKind::Index || sl.index->name != index) return e;
        check_readable(e->name);
        const TensorMeta& meta = meta_of(e->name);
        AccessTerm t;
        t.tensor = e->name;
        t.meta = &meta;
        t.type = meta.type;
        t.head = index;
        t.rest.assign(e->slots.begin() + 1, e->slots.end());
        t.permit = has_permit(sl);
        add_slot_depends(t.depends, sl);
        t.depends.erase(index);
        t.looplet = unfurl_slot(meta, root_of(meta), sl, index, false);
        return term_expr(std::move(t));
      }
      auto t = as_term(e);
      if (t && t->head.empty() && t->looplet->kind == LoopletKind::Fiber && !t->rest.empty()) {
        const IndexSlot& sl = t->rest[0];
        if (sl.index->kind != ExprKind::Index || sl.index->name != index) return e;
        AccessTerm c = *t;
        c.head = index;
        c.rest.erase(c.rest.begin());
        c.permit = c.permit || has_permit(sl);
        add_slot_depends(c.depends, sl);
        c.depends.erase(index);
        c.looplet = unfurl_slot(*t->meta, t->looplet->fiber, sl, index, false);
        return term_expr(std::move(c));
      }
      return e;
    });
  }

  // Sieves on `index == e` become a mask term the passes can coiterate.
  CinStmtPtr mask_sieves(const CinStmtPtr& s, const std::string& index) {
    auto out = std::make_shared<CinStmt>(*s);
    switch (s->kind) {
      case StmtKind::Forall:
        if (s->index == index) return s;
        out->body = mask_sieves(s->body, index);
        return out;
      case StmtKind::Where:
        out->consumer = mask_sieves(s->consumer, index);
        out->producer = mask_sieves(s->producer, index);
        return out;
      case StmtKind::Multi:
        for (auto& p : out->parts) p = mask_sieves(p, index);
        return out;
      case StmtKind::Sieve: {
        out->body = mask_sieves(s->body, index);
        const auto& c = s->cond;
        if (c->kind == ExprKind::Call && c->op == Op::Eq && c->args.size() == 2) {
          for (int side = 0; side < 2; ++side) {
            const auto& a = c->args[side];
            const auto& other = c->args[1 - side];
            if (a->kind == ExprKind::Index && a->name == index && !mentions_index(other, index) &&
                closed_int(other)) {
              AccessTerm t;
              t.tensor = "mask";
              t.type = ElemType::Bool;
              t.head = index;
              t.looplet = mask_looplet(norm(to_texpr(other)));
              out->cond = term_expr(std::move(t));
              break;
            }
          }
        }
        return out;
      }
      default:
        return s;
    }
  }

  // Accesses whose head index is already bound are read at that index.
  CinStmtPtr resolve(const CinStmtPtr& s) {
    CinStmtPtr cur = s;
    for (;;) {
      bool changed = false;
      cur = map_exprs(cur, [&](const CinExprPtr& e) -> CinExprPtr {
        if (e->kind == ExprKind::Access && !e->slots.empty()) {
          const IndexSlot& sl = e->slots[0];
          if (sl.index->kind != ExprKind::Index)
            throw CompileError("opaque index in " + print(e));
          const std::string& h = sl.index->name;
          if (!bound_.count(h)) return e;
          check_readable(e->name);
          const TensorMeta& meta = meta_of(e->name);
          AccessTerm t;
          t.tensor = e->name;
          t.meta = &meta;
          t.type = meta.type;
          t.permit = has_permit(sl);
          add_slot_depends(t.depends, sl);
          LoopletPtr l = unfurl_slot(meta, root_of(meta), sl, h, true);
          changed = true;
          return payload_expr(t, point_at(l, meta.dims[0], h),
                              std::vector<IndexSlot>(e->slots.begin() + 1, e->slots.end()));
        }
        auto t = as_term(e);
        if (t && t->head.empty() && t->looplet->kind == LoopletKind::Fiber && !t->rest.empty()) {
          const IndexSlot& sl = t->rest[0];
          if (sl.index->kind != ExprKind::Index)
            throw CompileError("opaque index in access to " + t->tensor);
          const std::string& h = sl.index->name;
          if (!bound_.count(h)) return e;
          AccessTerm c = *t;
          c.permit = c.permit || has_permit(sl);
          add_slot_depends(c.depends, sl);
          const FiberRef& fr = t->looplet->fiber;
          LoopletPtr l = unfurl_slot(*t->meta, fr, sl, h, true);
          changed = true;
          return payload_expr(c, point_at(l, t->meta->dims[fr.level], h),
                              std::vector<IndexSlot>(t->rest.begin() + 1, t->rest.end()));
        }
        return e;
      });
      if (!changed) return cur;
    }
  }

  LoopletPtr point_at(const LoopletPtr& l, int64_t size, const std::string& h) {
    try {
      return point(push_shift(l), Extent{ir::lit(int64_t{1}), ir::lit(size)}, ir::var(h));
    } catch (const LoopletError& e) {
      throw CompileError(std::string(e.what()));
    }
  }

  // Statements ---------------------------------------------------------------------

  TStmt lower_stmt(const CinStmtPtr& s0) {
    CinStmtPtr s = simplify(resolve(s0), rules_, sopts_);
    if (auto t = find_headless_switch(s)) return expand_switch(s, t);
    switch (s->kind) {
      case StmtKind::Pass:
        return ir::nop();
      case StmtKind::Assign:
        return lower_assign(s);
      case StmtKind::Multi: {
        std::vector<TStmt> parts;
        for (const auto& p : s->parts) parts.push_back(lower_stmt(p));
        return ir::block(std::move(parts));
      }
      case StmtKind::Sieve:
        return ir::if_chain({{to_texpr(s->cond), lower_stmt(s->body)}});
      case StmtKind::Where:
        return lower_where(s);
      case StmtKind::Forall:
        return lower_forall(s);
    }
    return ir::nop();
  }

  TermPtr find_headless_switch(const CinStmtPtr& s) {
    TermPtr found;
    visit_exprs(s, [&](const CinExprPtr& e) {
      if (found) return;
      auto t = as_term(e);
      if (t && t->head.empty() && t->looplet->kind == LoopletKind::Switch) found = t;
    });
    return found;
  }

  TStmt expand_switch(const CinStmtPtr& s, const TermPtr& t) {
    const LoopletPtr& sw = t->looplet;
    std::vector<std::pair<TExpr, TStmt>> branches;
    TStmt otherwise;
    for (const auto& c : sw->cases) {
      auto d = decide(c.cond);
      if (d && !*d) continue;
      CinExprPtr rep = payload_expr(*t, c.body, t->rest);
      TStmt body = lower_stmt(replace_terms(s, {{t.get(), rep}}));
      if (d && *d) {
        otherwise = body;
        break;
      }
      branches.emplace_back(norm(c.cond), body);
    }
    TStmt chain = branches.empty() ? (otherwise ? otherwise : ir::nop())
                                   : ir::if_chain(std::move(branches), otherwise);
    if (sw->prelude) return ir::block({sw->prelude, chain});
    return chain;
  }

  TStmt lower_assign(const CinStmtPtr& s) {
    const std::string& name = s->lhs->name;
    auto w = writers_.find(name);
    if (w == writers_.end()) throw CompileError("no writer for " + name);
    std::vector<TExpr> idx;
    for (const auto& sl : s->lhs->slots) {
      if (!sl.mods.empty() || sl.proto)
        throw CompileError("modifiers are not allowed on the output " + name);
      idx.push_back(to_texpr(sl.index));
    }
    TExpr pos = norm(linear_position(meta_of(name), idx));
    return w->second.write(pos, s->op, to_texpr(s->rhs));
  }

  static CinStmtPtr drop_writes(const CinStmtPtr& s, const std::set<std::string>& dead) {
    switch (s->kind) {
      case StmtKind::Assign:
        return dead.count(s->lhs->name) ? cin::pass({s->lhs->name}) : s;
      case StmtKind::Pass:
        return s;
      default: {
        auto out = std::make_shared<CinStmt>(*s);
        if (s->body) out->body = drop_writes(s->body, dead);
        if (s->producer) out->producer = drop_writes(s->producer, dead);
        if (s->consumer) out->consumer = drop_writes(s->consumer, dead);
        for (auto& p : out->parts) p = drop_writes(p, dead);
        return out;
      }
    }
  }

  TStmt lower_where(const CinStmtPtr& s) {
    std::set<std::string> written = tensors_written(s->producer);
    for (const auto& t : tensors_passed(s->producer)) written.insert(t);
    std::set<std::string> read = names_read(s->consumer);
    std::vector<std::string> scoped;
    for (const auto& t : written)
      if (read.count(t) && where_scoped_.count(t) && !where_active_.count(t)) scoped.push_back(t);
    // A scoped temporary the consumer no longer reads (its uses were
    // annihilated in this region) is dead here, and so are its writes.
    std::set<std::string> dead;
    for (const auto& t : written)
      if (!read.count(t) && where_scoped_.count(t) && !where_active_.count(t)) dead.insert(t);
    CinStmtPtr producer = dead.empty() ? s->producer : drop_writes(s->producer, dead);
    std::vector<TStmt> out;
    for (const auto& t : scoped) {
      out.push_back(writers_.at(t).init);
      where_active_.insert(t);
    }
    out.push_back(lower_stmt(producer));
    for (const auto& t : scoped) out.push_back(writers_.at(t).finalize);
    out.push_back(lower_stmt(s->consumer));
    for (const auto& t : scoped) where_active_.erase(t);
    return ir::block(std::move(out));
  }

  // Foralls and passes -----------------------------------------------------------

  struct Loop {
    CinStmtPtr s;
    std::string index;
    Extent ext;
    std::vector<TermPtr> terms;
  };

  TStmt lower_forall(const CinStmtPtr& s) {
    if (!s->lo || !s->hi) throw CompileError("loop over " + s->index + " has no extent");
    Extent ext{norm(to_texpr(s->lo)), norm(to_texpr(s->hi))};
    if (auto d = decide(ir::le(ext.start, ext.stop)); d && !*d) return ir::nop();
    CinStmtPtr body = mask_sieves(unfurl_heads(s->body, s->index), s->index);

    // Push shifts inward so every head shows its real style.
    std::vector<TermPtr> terms;
    std::map<const VirtualTerm*, CinExprPtr> repl;
    visit_exprs(body, [&](const CinExprPtr& e) {
      auto t = as_term(e);
      if (!t || t->head != s->index || repl.count(t.get())) return;
      LoopletPtr l = push_shift(t->looplet);
      repl[t.get()] = l == t->looplet ? e : with_looplet(t, l);
    });
    body = replace_terms(body, repl);
    std::set<const VirtualTerm*> seen;
    visit_exprs(body, [&](const CinExprPtr& e) {
      auto t = as_term(e);
      if (t && t->head == s->index && seen.insert(t.get()).second) terms.push_back(t);
    });

    CinStmtPtr loop = cin::forall(s->index, body, bound_escape(ext.start), bound_escape(ext.stop),
                                  s->nonempty);
    Style style = Style::Terminal;
    for (const auto& t : terms) style = resolve_style(style, style_of(t->looplet));
    if (opts_.record_stages && stages_) stages_->push_back({style_name(style), print(loop)});

    Loop L{loop, s->index, ext, terms};
    switch (style) {
      case Style::Terminal:
        return lower_terminal(L, {});
      case Style::Lookup:
        return lower_lookup(L);
      case Style::Run:
        return lower_run(L);
      case Style::Spike:
        return lower_spike(L);
      case Style::Switch:
        return lower_switch(L);
      case Style::Pipeline:
        return lower_pipeline(L);
      case Style::Stepper:
        return lower_stepper(L);
      case Style::Jumper:
        return lower_jumper(L);
    }
    return ir::nop();
  }

  TStmt with_bound(const std::string& i, const CinStmtPtr& body) {
    bool had = bound_.count(i) > 0;
    bound_.insert(i);
    TStmt out = lower_stmt(body);
    if (!had) bound_.erase(i);
    return out;
  }

  // A loop that binds the index, with `repl` applied to the body.
  TStmt lower_terminal(const Loop& L, const std::map<const VirtualTerm*, CinExprPtr>& repl) {
    CinStmtPtr body = replace_terms(L.s->body, repl);
    if (auto d = decide(ir::eq(L.ext.start, L.ext.stop)); d && *d)
      return ir::block({ir::let(L.index, L.ext.start), with_bound(L.index, body)});
    return ir::for_loop(L.index, L.ext.start, L.ext.stop, with_bound(L.index, body));
  }

  TStmt lower_lookup(const Loop& L) {
    std::map<const VirtualTerm*, CinExprPtr> repl;
    for (const auto& t : L.terms)
      repl[t.get()] = payload_expr(*t, t->looplet->lookup(ir::var(L.index)), t->rest);
    return lower_terminal(L, repl);
  }

  TStmt region(const Loop& L, const TExpr& lo, const TExpr& hi, bool nonempty,
               const std::map<const VirtualTerm*, CinExprPtr>& repl) {
    return lower_stmt(cin::forall(L.index, replace_terms(L.s->body, repl), bound_escape(lo),
                                  bound_escape(hi), nonempty));
  }

  TStmt lower_run(const Loop& L) {
    std::map<const VirtualTerm*, CinExprPtr> repl;
    for (const auto& t : L.terms)
      if (t->looplet->kind == LoopletKind::Run)
        repl[t.get()] = payload_expr(*t, t->looplet->body, t->rest);
    return region(L, L.ext.start, L.ext.stop, L.s->nonempty, repl);
  }

  TStmt lower_spike(const Loop& L) {
    const Extent& E = L.ext;
    TExpr before = norm(ir::sub(E.stop, ir::lit(int64_t{1})));
    std::vector<TStmt> out;
    std::map<const VirtualTerm*, CinExprPtr> body_r, tail_r;
    for (const auto& t : L.terms) {
      const LoopletPtr& l = t->looplet;
      if (l->kind == LoopletKind::Spike) {
        body_r[t.get()] = with_looplet(t, lp::run(l->body));
        tail_r[t.get()] = with_looplet(t, lp::run(l->tail));
      } else {
        body_r[t.get()] = with_looplet(t, truncate(l, E, {E.start, before}));
        tail_r[t.get()] = with_looplet(t, truncate(l, E, {E.stop, E.stop}));
      }
    }
    if (auto d = decide(ir::le(E.start, before)); !d || *d)
      out.push_back(region(L, E.start, before, false, body_r));
    out.push_back(region(L, E.stop, E.stop, true, tail_r));
    TStmt b = ir::block(std::move(out));
    if (L.s->nonempty) return b;
    TExpr ok = norm(ir::le(E.start, E.stop));
    if (auto d = decide(ok); d && *d) return b;
    return ir::if_chain({{ok, b}});
  }

  TStmt lower_switch(const Loop& L) {
    std::vector<TermPtr> sw;
    std::vector<TStmt> preludes;
    size_t combos = 1;
    for (const auto& t : L.terms) {
      if (t->looplet->kind != LoopletKind::Switch) continue;
      sw.push_back(t);
      if (t->looplet->prelude) preludes.push_back(t->looplet->prelude);
      combos *= t->looplet->cases.size();
      if (combos > opts_.max_switch_branches)
        throw CompileError("switch over " + L.index + " needs more than " +
                           std::to_string(opts_.max_switch_branches) + " branches");
    }
    std::vector<size_t> pick(sw.size(), 0);
    std::vector<std::pair<TExpr, TStmt>> branches;
    TStmt otherwise;
    for (size_t n = 0; n < combos; ++n) {
      std::vector<TExpr> conds;
      std::map<const VirtualTerm*, CinExprPtr> repl;
      for (size_t k = 0; k < sw.size(); ++k) {
        const Case& c = sw[k]->looplet->cases[pick[k]];
        conds.push_back(c.cond);
        repl[sw[k].get()] = with_looplet(sw[k], c.body);
      }
      TExpr cond = norm(ir::land(conds));
      auto d = decide(cond);
      if (!d || *d) {
        TStmt body = region(L, L.ext.start, L.ext.stop, L.s->nonempty, repl);
        if (d) {
          otherwise = body;
          break;
        }
        branches.emplace_back(cond, body);
      }
      for (size_t k = sw.size(); k-- > 0;) {
        if (++pick[k] < sw[k]->looplet->cases.size()) break;
        pick[k] = 0;
      }
    }
    TStmt chain = branches.empty() ? (otherwise ? otherwise : ir::nop())
                                   : ir::if_chain(std::move(branches), otherwise);
    preludes.push_back(chain);
    return ir::block(std::move(preludes));
  }

  TStmt lower_pipeline(const Loop& L) {
    const Extent& E = L.ext;
    std::vector<TermPtr> pipes;
    std::vector<std::vector<Extent>> phase_ext;
    size_t combos = 1;
    for (const auto& t : L.terms) {
      if (t->looplet->kind != LoopletKind::Pipeline) continue;
      pipes.push_back(t);
      std::vector<Extent> exts;
      TExpr prev;
      for (const auto& ph : t->looplet->phases) {
        TExpr start = prev ? norm(ir::max({E.start, ir::add(prev, ir::lit(int64_t{1}))})) : E.start;
        TExpr stop = ph.stop ? ph.stop : E.stop;
        exts.push_back({start, stop});
        prev = stop;
      }
      combos *= exts.size();
      phase_ext.push_back(std::move(exts));
    }
    if (combos > 4096) throw CompileError("pipeline over " + L.index + " has too many phases");
    std::vector<size_t> pick(pipes.size(), 0);
    std::vector<TStmt> out;
    for (size_t n = 0; n < combos; ++n) {
      std::vector<TExpr> starts{E.start}, stops{E.stop};
      for (size_t k = 0; k < pipes.size(); ++k) {
        starts.push_back(phase_ext[k][pick[k]].start);
        stops.push_back(phase_ext[k][pick[k]].stop);
      }
      TExpr lo = norm(ir::max(starts)), hi = norm(ir::min(stops));
      auto feasible = decide(ir::le(lo, hi));
      if (!feasible || *feasible) {
        std::vector<TStmt> seq;
        if (!is_simple(lo)) {
          std::string v = fresh(L.index + "_lo");
          seq.push_back(ir::let(v, lo));
          lo = ir::var(v);
        }
        if (!is_simple(hi)) {
          std::string v = fresh(L.index + "_hi");
          seq.push_back(ir::let(v, hi));
          hi = ir::var(v);
        }
        Extent sub{lo, hi};
        std::map<const VirtualTerm*, CinExprPtr> repl;
        for (const auto& t : L.terms) {
          auto it = std::find(pipes.begin(), pipes.end(), t);
          if (it != pipes.end()) {
            size_t k = static_cast<size_t>(it - pipes.begin());
            repl[t.get()] = with_looplet(
                t, truncate(t->looplet->phases[pick[k]].body, phase_ext[k][pick[k]], sub));
          } else {
            repl[t.get()] = with_looplet(t, truncate(t->looplet, E, sub));
          }
        }
        TStmt body = region(L, lo, hi, true, repl);
        if (!is_nop(body)) {
          if (feasible) seq.push_back(body);
          else seq.push_back(ir::if_chain({{ir::le(lo, hi), body}}));
          out.push_back(ir::block(std::move(seq)));
        }
      }
      for (size_t k = pipes.size(); k-- > 0;) {
        if (++pick[k] < phase_ext[k].size()) break;
        pick[k] = 0;
      }
    }
    return ir::block(std::move(out));
  }

  TStmt lower_stepper(const Loop& L) {
    const Extent& E = L.ext;
    std::vector<TStmt> out;
    std::vector<TermPtr> steps;
    for (const auto& t : L.terms)
      if (t->looplet->kind == LoopletKind::Stepper) {
        steps.push_back(t);
        out.push_back(t->looplet->seek(E.start));
      }
    std::string step = fresh(L.index + "_step");
    out.push_back(ir::let(step, E.start));
    std::vector<TStmt> body;
    std::vector<TExpr> stops;
    std::vector<std::string> stop_vars;
    for (const auto& t : steps) {
      std::string v = fresh(L.index + "_stop");
      body.push_back(ir::let(v, t->looplet->value));
      stop_vars.push_back(v);
      stops.push_back(ir::var(v));
    }
    std::string stride = fresh(L.index + "_stride");
    stops.push_back(E.stop);
    body.push_back(ir::let(stride, norm(ir::min(stops))));
    Extent sub{ir::var(step), ir::var(stride)};
    std::map<const VirtualTerm*, CinExprPtr> repl;
    for (const auto& t : L.terms) {
      auto it = std::find(steps.begin(), steps.end(), t);
      if (it != steps.end()) {
        size_t k = static_cast<size_t>(it - steps.begin());
        Extent own{ir::var(step), ir::var(stop_vars[k])};
        repl[t.get()] = with_looplet(t, truncate(t->looplet->body, own, sub));
      } else {
        repl[t.get()] = with_looplet(t, truncate(t->looplet, E, sub));
      }
    }
    body.push_back(region(L, sub.start, sub.stop, true, repl));
    for (size_t k = 0; k < steps.size(); ++k)
      body.push_back(
          ir::if_chain({{ir::eq(ir::var(stride), ir::var(stop_vars[k])), steps[k]->looplet->next}}));
    body.push_back(ir::assign(step, ir::add(ir::var(stride), ir::lit(int64_t{1}))));
    out.push_back(ir::while_loop(ir::le(ir::var(step), E.stop), step, ir::block(std::move(body))));
    return ir::block(std::move(out));
  }

  TStmt lower_jumper(const Loop& L) {
    const Extent& E = L.ext;
    std::vector<TStmt> out;
    std::vector<TermPtr> jumps;
    for (const auto& t : L.terms) {
      auto k = t->looplet->kind;
      if (k == LoopletKind::Jumper) jumps.push_back(t);
      if (k == LoopletKind::Jumper || k == LoopletKind::Stepper) out.push_back(t->looplet->seek(E.start));
    }
    size_t m = jumps.size();
    if ((size_t{1} << m) - 1 > opts_.max_switch_branches)
      throw CompileError("too many jumpers over " + L.index);
    std::string step = fresh(L.index + "_step");
    out.push_back(ir::let(step, E.start));
    std::vector<TStmt> body;
    std::vector<std::string> stop_vars;
    std::vector<TExpr> stops;
    for (const auto& t : jumps) {
      std::string v = fresh(L.index + "_stop");
      body.push_back(ir::let(v, t->looplet->value));
      stop_vars.push_back(v);
      stops.push_back(ir::var(v));
    }
    std::string stride = fresh(L.index + "_stride");
    body.push_back(ir::let(stride, norm(ir::min({ir::max(stops), E.stop}))));
    Extent sub{ir::var(step), ir::var(stride)};

    auto as_stepper = [](const LoopletPtr& l) {
      return lp::stepper(l->seek, l->value, l->body, l->next);
    };
    auto branch = [&](uint64_t mask) {
      std::map<const VirtualTerm*, CinExprPtr> repl;
      std::vector<TStmt> nexts;
      for (const auto& t : L.terms) {
        auto it = std::find(jumps.begin(), jumps.end(), t);
        if (it == jumps.end()) {
          if (t->looplet->kind != LoopletKind::Stepper)
            repl[t.get()] = with_looplet(t, truncate(t->looplet, E, sub));
          continue;
        }
        size_t k = static_cast<size_t>(it - jumps.begin());
        if (mask >> k & 1) {
          repl[t.get()] = with_looplet(t, truncate(t->looplet->body, sub, sub));
          nexts.push_back(t->looplet->next);
        } else {
          repl[t.get()] = with_looplet(t, as_stepper(t->looplet));
        }
      }
      std::vector<TStmt> seq{region(L, sub.start, sub.stop, true, repl)};
      seq.insert(seq.end(), nexts.begin(), nexts.end());
      return ir::block(std::move(seq));
    };

    std::vector<uint64_t> masks;
    for (uint64_t mask = (uint64_t{1} << m) - 1; mask > 0; --mask) masks.push_back(mask);
    std::stable_sort(masks.begin(), masks.end(), [](uint64_t a, uint64_t b) {
      return __builtin_popcountll(a) > __builtin_popcountll(b);
    });
    std::vector<std::pair<TExpr, TStmt>> branches;
    for (uint64_t mask : masks) {
      std::vector<TExpr> conds;
      for (size_t k = 0; k < m; ++k)
        if (mask >> k & 1) conds.push_back(ir::eq(ir::var(stop_vars[k]), ir::var(stride)));
      branches.emplace_back(ir::land(conds), branch(mask));
    }
    body.push_back(ir::if_chain(std::move(branches), branch(0)));
    body.push_back(ir::assign(step, ir::add(ir::var(stride), ir::lit(int64_t{1}))));
    out.push_back(ir::while_loop(ir::le(ir::var(step), E.stop), step, ir::block(std::move(body))));
    return ir::block(std::move(out));
  }
};

void collect_indices(const CinStmtPtr& s, std::set<std::string>& out) {
  if (!s) return;
  if (s->kind == StmtKind::Forall) out.insert(s->index);
  collect_indices(s->body, out);
  collect_indices(s->consumer, out);
  collect_indices(s->producer, out);
  for (const auto& p : s->parts) collect_indices(p, out);
}

// Append-only outputs must see their coordinates in ascending order: the
// loops between the output's scope and the write must be exactly its
// indices, outermost first, optionally followed by reduction loops.
void check_append_order(const CinStmtPtr& s, const TensorMetas& metas,
                        const std::map<std::string, const CinStmt*>& scopes,
                        std::vector<std::string>& loops,
                        std::map<const CinStmt*, size_t>& entered) {
  if (!s) return;
  switch (s->kind) {
    case StmtKind::Assign: {
      const std::string& name = s->lhs->name;
      const TensorMeta& m = metas.at(name);
      bool append = false;
      for (LevelKind k : m.format) append = append || (k != LevelKind::Dense && k != LevelKind::Element);
      if (!append) return;
      size_t base = 0;
      auto sc = scopes.find(name);
      if (sc != scopes.end() && sc->second) base = entered.at(sc->second);
      auto fail = [&] {
        throw CompileError("non-ascending write to append-only output " + name + " in " +
                           print(s));
      };
      if (loops.size() - base < s->lhs->slots.size()) fail();
      for (size_t d = 0; d < s->lhs->slots.size(); ++d) {
        const auto& ix = s->lhs->slots[d].index;
        if (ix->kind != ExprKind::Index || ix->name != loops[base + d]) fail();
      }
      return;
    }
    case StmtKind::Forall:
      loops.push_back(s->index);
      check_append_order(s->body, metas, scopes, loops, entered);
      loops.pop_back();
      return;
    case StmtKind::Where:
      entered[s.get()] = loops.size();
      check_append_order(s->producer, metas, scopes, loops, entered);
      check_append_order(s->consumer, metas, scopes, loops, entered);
      return;
    case StmtKind::Sieve:
      check_append_order(s->body, metas, scopes, loops, entered);
      return;
    case StmtKind::Multi:
      for (const auto& p : s->parts) check_append_order(p, metas, scopes, loops, entered);
      return;
    case StmtKind::Pass:
      return;
  }
}

}  // namespace

CinStmtPtr bind_kernel(const CinStmtPtr& kernel, TensorMetas& metas, const Params& params) {
  CinStmtPtr s = bind_sizes(kernel, metas);
  s = infer_extents(s, metas, params);
  for (auto& [name, meta] : declare_outputs(s, metas, params)) metas.emplace(name, meta);
  check_bindings(s, metas);
  return s;
}

CompiledKernel compile_kernel(const CinStmtPtr& kernel, const TensorMetas& inputs,
                              const Params& params, const CompileOptions& opts) {
  CompiledKernel out;
  out.metas = inputs;
  for (auto& [name, meta] : out.metas) meta.name = name;
  out.bound = bind_kernel(kernel, out.metas, params);

  std::set<std::string> taken;
  collect_indices(out.bound, taken);
  std::map<std::string, int> counter;
  auto fresh = [&](const std::string& hint) {
    std::string n;
    do n = hint + std::to_string(++counter[hint]);
    while (taken.count(n));
    taken.insert(n);
    return n;
  };
  CinStmtPtr prepared = normalize_scatter(out.bound, out.metas, fresh);
  audit_binders(prepared);
  {
    std::vector<std::string> loops;
    std::map<const CinStmt*, size_t> entered;
    check_append_order(prepared, out.metas, result_scopes(prepared), loops, entered);
  }

  RuleSet standard;
  const RuleSet* rules = opts.rules;
  if (!rules) {
    standard = RuleSet::standard();
    rules = &standard;
  }
  SimplifyOptions so;
  so.metas = &out.metas;
  out.simplified = simplify(prepared, *rules, so);

  std::set<std::string> written = tensors_written(prepared);
  for (const auto& n : tensors_named(prepared))
    if (!written.count(n)) out.inputs.push_back(n);
  std::set<std::string> scoped;
  for (const auto& [name, where] : result_scopes(prepared))
    if (where) scoped.insert(name);
  // Where-scoped temporaries get writers but are not results of the kernel.
  std::vector<std::string> writers(written.begin(), written.end());
  for (const auto& t : written)
    if (!scoped.count(t)) out.outputs.push_back(t);

  Lowerer lw(out.metas, params, opts, *rules, &out.stages);
  out.program = lw.program(out.simplified, writers, scoped);
  return out;
}

std::string format_stages(const std::vector<Stage>& stages) {
  std::ostringstream os;
  for (size_t k = 0; k < stages.size(); ++k)
    os << "-- " << k + 1 << ": " << stages[k].pass << "\n" << stages[k].cin << "\n";
  return os.str();
}

}  // namespace coiter
