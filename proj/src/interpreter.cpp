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

#include "coiter/interpreter.hpp"

#include <json.hpp>
#include <unordered_map>

namespace coiter {

std::string counters_json(const ExecCounters& c, int indent) {
  nlohmann::ordered_json j;
  j["loop_iterations"] = c.loop_iterations;
  j["while_iterations"] = c.while_iterations;
  j["buffer_reads"] = c.buffer_reads;
  j["buffer_writes"] = c.buffer_writes;
  j["multiplies"] = c.multiplies;
  j["adds"] = c.adds;
  j["compares"] = c.compares;
  j["searches"] = c.searches;
  j["reads_by_buffer"] = c.reads_by_buffer;
  j["writes_by_buffer"] = c.writes_by_buffer;
  return j.dump(indent);
}

int64_t search_first_not_less(const std::vector<Value>& buf, int64_t lo, int64_t hi,
                              const Value& key) {
  if (lo < 0 || hi > static_cast<int64_t>(buf.size()) || lo > hi)
    throw ExecError("search range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                    ") outside buffer of length " + std::to_string(buf.size()));
  double k = key.as_double();
  while (lo < hi) {
    int64_t mid = lo + (hi - lo) / 2;
    if (buf[mid].as_double() < k) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return lo;
}

namespace {

// Programs are resolved once into slot-addressed nodes so the hot loop does
// no string lookups.
struct BufSlot {
  std::string name;
  std::vector<Value>* data = nullptr;
  uint64_t* reads = nullptr;
  uint64_t* writes = nullptr;
};

struct CExpr {
  TExprKind kind = TExprKind::Lit;
  Op op = Op::Identity;
  Value lit;
  int slot = -1;  // variable slot or buffer slot
  std::vector<CExpr> args;
};

struct CStmt {
  TStmtKind kind = TStmtKind::Nop;
  HookKind hook = HookKind::Init;
  UpdateOp op = UpdateOp::Overwrite;
  int slot = -1;  // variable or buffer
  std::string name;
  std::vector<CExpr> exprs;  // value first for Let/Assign/Write/While, then indices/bounds
  std::vector<CStmt> body;
  std::vector<CExpr> conds;  // If
};

}  // namespace

class Interpreter::Machine {
 public:
  Machine(Buffers& buffers, HookHandler* hooks, bool trace)
      : buffers_(buffers), hooks_(hooks), tracing_(trace) {}

  void bind_param(const std::string& name, const Value& v) {
    int s = var_slot(name);
    vars_[s] = v;
    bound_[s] = true;
  }

  CStmt compile(const TStmt& s) {
    CStmt c;
    c.kind = s->kind;
    c.name = s->name;
    c.op = s->op;
    c.hook = s->hook;
    switch (s->kind) {
      case TStmtKind::Nop:
        break;
      case TStmtKind::Block:
        for (const auto& b : s->body) c.body.push_back(compile(b));
        break;
      case TStmtKind::Let:
      case TStmtKind::Assign:
        c.slot = var_slot(s->name);
        c.exprs.push_back(compile(s->value));
        break;
      case TStmtKind::Write:
        c.slot = buf_slot(s->name);
        c.exprs.push_back(compile(s->value));
        c.exprs.push_back(compile(s->exprs[0]));
        break;
      case TStmtKind::For:
        c.slot = var_slot(s->name);
        c.exprs.push_back(compile(s->exprs[0]));
        c.exprs.push_back(compile(s->exprs[1]));
        c.body.push_back(compile(s->body[0]));
        break;
      case TStmtKind::While:
        c.slot = var_slot(s->name);
        c.exprs.push_back(compile(s->value));
        c.body.push_back(compile(s->body[0]));
        break;
      case TStmtKind::If:
        for (const auto& [cond, b] : s->branches) {
          c.conds.push_back(compile(cond));
          c.body.push_back(compile(b));
        }
        if (s->otherwise) c.body.push_back(compile(s->otherwise));
        break;
      case TStmtKind::Hook:
        if (s->hook == HookKind::Append) {
          c.exprs.push_back(compile(s->value));
          c.exprs.push_back(compile(s->exprs[0]));
        }
        break;
    }
    return c;
  }

  void exec(const CStmt& s) {
    switch (s.kind) {
      case TStmtKind::Nop:
        return;
      case TStmtKind::Block:
        for (const auto& b : s.body) exec(b);
        return;
      case TStmtKind::Let:
      case TStmtKind::Assign:
        vars_[s.slot] = eval(s.exprs[0]);
        bound_[s.slot] = true;
        return;
      case TStmtKind::Write: {
        Value v = eval(s.exprs[0]);
        int64_t i = eval_index(s.exprs[1]);
        BufSlot& b = bufs_[s.slot];
        check_bounds(b, i);
        if (v.is_missing()) throw ExecError("missing value written to " + b.name);
        Value& dst = (*b.data)[i];
        count_update(s.op);
        dst = apply_update(s.op, dst, v);
        ++counters.buffer_writes;
        ++*b.writes;
        if (tracing_) trace.push_back("write " + b.name);
        return;
      }
      case TStmtKind::For: {
        int64_t lo = eval_index(s.exprs[0]);
        int64_t hi = eval_index(s.exprs[1]);
        bound_[s.slot] = true;
        for (int64_t i = lo; i <= hi; ++i) {
          vars_[s.slot] = Value(i);
          ++counters.loop_iterations;
          exec(s.body[0]);
        }
        return;
      }
      case TStmtKind::While: {
        int slot = s.slot;
        while (true) {
          Value c = eval(s.exprs[0]);
          if (!c.is_bool()) throw ExecError("while condition is not boolean");
          if (!c.as_bool()) break;
          ++counters.loop_iterations;
          ++counters.while_iterations;
          if (!bound_[slot]) throw ExecError("unbound while cursor " + s.name);
          int64_t before = vars_[slot].as_int();
          exec(s.body[0]);
          int64_t after = vars_[slot].as_int();
          if (after <= before)
            throw ExecError("while loop over " + s.name + " made no progress at " +
                            std::to_string(before));
        }
        return;
      }
      case TStmtKind::If: {
        for (size_t k = 0; k < s.conds.size(); ++k) {
          Value c = eval(s.conds[k]);
          if (!c.is_bool()) throw ExecError("if condition is not boolean");
          if (c.as_bool()) {
            exec(s.body[k]);
            return;
          }
        }
        if (s.body.size() > s.conds.size()) exec(s.body.back());
        return;
      }
      case TStmtKind::Hook: {
        if (!hooks_) throw ExecError("no writer bound for " + s.name);
        switch (s.hook) {
          case HookKind::Init:
            hooks_->on_init(s.name, buffers_);
            refresh_buffers();
            return;
          case HookKind::Finalize:
            hooks_->on_finalize(s.name, buffers_);
            refresh_buffers();
            return;
          case HookKind::Append: {
            Value v = eval(s.exprs[0]);
            int64_t coord = eval_index(s.exprs[1]);
            if (v.is_missing()) throw ExecError("missing value written to " + s.name);
            count_update(s.op);
            ++counters.buffer_writes;
            ++counters.writes_by_buffer[s.name];
            if (tracing_) trace.push_back("write " + s.name);
            hooks_->on_append(s.name, coord, s.op, v, buffers_);
            return;
          }
        }
        return;
      }
    }
  }

  ExecCounters snapshot() const {
    ExecCounters c = counters;
    for (const auto& [name, n] : read_counts_)
      if (n) c.reads_by_buffer[name] += n;
    for (const auto& [name, n] : write_counts_)
      if (n) c.writes_by_buffer[name] += n;
    return c;
  }

  int var_slot(const std::string& name) {
    auto [it, inserted] = var_ids_.try_emplace(name, static_cast<int>(vars_.size()));
    if (inserted) {
      vars_.emplace_back();
      bound_.push_back(false);
      var_names_.push_back(name);
    }
    return it->second;
  }

  int buf_slot(const std::string& name) {
    auto [it, inserted] = buf_ids_.try_emplace(name, static_cast<int>(bufs_.size()));
    if (inserted) {
      BufSlot b;
      b.name = name;
      auto bit = buffers_.find(name);
      b.data = bit == buffers_.end() ? nullptr : &bit->second;
      b.reads = &read_counts_[name];
      b.writes = &write_counts_[name];
      bufs_.push_back(b);
    }
    return it->second;
  }

  void refresh_buffers() {
    for (auto& b : bufs_) {
      auto it = buffers_.find(b.name);
      b.data = it == buffers_.end() ? nullptr : &it->second;
    }
  }

  CExpr compile(const TExpr& e) {
    CExpr c;
    c.kind = e->kind;
    c.op = e->op;
    c.lit = e->lit;
    if (e->kind == TExprKind::Var) c.slot = var_slot(e->name);
    if (e->kind == TExprKind::Read || e->kind == TExprKind::Search) c.slot = buf_slot(e->name);
    for (const auto& a : e->args) c.args.push_back(compile(a));
    return c;
  }

  void check_bounds(const BufSlot& b, int64_t i) const {
    if (!b.data) throw ExecError("unbound buffer " + b.name);
    if (i < 0 || i >= static_cast<int64_t>(b.data->size()))
      throw ExecError("index " + std::to_string(i) + " out of bounds for " + b.name +
                      " of length " + std::to_string(b.data->size()));
  }

  void count_update(UpdateOp op) {
    if (op == UpdateOp::Add) {
      ++counters.adds;
      if (tracing_) trace.emplace_back("add");
    } else if (op == UpdateOp::Mul) {
      ++counters.multiplies;
      if (tracing_) trace.emplace_back("mul");
    } else if (op == UpdateOp::Min || op == UpdateOp::Max) {
      ++counters.compares;
      if (tracing_) trace.emplace_back("cmp");
    }
  }

  int64_t eval_index(const CExpr& e) {
    Value v = eval(e);
    if (!v.is_int()) throw ExecError("index expression did not produce an integer: " + to_string(v));
    return v.as_int();
  }

  ExecCounters counters;
  std::vector<std::string> trace;

  Value get(const std::string& name) {
    int s = var_slot(name);
    if (!bound_[s]) throw ExecError("unbound symbol " + name);
    return vars_[s];
  }

  Value eval_top(const TExpr& e) { return eval(compile(e)); }


  Value eval(const CExpr& e) {
    switch (e.kind) {
      case TExprKind::Lit:
        return e.lit;
      case TExprKind::Var:
        if (!bound_[e.slot]) throw ExecError("unbound symbol " + var_names_[e.slot]);
        return vars_[e.slot];
      case TExprKind::Read: {
        int64_t i = eval_index(e.args[0]);
        BufSlot& b = bufs_[e.slot];
        check_bounds(b, i);
        ++counters.buffer_reads;
        ++*b.reads;
        if (tracing_) trace.push_back("read " + b.name);
        return (*b.data)[i];
      }
      case TExprKind::Search: {
        int64_t lo = eval_index(e.args[0]);
        int64_t hi = eval_index(e.args[1]);
        Value key = eval(e.args[2]);
        BufSlot& b = bufs_[e.slot];
        if (!b.data) throw ExecError("unbound buffer " + b.name);
        ++counters.searches;
        if (tracing_) trace.push_back("search " + b.name);
        return Value(search_first_not_less(*b.data, lo, hi, key));
      }
      case TExprKind::LAnd:
      case TExprKind::LOr: {
        bool is_and = e.kind == TExprKind::LAnd;
        for (const auto& a : e.args) {
          Value v = eval(a);
          if (!v.is_bool()) throw ExecError("logical operand is not boolean: " + to_string(v));
          if (v.as_bool() != is_and) return Value(!is_and);
        }
        return Value(is_and);
      }
      case TExprKind::Select: {
        Value c = eval(e.args[0]);
        if (!c.is_bool()) throw ExecError("select condition is not boolean");
        return eval(c.as_bool() ? e.args[1] : e.args[2]);
      }
      case TExprKind::Call: {
        Value small[4];
        std::vector<Value> big;
        std::span<const Value> args;
        size_t n = e.args.size();
        if (n <= 4) {
          for (size_t k = 0; k < n; ++k) small[k] = eval(e.args[k]);
          args = std::span<const Value>(small, n);
        } else {
          big.reserve(n);
          for (const auto& a : e.args) big.push_back(eval(a));
          args = big;
        }
        count_call(e.op, n);
        try {
          return apply_op(e.op, args);
        } catch (const ValueError& err) {
          throw ExecError(err.what());
        }
      }
    }
    return {};
  }

  void count_call(Op op, size_t n) {
    uint64_t k = n > 1 ? n - 1 : 0;
    switch (op) {
      case Op::Mul:
        counters.multiplies += k;
        if (tracing_) for (uint64_t j = 0; j < k; ++j) trace.emplace_back("mul");
        break;
      case Op::Add:
      case Op::Sub:
        counters.adds += k;
        if (tracing_) for (uint64_t j = 0; j < k; ++j) trace.emplace_back("add");
        break;
      case Op::Min:
      case Op::Max:
        counters.compares += k;
        if (tracing_) for (uint64_t j = 0; j < k; ++j) trace.emplace_back("cmp");
        break;
      case Op::Eq:
      case Op::Ne:
      case Op::Lt:
      case Op::Le:
      case Op::Gt:
      case Op::Ge:
        ++counters.compares;
        if (tracing_) trace.emplace_back("cmp");
        break;
      default:
        break;
    }
  }

  Buffers& buffers_;
  HookHandler* hooks_;
  bool tracing_;
  std::unordered_map<std::string, int> var_ids_;
  std::vector<Value> vars_;
  std::vector<bool> bound_;
  std::vector<std::string> var_names_;
  std::unordered_map<std::string, int> buf_ids_;
  std::vector<BufSlot> bufs_;
  std::map<std::string, uint64_t> read_counts_;
  std::map<std::string, uint64_t> write_counts_;
};

Interpreter::Interpreter(Buffers& buffers, HookHandler* hooks, bool trace)
    : m_(std::make_unique<Machine>(buffers, hooks, trace)) {}
Interpreter::~Interpreter() = default;

void Interpreter::set(const std::string& name, const Value& v) { m_->bind_param(name, v); }
Value Interpreter::get(const std::string& name) { return m_->get(name); }
void Interpreter::run(const TStmt& s) { m_->exec(m_->compile(s ? s : ir::nop())); }
Value Interpreter::eval(const TExpr& e) { return m_->eval_top(e); }

ExecResult Interpreter::result() { return ExecResult{m_->snapshot(), m_->trace}; }

ExecResult interpret(const TStmt& prog, Buffers& buffers, const std::map<std::string, Value>& params,
                     HookHandler* hooks, bool trace) {
  Interpreter m(buffers, hooks, trace);
  for (const auto& [k, v] : params) m.set(k, v);
  m.run(prog);
  return m.result();
}

}  // namespace coiter
