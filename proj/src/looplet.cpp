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

#include "coiter/looplet.hpp"

#include <algorithm>
#include <optional>
#include <sstream>

namespace coiter {

namespace {

TExpr norm(const TExpr& e) { return normalize_index(e); }

std::optional<bool> decide(const TExpr& cond) {
  auto v = const_value(norm(cond));
  if (v && v->is_bool()) return v->as_bool();
  return std::nullopt;
}

std::shared_ptr<Looplet> make(LoopletKind k) {
  auto l = std::make_shared<Looplet>();
  l->kind = k;
  return l;
}

}  // namespace

Extent shift_extent(const Extent& e, const TExpr& delta) {
  return {norm(ir::sub(e.start, delta)), norm(ir::sub(e.stop, delta))};
}

const char* looplet_kind_name(LoopletKind k) {
  switch (k) {
    case LoopletKind::Leaf: return "Leaf";
    case LoopletKind::Fiber: return "Fiber";
    case LoopletKind::Run: return "Run";
    case LoopletKind::Spike: return "Spike";
    case LoopletKind::Lookup: return "Lookup";
    case LoopletKind::Switch: return "Switch";
    case LoopletKind::Pipeline: return "Pipeline";
    case LoopletKind::Stepper: return "Stepper";
    case LoopletKind::Jumper: return "Jumper";
    case LoopletKind::Shift: return "Shift";
    case LoopletKind::Simplify: return "Simplify";
  }
  return "?";
}

namespace lp {

LoopletPtr leaf(TExpr value) {
  auto l = make(LoopletKind::Leaf);
  l->value = std::move(value);
  return l;
}

LoopletPtr fiber(FiberRef f) {
  auto l = make(LoopletKind::Fiber);
  l->fiber = std::move(f);
  return l;
}

LoopletPtr run(LoopletPtr body) {
  auto l = make(LoopletKind::Run);
  l->body = std::move(body);
  return l;
}

LoopletPtr run(TExpr value) { return run(leaf(std::move(value))); }

LoopletPtr spike(LoopletPtr body, LoopletPtr tail) {
  auto l = make(LoopletKind::Spike);
  l->body = std::move(body);
  l->tail = std::move(tail);
  return l;
}

LoopletPtr lookup(std::string index_sym, LookupFn f) {
  auto l = make(LoopletKind::Lookup);
  l->index_sym = std::move(index_sym);
  l->lookup = std::move(f);
  return l;
}

LoopletPtr switch_of(std::vector<Case> cases, TStmt prelude) {
  if (cases.empty()) throw LoopletError("switch without cases");
  if (!prelude || is_nop(prelude)) {
    // A leading always-true case makes the rest unreachable.
    auto v = const_value(cases[0].cond);
    if (v && v->is_bool() && v->as_bool()) return cases[0].body;
  }
  auto l = make(LoopletKind::Switch);
  l->cases = std::move(cases);
  l->prelude = prelude && !is_nop(prelude) ? std::move(prelude) : nullptr;
  return l;
}

LoopletPtr pipeline(std::vector<Phase> phases) {
  auto l = make(LoopletKind::Pipeline);
  l->phases = std::move(phases);
  return l;
}

LoopletPtr stepper(SeekFn seek, TExpr stop, LoopletPtr body, TStmt next) {
  auto l = make(LoopletKind::Stepper);
  l->seek = std::move(seek);
  l->value = std::move(stop);
  l->body = std::move(body);
  l->next = std::move(next);
  return l;
}

LoopletPtr jumper(SeekFn seek, TExpr stop, LoopletPtr body, TStmt next) {
  auto l = make(LoopletKind::Jumper);
  l->seek = std::move(seek);
  l->value = std::move(stop);
  l->body = std::move(body);
  l->next = std::move(next);
  return l;
}

LoopletPtr shift(TExpr delta, LoopletPtr body) {
  auto c = const_int(delta);
  if (c && *c == 0) return body;
  auto l = make(LoopletKind::Shift);
  l->value = std::move(delta);
  l->body = std::move(body);
  return l;
}

LoopletPtr simplify(LoopletPtr body) {
  auto l = make(LoopletKind::Simplify);
  l->body = std::move(body);
  return l;
}

}  // namespace lp

// Styles ---------------------------------------------------------------------------

const char* style_name(Style s) {
  switch (s) {
    case Style::Terminal: return "TerminalStyle";
    case Style::Lookup: return "LookupStyle";
    case Style::Stepper: return "StepperStyle";
    case Style::Jumper: return "JumperStyle";
    case Style::Pipeline: return "PipelineStyle";
    case Style::Spike: return "SpikeStyle";
    case Style::Run: return "RunStyle";
    case Style::Switch: return "SwitchStyle";
  }
  return "?";
}

Style style_of(const LoopletPtr& l) {
  switch (l->kind) {
    case LoopletKind::Leaf:
    case LoopletKind::Fiber: return Style::Terminal;
    case LoopletKind::Run: return Style::Run;
    case LoopletKind::Spike: return Style::Spike;
    case LoopletKind::Lookup: return Style::Lookup;
    case LoopletKind::Switch: return Style::Switch;
    case LoopletKind::Pipeline: return Style::Pipeline;
    case LoopletKind::Stepper: return Style::Stepper;
    case LoopletKind::Jumper: return Style::Jumper;
    case LoopletKind::Shift:
    case LoopletKind::Simplify: return style_of(l->body);
  }
  return Style::Terminal;
}

Style resolve_style(Style a, Style b) { return static_cast<int>(a) >= static_cast<int>(b) ? a : b; }

// Truncation -----------------------------------------------------------------------

namespace {

TExpr phase_start(const Extent& ext, const TExpr& prev_stop) {
  if (!prev_stop) return ext.start;
  return norm(ir::max({ext.start, ir::add(prev_stop, ir::lit(1))}));
}

}  // namespace

LoopletPtr truncate(const LoopletPtr& l, const Extent& target, const Extent& sub) {
  switch (l->kind) {
    case LoopletKind::Leaf:
    case LoopletKind::Fiber:
    case LoopletKind::Run:
    case LoopletKind::Lookup:
    case LoopletKind::Stepper:
    case LoopletKind::Jumper:
      return l;
    case LoopletKind::Spike: {
      TExpr same = norm(ir::eq(sub.stop, target.stop));
      auto d = decide(same);
      if (d) return *d ? l : lp::run(l->body);
      return lp::switch_of({{same, l}, {ir::lit(true), lp::run(l->body)}});
    }
    case LoopletKind::Switch: {
      std::vector<Case> cases;
      for (const auto& c : l->cases) cases.push_back({c.cond, truncate(c.body, target, sub)});
      return lp::switch_of(std::move(cases), l->prelude);
    }
    case LoopletKind::Pipeline: {
      std::vector<Phase> phases;
      TExpr prev_t, prev_s;
      for (const auto& ph : l->phases) {
        TExpr stop_t = ph.stop ? ph.stop : target.stop;
        TExpr stop_s = ph.stop ? norm(ir::min({ph.stop, sub.stop})) : sub.stop;
        Extent from{phase_start(target, prev_t), stop_t};
        Extent to{phase_start(sub, prev_s), stop_s};
        phases.push_back({ph.stop ? stop_s : nullptr, truncate(ph.body, from, to)});
        prev_t = stop_t;
        prev_s = stop_s;
      }
      return lp::pipeline(std::move(phases));
    }
    case LoopletKind::Shift:
      return lp::shift(l->value, truncate(l->body, shift_extent(target, l->value),
                                          shift_extent(sub, l->value)));
    case LoopletKind::Simplify:
      return lp::simplify(truncate(l->body, target, sub));
  }
  return l;
}

// Shift normalization ------------------------------------------------------------

LoopletPtr push_shift(const LoopletPtr& l) {
  if (l->kind == LoopletKind::Simplify) return push_shift(l->body);
  if (l->kind != LoopletKind::Shift) return l;
  TExpr d = l->value;
  const LoopletPtr& b = l->body;
  switch (b->kind) {
    case LoopletKind::Shift:
      return push_shift(lp::shift(norm(ir::add(d, b->value)), b->body));
    case LoopletKind::Simplify:
      return push_shift(lp::shift(d, b->body));
    case LoopletKind::Leaf:
    case LoopletKind::Fiber:
    case LoopletKind::Run:
    case LoopletKind::Spike:
      // Payloads do not depend on position, and a spike's tail sits at the
      // last index of whatever region it covers.
      return b;
    case LoopletKind::Lookup: {
      LookupFn f = b->lookup;
      return lp::lookup(b->index_sym,
                        [f, d](const TExpr& x) { return f(norm(ir::sub(x, d))); });
    }
    case LoopletKind::Switch: {
      std::vector<Case> cases;
      for (const auto& c : b->cases) cases.push_back({c.cond, lp::shift(d, c.body)});
      return lp::switch_of(std::move(cases), b->prelude);
    }
    case LoopletKind::Pipeline: {
      std::vector<Phase> phases;
      for (const auto& ph : b->phases)
        phases.push_back({ph.stop ? norm(ir::add(ph.stop, d)) : nullptr, lp::shift(d, ph.body)});
      return lp::pipeline(std::move(phases));
    }
    case LoopletKind::Stepper:
    case LoopletKind::Jumper: {
      SeekFn seek = b->seek;
      SeekFn shifted = [seek, d](const TExpr& s) { return seek(norm(ir::sub(s, d))); };
      TExpr stop = norm(ir::add(b->value, d));
      LoopletPtr body = lp::shift(d, b->body);
      return b->kind == LoopletKind::Stepper ? lp::stepper(shifted, stop, body, b->next)
                                             : lp::jumper(shifted, stop, body, b->next);
    }
  }
  return b;
}

// Points ---------------------------------------------------------------------------

LoopletPtr point(const LoopletPtr& l, const Extent& ext, const TExpr& x) {
  switch (l->kind) {
    case LoopletKind::Leaf:
    case LoopletKind::Fiber:
      return l;
    case LoopletKind::Run:
      return l->body;
    case LoopletKind::Spike: {
      TExpr at_end = norm(ir::eq(x, ext.stop));
      auto d = decide(at_end);
      if (d) return *d ? l->tail : l->body;
      return lp::switch_of({{at_end, l->tail}, {ir::lit(true), l->body}});
    }
    case LoopletKind::Lookup:
      return l->lookup(x);
    case LoopletKind::Switch: {
      std::vector<Case> cases;
      for (const auto& c : l->cases) cases.push_back({c.cond, point(c.body, ext, x)});
      return lp::switch_of(std::move(cases), l->prelude);
    }
    case LoopletKind::Pipeline: {
      std::vector<Case> cases;
      TExpr prev;
      for (size_t k = 0; k < l->phases.size(); ++k) {
        const Phase& ph = l->phases[k];
        bool last = k + 1 == l->phases.size() || !ph.stop;
        TExpr stop = ph.stop ? ph.stop : ext.stop;
        Extent pe{phase_start(ext, prev), stop};
        TExpr cond = last ? ir::lit(true) : norm(ir::le(x, stop));
        auto d = decide(cond);
        if (d && !*d) {
          prev = stop;
          continue;
        }
        cases.push_back({cond, point(ph.body, pe, x)});
        if (last || d) break;
        prev = stop;
      }
      if (cases.empty()) throw LoopletError("point lies beyond every pipeline phase");
      return lp::switch_of(std::move(cases));
    }
    case LoopletKind::Shift:
      return point(l->body, shift_extent(ext, l->value), norm(ir::sub(x, l->value)));
    case LoopletKind::Simplify:
      return point(l->body, ext, x);
    case LoopletKind::Stepper:
    case LoopletKind::Jumper:
      throw LoopletError(std::string(looplet_kind_name(l->kind)) + " has no point form");
  }
  return l;
}

// Materialization ------------------------------------------------------------------

namespace {

int64_t eval_int(Interpreter& env, const TExpr& e) {
  Value v = env.eval(e);
  if (!v.is_int()) throw LoopletError("extent expression is not an integer: " + print(e));
  return v.as_int();
}

MatItem resolve_payload(const LoopletPtr& l, Interpreter& env) {
  switch (l->kind) {
    case LoopletKind::Leaf: {
      MatItem m;
      m.value = env.eval(l->value);
      return m;
    }
    case LoopletKind::Fiber: {
      MatItem m;
      m.is_fiber = true;
      m.fiber = l->fiber;
      if (!l->fiber.fill_only) m.pos = eval_int(env, l->fiber.pos);
      return m;
    }
    case LoopletKind::Switch: {
      if (l->prelude) env.run(l->prelude);
      for (const auto& c : l->cases) {
        Value v = env.eval(c.cond);
        if (!v.is_bool()) throw LoopletError("switch condition is not boolean");
        if (v.as_bool()) return resolve_payload(c.body, env);
      }
      throw LoopletError("switch with no true case");
    }
    default:
      throw LoopletError(std::string("expected a payload, found ") + looplet_kind_name(l->kind));
  }
}

void mat(const LoopletPtr& l, int64_t lo, int64_t hi, Interpreter& env, std::vector<MatItem>& out) {
  if (lo > hi) return;
  switch (l->kind) {
    case LoopletKind::Leaf:
    case LoopletKind::Fiber:
    case LoopletKind::Run: {
      MatItem m = resolve_payload(l->kind == LoopletKind::Run ? l->body : l, env);
      out.insert(out.end(), static_cast<size_t>(hi - lo + 1), m);
      return;
    }
    case LoopletKind::Spike: {
      MatItem b = resolve_payload(l->body, env);
      out.insert(out.end(), static_cast<size_t>(hi - lo), b);
      out.push_back(resolve_payload(l->tail, env));
      return;
    }
    case LoopletKind::Lookup:
      for (int64_t x = lo; x <= hi; ++x) out.push_back(resolve_payload(l->lookup(ir::lit(x)), env));
      return;
    case LoopletKind::Switch: {
      if (l->prelude) env.run(l->prelude);
      for (const auto& c : l->cases) {
        Value v = env.eval(c.cond);
        if (!v.is_bool()) throw LoopletError("switch condition is not boolean");
        if (v.as_bool()) return mat(c.body, lo, hi, env, out);
      }
      throw LoopletError("switch with no true case");
    }
    case LoopletKind::Pipeline: {
      int64_t prev = lo - 1;
      for (const auto& ph : l->phases) {
        int64_t start = std::max(lo, prev + 1);
        int64_t stop = ph.stop ? eval_int(env, ph.stop) : hi;
        if (start <= std::min(stop, hi)) {
          std::vector<MatItem> part;
          mat(ph.body, start, stop, env, part);
          part.resize(static_cast<size_t>(std::min(stop, hi) - start + 1));
          out.insert(out.end(), part.begin(), part.end());
        }
        prev = std::max(prev, stop);
        if (prev >= hi) break;
      }
      if (prev < hi) throw LoopletError("pipeline phases do not cover the extent");
      return;
    }
    case LoopletKind::Stepper:
    case LoopletKind::Jumper: {
      env.run(l->seek(ir::lit(lo)));
      int64_t step = lo;
      while (step <= hi) {
        int64_t stop = eval_int(env, l->value);
        if (stop < step)
          throw LoopletError("stepper child ends at " + std::to_string(stop) + " before " +
                             std::to_string(step));
        int64_t stride = std::min(stop, hi);
        std::vector<MatItem> part;
        mat(l->body, step, stop, env, part);
        part.resize(static_cast<size_t>(stride - step + 1));
        out.insert(out.end(), part.begin(), part.end());
        if (stride == stop) env.run(l->next);
        step = stride + 1;
      }
      return;
    }
    case LoopletKind::Shift: {
      int64_t d = eval_int(env, l->value);
      mat(l->body, lo - d, hi - d, env, out);
      return;
    }
    case LoopletKind::Simplify:
      mat(l->body, lo, hi, env, out);
      return;
  }
}

}  // namespace

std::vector<MatItem> materialize(const LoopletPtr& l, int64_t lo, int64_t hi, Interpreter& env) {
  std::vector<MatItem> out;
  mat(l, lo, hi, env, out);
  return out;
}

std::vector<Value> materialize_values(const LoopletPtr& l, int64_t lo, int64_t hi,
                                      Interpreter& env) {
  std::vector<Value> out;
  for (const auto& m : materialize(l, lo, hi, env)) {
    if (m.is_fiber) throw LoopletError("materialized a subfiber where a scalar was expected");
    out.push_back(m.value);
  }
  return out;
}

// Rendering --------------------------------------------------------------------------

namespace {

std::string one_line(const TStmt& s) {
  std::string text = print_ir(s);
  std::string out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    size_t k = line.find_first_not_of(' ');
    if (k == std::string::npos) continue;
    if (!out.empty()) out += "; ";
    out += line.substr(k);
  }
  return out;
}

std::string fiber_text(const FiberRef& f) {
  std::string name = f.meta ? f.meta->name : "?";
  if (f.fill_only) return "Fiber(" + name + ", level=" + std::to_string(f.level + 1) + ", fill)";
  return "Fiber(" + name + ", level=" + std::to_string(f.level + 1) + ", pos=" + print(f.pos) + ")";
}

void render_to(std::ostringstream& os, const LoopletPtr& l, int depth) {
  std::string pad(static_cast<size_t>(depth) * 2, ' ');
  switch (l->kind) {
    case LoopletKind::Leaf:
      os << pad << print(l->value) << '\n';
      return;
    case LoopletKind::Fiber:
      os << pad << fiber_text(l->fiber) << '\n';
      return;
    case LoopletKind::Run:
      os << pad << "Run(body=" << render_inline(l->body) << ")\n";
      return;
    case LoopletKind::Spike:
      os << pad << "Spike(body=" << render_inline(l->body) << ", tail=" << render_inline(l->tail)
         << ")\n";
      return;
    case LoopletKind::Lookup:
      os << pad << "Lookup(index=" << l->index_sym << ")\n";
      render_to(os, l->lookup(ir::var(l->index_sym)), depth + 1);
      return;
    case LoopletKind::Switch:
      os << pad << "Switch(";
      if (l->prelude) os << "prelude=" << one_line(l->prelude);
      os << ")\n";
      for (const auto& c : l->cases) {
        os << pad << "  Case(cond=" << print(c.cond) << ")\n";
        render_to(os, c.body, depth + 2);
      }
      return;
    case LoopletKind::Pipeline:
      os << pad << "Pipeline()\n";
      for (const auto& ph : l->phases) {
        os << pad << "  Phase(";
        if (ph.stop) os << "stop=" << print(ph.stop);
        os << ")\n";
        render_to(os, ph.body, depth + 2);
      }
      return;
    case LoopletKind::Stepper:
    case LoopletKind::Jumper:
      os << pad << looplet_kind_name(l->kind) << "(seek=" << one_line(l->seek(ir::var("start")))
         << ", stop=" << print(l->value) << ", next=" << one_line(l->next) << ")\n";
      render_to(os, l->body, depth + 1);
      return;
    case LoopletKind::Shift:
      os << pad << "Shift(delta=" << print(l->value) << ")\n";
      render_to(os, l->body, depth + 1);
      return;
    case LoopletKind::Simplify:
      os << pad << "Simplify()\n";
      render_to(os, l->body, depth + 1);
      return;
  }
}

}  // namespace

std::string render(const LoopletPtr& l) {
  std::ostringstream os;
  render_to(os, l, 0);
  return os.str();
}

std::string render_inline(const LoopletPtr& l) {
  switch (l->kind) {
    case LoopletKind::Leaf: return print(l->value);
    case LoopletKind::Fiber: return fiber_text(l->fiber);
    case LoopletKind::Run: return "Run(" + render_inline(l->body) + ")";
    case LoopletKind::Spike:
      return "Spike(" + render_inline(l->body) + ", " + render_inline(l->tail) + ")";
    case LoopletKind::Switch: {
      std::string s = "Switch(";
      for (size_t k = 0; k < l->cases.size(); ++k) {
        if (k) s += ", ";
        s += print(l->cases[k].cond) + " => " + render_inline(l->cases[k].body);
      }
      return s + ")";
    }
    case LoopletKind::Shift:
      return "Shift(" + print(l->value) + ", " + render_inline(l->body) + ")";
    default:
      return std::string(looplet_kind_name(l->kind)) + "(...)";
  }
}

}  // namespace coiter
