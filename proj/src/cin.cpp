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

#include "coiter/cin.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

namespace coiter {

namespace cin {

CinExprPtr lit(Value v) {
  auto e = std::make_shared<CinExpr>();
  e->kind = ExprKind::Literal;
  e->value = v;
  return e;
}

CinExprPtr index(std::string name) {
  auto e = std::make_shared<CinExpr>();
  e->kind = ExprKind::Index;
  e->name = std::move(name);
  return e;
}

CinExprPtr param(std::string name) {
  auto e = std::make_shared<CinExpr>();
  e->kind = ExprKind::Param;
  e->name = std::move(name);
  return e;
}

CinExprPtr call(Op op, std::vector<CinExprPtr> args) {
  auto e = std::make_shared<CinExpr>();
  e->kind = ExprKind::Call;
  e->op = op;
  e->args = std::move(args);
  return e;
}

CinExprPtr access(std::string tensor, std::vector<IndexSlot> slots) {
  auto e = std::make_shared<CinExpr>();
  e->kind = ExprKind::Access;
  e->name = std::move(tensor);
  e->slots = std::move(slots);
  return e;
}

CinExprPtr access(std::string tensor, const std::vector<std::string>& indices) {
  std::vector<IndexSlot> slots;
  for (const auto& i : indices) slots.push_back(IndexSlot{index(i), {}, std::nullopt});
  return access(std::move(tensor), std::move(slots));
}

CinExprPtr size_of(std::string tensor, int64_t dim) {
  auto e = std::make_shared<CinExpr>();
  e->kind = ExprKind::Size;
  e->name = std::move(tensor);
  e->dim = dim;
  return e;
}

CinExprPtr escape(TExpr x, std::optional<ElemType> type) {
  if (auto c = const_value(x)) return lit(*c);
  auto e = std::make_shared<CinExpr>();
  e->kind = ExprKind::Escape;
  e->escape = std::move(x);
  e->type = type;
  return e;
}

CinExprPtr virt(std::shared_ptr<const VirtualTerm> v) {
  auto e = std::make_shared<CinExpr>();
  e->kind = ExprKind::Virtual;
  e->virt = std::move(v);
  return e;
}

CinStmtPtr assign(CinExprPtr lhs, UpdateOp op, CinExprPtr rhs) {
  auto s = std::make_shared<CinStmt>();
  s->kind = StmtKind::Assign;
  s->lhs = std::move(lhs);
  s->op = op;
  s->rhs = std::move(rhs);
  return s;
}

CinStmtPtr forall(std::string idx, CinStmtPtr body, CinExprPtr lo, CinExprPtr hi, bool nonempty) {
  auto s = std::make_shared<CinStmt>();
  s->kind = StmtKind::Forall;
  s->index = std::move(idx);
  s->body = std::move(body);
  s->lo = std::move(lo);
  s->hi = std::move(hi);
  s->nonempty = nonempty;
  return s;
}

CinStmtPtr where(CinStmtPtr consumer, CinStmtPtr producer) {
  auto s = std::make_shared<CinStmt>();
  s->kind = StmtKind::Where;
  s->consumer = std::move(consumer);
  s->producer = std::move(producer);
  return s;
}

CinStmtPtr multi(std::vector<CinStmtPtr> parts) {
  auto s = std::make_shared<CinStmt>();
  s->kind = StmtKind::Multi;
  s->parts = std::move(parts);
  return s;
}

CinStmtPtr sieve(CinExprPtr cond, CinStmtPtr body) {
  auto s = std::make_shared<CinStmt>();
  s->kind = StmtKind::Sieve;
  s->cond = std::move(cond);
  s->body = std::move(body);
  return s;
}

CinStmtPtr pass(std::vector<std::string> tensors) {
  auto s = std::make_shared<CinStmt>();
  s->kind = StmtKind::Pass;
  s->tensors = std::move(tensors);
  return s;
}

}  // namespace cin

// Printing ----------------------------------------------------------------------

namespace {

int infix_prec(Op op) {
  switch (op) {
    case Op::Or: return 1;
    case Op::And: return 2;
    case Op::Eq: case Op::Ne: case Op::Lt: case Op::Le: case Op::Gt: case Op::Ge: return 3;
    case Op::Add: case Op::Sub: return 4;
    case Op::Mul: case Op::Div: case Op::Mod: return 5;
    case Op::Pow: return 7;
    default: return 0;
  }
}

const char* infix_token(Op op) {
  switch (op) {
    case Op::Or: return "||";
    case Op::And: return "&&";
    case Op::Eq: return "==";
    case Op::Ne: return "!=";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Gt: return ">";
    case Op::Ge: return ">=";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Mod: return "%";
    case Op::Pow: return "^";
    default: return "?";
  }
}

constexpr int kAtom = 8;
constexpr int kUnary = 6;

int prec_of(const CinExprPtr& e) {
  if (e->kind == ExprKind::Literal) {
    const Value& v = e->value;
    if ((v.is_int() && v.as_int() < 0) || (v.is_float() && std::signbit(v.as_double())))
      return kUnary;
    return kAtom;
  }
  if (e->kind != ExprKind::Call) return kAtom;
  if (e->args.size() == 1 && (e->op == Op::Neg || e->op == Op::Not)) return kUnary;
  if (e->args.size() == 2 && infix_prec(e->op) > 0) return infix_prec(e->op);
  return kAtom;
}

void print_expr(std::ostream& os, const CinExprPtr& e);

void print_sub(std::ostream& os, const CinExprPtr& e, bool parens) {
  if (parens) os << '(';
  print_expr(os, e);
  if (parens) os << ')';
}

void print_slot(std::ostream& os, const IndexSlot& s) {
  for (const auto& m : s.mods) {
    switch (m.kind) {
      case ModKind::Permit: os << "permit["; break;
      case ModKind::Offset:
        os << "offset(";
        print_expr(os, m.args.at(0));
        os << ")[";
        break;
      case ModKind::Window:
        os << "window(";
        print_expr(os, m.args.at(0));
        os << ", ";
        print_expr(os, m.args.at(1));
        os << ")[";
        break;
    }
  }
  print_expr(os, s.index);
  if (s.proto) os << "::" << protocol_name(*s.proto);
  for (size_t k = 0; k < s.mods.size(); ++k) os << ']';
}

void print_expr(std::ostream& os, const CinExprPtr& e) {
  switch (e->kind) {
    case ExprKind::Literal: os << to_string(e->value); return;
    case ExprKind::Index: os << e->name; return;
    case ExprKind::Param: os << '$' << e->name; return;
    case ExprKind::Size: os << "size(" << e->name << ", " << e->dim << ")"; return;
    case ExprKind::Escape: os << "$(" << print(e->escape) << ")"; return;
    case ExprKind::Virtual: os << e->virt->print(); return;
    case ExprKind::Access:
      os << e->name << '[';
      for (size_t k = 0; k < e->slots.size(); ++k) {
        if (k) os << ", ";
        print_slot(os, e->slots[k]);
      }
      os << ']';
      return;
    case ExprKind::Call: break;
  }
  int p = prec_of(e);
  if (p == kUnary) {
    os << (e->op == Op::Neg ? "-" : "!");
    print_sub(os, e->args[0], prec_of(e->args[0]) < kUnary);
    return;
  }
  if (p != kAtom) {
    const auto& a = e->args[0];
    const auto& b = e->args[1];
    bool cmp = p == 3, right = e->op == Op::Pow;
    print_sub(os, a, cmp || right ? prec_of(a) <= p : prec_of(a) < p);
    os << ' ' << infix_token(e->op) << ' ';
    print_sub(os, b, right ? prec_of(b) < p : prec_of(b) <= p);
    return;
  }
  os << (e->name.empty() ? op_name(e->op) : e->name.c_str()) << '(';
  for (size_t k = 0; k < e->args.size(); ++k) {
    if (k) os << ", ";
    print_expr(os, e->args[k]);
  }
  os << ')';
}

bool needs_group(const CinStmtPtr& s) {
  return s->kind == StmtKind::Forall || s->kind == StmtKind::Sieve || s->kind == StmtKind::Where;
}

void print_stmt(std::ostream& os, const CinStmtPtr& s) {
  switch (s->kind) {
    case StmtKind::Assign:
      print_expr(os, s->lhs);
      os << ' ' << update_op_token(s->op) << ' ';
      print_expr(os, s->rhs);
      return;
    case StmtKind::Forall: {
      os << "@V";
      auto cur = s;
      while (true) {
        os << ' ' << cur->index;
        if (cur->lo) {
          os << " in ";
          print_expr(os, cur->lo);
          os << ':';
          print_expr(os, cur->hi);
        }
        if (cur->body->kind != StmtKind::Forall) break;
        cur = cur->body;
      }
      os << ' ';
      print_stmt(os, cur->body);
      return;
    }
    case StmtKind::Where:
      if (needs_group(s->consumer)) os << '(';
      print_stmt(os, s->consumer);
      if (needs_group(s->consumer)) os << ')';
      os << " where ";
      if (needs_group(s->producer)) os << '(';
      print_stmt(os, s->producer);
      if (needs_group(s->producer)) os << ')';
      return;
    case StmtKind::Multi:
      os << "@multi {";
      for (size_t k = 0; k < s->parts.size(); ++k) {
        os << (k ? "; " : " ");
        print_stmt(os, s->parts[k]);
      }
      os << " }";
      return;
    case StmtKind::Sieve:
      os << "@sieve ";
      print_expr(os, s->cond);
      os << ' ';
      print_stmt(os, s->body);
      return;
    case StmtKind::Pass:
      os << "@pass";
      for (const auto& t : s->tensors) os << ' ' << t;
      return;
  }
}

}  // namespace

std::string print(const CinExprPtr& e) {
  std::ostringstream os;
  print_expr(os, e);
  return os.str();
}

std::string print(const CinStmtPtr& s) {
  std::ostringstream os;
  print_stmt(os, s);
  return os.str();
}

// Structural comparison and measures --------------------------------------------

namespace {

bool same_slot(const IndexSlot& a, const IndexSlot& b) {
  if (a.proto != b.proto || a.mods.size() != b.mods.size()) return false;
  if (!same_expr(a.index, b.index)) return false;
  for (size_t k = 0; k < a.mods.size(); ++k) {
    if (a.mods[k].kind != b.mods[k].kind || a.mods[k].args.size() != b.mods[k].args.size())
      return false;
    for (size_t j = 0; j < a.mods[k].args.size(); ++j)
      if (!same_expr(a.mods[k].args[j], b.mods[k].args[j])) return false;
  }
  return true;
}

}  // namespace

bool same_expr(const CinExprPtr& a, const CinExprPtr& b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case ExprKind::Literal: return a->value.identical(b->value);
    case ExprKind::Index:
    case ExprKind::Param: return a->name == b->name;
    case ExprKind::Size: return a->name == b->name && a->dim == b->dim;
    case ExprKind::Escape: return same_expr(a->escape, b->escape);
    case ExprKind::Virtual: return a->virt == b->virt;
    case ExprKind::Call:
      if (a->op != b->op || a->name != b->name || a->args.size() != b->args.size()) return false;
      for (size_t k = 0; k < a->args.size(); ++k)
        if (!same_expr(a->args[k], b->args[k])) return false;
      return true;
    case ExprKind::Access:
      if (a->name != b->name || a->slots.size() != b->slots.size()) return false;
      for (size_t k = 0; k < a->slots.size(); ++k)
        if (!same_slot(a->slots[k], b->slots[k])) return false;
      return true;
  }
  return false;
}

bool same_stmt(const CinStmtPtr& a, const CinStmtPtr& b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case StmtKind::Assign:
      return a->op == b->op && same_expr(a->lhs, b->lhs) && same_expr(a->rhs, b->rhs);
    case StmtKind::Forall:
      return a->index == b->index && a->nonempty == b->nonempty && same_expr(a->lo, b->lo) &&
             same_expr(a->hi, b->hi) && same_stmt(a->body, b->body);
    case StmtKind::Where:
      return same_stmt(a->consumer, b->consumer) && same_stmt(a->producer, b->producer);
    case StmtKind::Multi:
      if (a->parts.size() != b->parts.size()) return false;
      for (size_t k = 0; k < a->parts.size(); ++k)
        if (!same_stmt(a->parts[k], b->parts[k])) return false;
      return true;
    case StmtKind::Sieve: return same_expr(a->cond, b->cond) && same_stmt(a->body, b->body);
    case StmtKind::Pass: return a->tensors == b->tensors;
  }
  return false;
}

namespace {

void collect_results(const CinStmtPtr& s, std::vector<std::string>& out) {
  auto add = [&](const std::string& t) {
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  };
  switch (s->kind) {
    case StmtKind::Assign: add(s->lhs->name); return;
    case StmtKind::Forall:
    case StmtKind::Sieve: collect_results(s->body, out); return;
    case StmtKind::Where: collect_results(s->consumer, out); return;
    case StmtKind::Multi:
      for (const auto& p : s->parts) collect_results(p, out);
      return;
    case StmtKind::Pass:
      for (const auto& t : s->tensors) add(t);
      return;
  }
}

}  // namespace

std::vector<std::string> results(const CinStmtPtr& s) {
  std::vector<std::string> out;
  collect_results(s, out);
  return out;
}

size_t node_count(const CinExprPtr& e) {
  if (!e) return 0;
  size_t n = 1;
  for (const auto& a : e->args) n += node_count(a);
  for (const auto& s : e->slots) {
    n += node_count(s.index);
    for (const auto& m : s.mods) {
      ++n;
      for (const auto& a : m.args) n += node_count(a);
    }
  }
  return n;
}

size_t node_count(const CinStmtPtr& s) {
  if (!s) return 0;
  size_t n = 1 + node_count(s->lhs) + node_count(s->rhs) + node_count(s->lo) +
             node_count(s->hi) + node_count(s->cond) + node_count(s->body) +
             node_count(s->consumer) + node_count(s->producer);
  for (const auto& p : s->parts) n += node_count(p);
  return n;
}

// Parsing -----------------------------------------------------------------------

namespace {

enum class Tok {
  Ident, Number, Param, Directive, Update, Symbol, Newline, End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  UpdateOp update = UpdateOp::Overwrite;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token t;
      t.line = line_;
      t.col = col_;
      if (at_end()) {
        t.kind = Tok::End;
        out.push_back(t);
        return out;
      }
      char c = peek();
      if (c == '\n') {
        advance();
        t.kind = Tok::Newline;
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::Ident;
        t.text = word();
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
        t.kind = Tok::Number;
        t.text = number();
      } else if (c == '$') {
        advance();
        if (peek() == '(') throw ParseError(t.line, t.col, "escapes cannot be parsed");
        if (!std::isalpha(static_cast<unsigned char>(peek())) && peek() != '_')
          throw ParseError(t.line, t.col, "expected parameter name after $");
        t.kind = Tok::Param;
        t.text = word();
      } else if (c == '@') {
        advance();
        t.kind = Tok::Directive;
        if (starts_with("∀")) {
          pos_ += 3;
          ++col_;
          t.text = "V";
        } else {
          t.text = word();
        }
        if (t.text.empty()) throw ParseError(t.line, t.col, "expected directive after @");
      } else if (starts_with("∈")) {
        pos_ += 3;
        ++col_;
        t.kind = Tok::Ident;
        t.text = "in";
      } else if (starts_with("∀")) {
        pos_ += 3;
        ++col_;
        t.kind = Tok::Directive;
        t.text = "V";
      } else if (starts_with("<<")) {
        size_t close = src_.find(">>=", pos_);
        std::string name = close == std::string::npos ? "" : src_.substr(pos_ + 2, close - pos_ - 2);
        t.kind = Tok::Update;
        if (name == "min") t.update = UpdateOp::Min;
        else if (name == "max") t.update = UpdateOp::Max;
        else if (name == "or") t.update = UpdateOp::Or;
        else throw ParseError(t.line, t.col, "unknown update operator");
        t.text = src_.substr(pos_, close + 3 - pos_);
        for (size_t k = 0; k < t.text.size(); ++k) advance();
      } else if (starts_with("+=") || starts_with("*=")) {
        t.kind = Tok::Update;
        t.update = c == '+' ? UpdateOp::Add : UpdateOp::Mul;
        t.text = src_.substr(pos_, 2);
        advance();
        advance();
      } else {
        static const char* const kTwo[] = {"==", "!=", "<=", ">=", "&&", "||", "::"};
        t.kind = Tok::Symbol;
        for (const char* two : kTwo) {
          if (starts_with(two)) {
            t.text = two;
            break;
          }
        }
        if (t.text.empty()) {
          static const std::string kOne = "+-*/%^()[]{},;:<>=!";
          if (kOne.find(c) == std::string::npos)
            throw ParseError(t.line, t.col, std::string("unexpected character '") + c + "'");
          t.text = std::string(1, c);
        }
        if (t.text == "=") {
          t.kind = Tok::Update;
          t.update = UpdateOp::Overwrite;
        }
        for (size_t k = 0; k < t.text.size(); ++k) advance();
      }
      out.push_back(t);
    }
  }

 private:
  bool at_end() const { return pos_ >= src_.size(); }
  char peek(size_t k = 0) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }
  bool starts_with(const char* s) const { return src_.compare(pos_, std::char_traits<char>::length(s), s) == 0; }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (!at_end()) {
      char c = peek();
      if (c == '#') {
        while (!at_end() && peek() != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r') {
        advance();
      } else {
        return;
      }
    }
  }

  std::string word() {
    std::string s;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
      s += peek();
      advance();
    }
    return s;
  }

  std::string number() {
    std::string s;
    auto digits = [&] {
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        s += peek();
        advance();
      }
    };
    digits();
    if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
      s += '.';
      advance();
      digits();
    } else if (peek() == '.' && !std::isalpha(static_cast<unsigned char>(peek(1)))) {
      s += '.';
      advance();
    }
    if ((peek() == 'e' || peek() == 'E') &&
        (std::isdigit(static_cast<unsigned char>(peek(1))) ||
         ((peek(1) == '+' || peek(1) == '-') && std::isdigit(static_cast<unsigned char>(peek(2)))))) {
      s += peek();
      advance();
      if (peek() == '+' || peek() == '-') {
        s += peek();
        advance();
      }
      digits();
    }
    return s;
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

const std::set<std::string> kKeywords = {"where", "in", "true", "false", "missing"};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  CinStmtPtr kernel() {
    std::vector<CinStmtPtr> parts;
    skip_separators();
    while (cur().kind != Tok::End) {
      parts.push_back(stmt());
      if (cur().kind != Tok::End && !is_separator())
        fail("expected end of statement");
      skip_separators();
    }
    if (parts.empty()) fail("empty kernel");
    if (parts.size() == 1) return parts[0];
    return cin::multi(std::move(parts));
  }

  CinExprPtr expr_only() {
    skip_newlines();
    auto e = expr();
    skip_newlines();
    if (cur().kind != Tok::End) fail("unexpected trailing input");
    return e;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  const Token& ahead(size_t k) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  void next() {
    if (pos_ + 1 < toks_.size()) ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    std::string near = cur().kind == Tok::End ? "end of input"
                       : cur().kind == Tok::Newline ? "newline"
                                                    : "'" + cur().text + "'";
    throw ParseError(cur().line, cur().col, msg + " near " + near);
  }

  bool is_sym(const char* s) const { return cur().kind == Tok::Symbol && cur().text == s; }
  bool is_ident(const char* s) const { return cur().kind == Tok::Ident && cur().text == s; }
  bool is_separator() const { return cur().kind == Tok::Newline || is_sym(";"); }

  void expect_sym(const char* s) {
    if (!is_sym(s)) fail(std::string("expected '") + s + "'");
    next();
  }

  void skip_newlines() {
    while (cur().kind == Tok::Newline) next();
  }
  void skip_separators() {
    while (is_separator()) next();
  }

  // Newlines are insignificant inside brackets, so skip them there.
  void skip_nl_in_group() {
    if (depth_ > 0) skip_newlines();
  }

  // Statements ------------------------------------------------------------------

  CinStmtPtr stmt() {
    auto s = prim_stmt();
    while (true) {
      size_t save = pos_;
      skip_newlines();
      if (!is_ident("where")) {
        pos_ = save;
        return s;
      }
      next();
      skip_newlines();
      s = cin::where(s, prim_stmt());
    }
  }

  CinStmtPtr prim_stmt() {
    skip_nl_in_group();
    const Token& t = cur();
    if (t.kind == Tok::Directive) {
      if (t.text == "V" || t.text == "loop" || t.text == "forall") return forall_stmt();
      if (t.text == "sieve") {
        next();
        auto c = expr();
        skip_newlines();
        return cin::sieve(c, stmt());
      }
      if (t.text == "pass") {
        next();
        std::vector<std::string> names;
        while (cur().kind == Tok::Ident && !kKeywords.count(cur().text)) {
          names.push_back(cur().text);
          next();
        }
        return cin::pass(std::move(names));
      }
      if (t.text == "multi") {
        next();
        skip_newlines();
        expect_sym("{");
        std::vector<CinStmtPtr> parts;
        skip_separators();
        while (!is_sym("}")) {
          parts.push_back(stmt());
          if (!is_sym("}") && !is_separator()) fail("expected ';' or '}'");
          skip_separators();
        }
        next();
        return cin::multi(std::move(parts));
      }
      fail("unknown directive @" + t.text);
    }
    if (is_sym("(")) {
      next();
      ++depth_;
      skip_newlines();
      auto s = stmt();
      skip_newlines();
      --depth_;
      expect_sym(")");
      return s;
    }
    if (t.kind == Tok::Ident && !kKeywords.count(t.text)) {
      if (ahead(1).kind != Tok::Symbol || ahead(1).text != "[") fail("expected tensor access");
      auto lhs = primary();
      if (cur().kind != Tok::Update) fail("expected update operator");
      UpdateOp op = cur().update;
      next();
      auto rhs = expr();
      for (const auto& slot : lhs->slots)
        if (slot.proto || !slot.mods.empty())
          throw ParseError(t.line, t.col, "output access cannot carry modifiers or protocols");
      return cin::assign(lhs, op, rhs);
    }
    fail("expected statement");
  }

  CinStmtPtr forall_stmt() {
    next();
    struct Decl {
      std::string name;
      CinExprPtr lo, hi;
    };
    std::vector<Decl> decls;
    while (true) {
      skip_newlines();
      if (cur().kind != Tok::Ident || kKeywords.count(cur().text)) break;
      if (ahead(1).kind == Tok::Symbol && ahead(1).text == "[") break;
      Decl d{cur().text, nullptr, nullptr};
      next();
      if (is_ident("in")) {
        next();
        d.lo = expr();
        expect_sym(":");
        d.hi = expr();
      }
      decls.push_back(std::move(d));
    }
    if (decls.empty()) fail("expected index after @V");
    auto body = stmt();
    for (auto it = decls.rbegin(); it != decls.rend(); ++it)
      body = cin::forall(it->name, body, it->lo, it->hi);
    return body;
  }

  // Expressions -------------------------------------------------------------------

  CinExprPtr expr() { return binary(1); }

  static int binary_prec(const Token& t, Op& op) {
    if (t.kind != Tok::Symbol) return 0;
    static const std::pair<const char*, Op> kTable[] = {
        {"||", Op::Or}, {"&&", Op::And}, {"==", Op::Eq}, {"!=", Op::Ne}, {"<", Op::Lt},
        {"<=", Op::Le}, {">", Op::Gt},   {">=", Op::Ge}, {"+", Op::Add}, {"-", Op::Sub},
        {"*", Op::Mul}, {"/", Op::Div},  {"%", Op::Mod},
    };
    for (const auto& [tok, o] : kTable) {
      if (t.text == tok) {
        op = o;
        return infix_prec(o);
      }
    }
    return 0;
  }

  CinExprPtr binary(int min_prec) {
    auto lhs = unary();
    while (true) {
      skip_nl_in_group();
      Op op{};
      int p = binary_prec(cur(), op);
      if (p == 0 || p < min_prec) return lhs;
      next();
      skip_newlines();
      auto rhs = binary(p + 1);
      if (p == 3) {
        Op dummy{};
        if (binary_prec(cur(), dummy) == 3) fail("comparisons do not chain");
      }
      lhs = cin::call(op, {lhs, rhs});
    }
  }

  CinExprPtr unary() {
    skip_nl_in_group();
    if (is_sym("-")) {
      next();
      return cin::call(Op::Neg, {unary()});
    }
    if (is_sym("!")) {
      next();
      return cin::call(Op::Not, {unary()});
    }
    auto base = primary();
    if (is_sym("^")) {
      next();
      return cin::call(Op::Pow, {base, unary()});
    }
    return base;
  }

  std::vector<CinExprPtr> call_args() {
    expect_sym("(");
    ++depth_;
    std::vector<CinExprPtr> args;
    skip_newlines();
    if (!is_sym(")")) {
      while (true) {
        args.push_back(expr());
        skip_newlines();
        if (is_sym(",")) {
          next();
          continue;
        }
        break;
      }
    }
    --depth_;
    expect_sym(")");
    return args;
  }

  CinExprPtr primary() {
    skip_nl_in_group();
    const Token t = cur();
    if (t.kind == Tok::Number) {
      next();
      auto v = parse_value(t.text);
      if (!v) throw ParseError(t.line, t.col, "bad number '" + t.text + "'");
      return cin::lit(*v);
    }
    if (t.kind == Tok::Param) {
      next();
      return cin::param(t.text);
    }
    if (is_sym("(")) {
      next();
      ++depth_;
      auto e = expr();
      skip_newlines();
      --depth_;
      expect_sym(")");
      return e;
    }
    if (t.kind != Tok::Ident) fail("expected expression");
    if (t.text == "true" || t.text == "false" || t.text == "missing") {
      next();
      return cin::lit(*parse_value(t.text));
    }
    if (kKeywords.count(t.text)) fail("unexpected keyword");
    bool paren = ahead(1).kind == Tok::Symbol && ahead(1).text == "(";
    bool bracket = ahead(1).kind == Tok::Symbol && ahead(1).text == "[";
    if (paren && t.text == "size") {
      next();
      expect_sym("(");
      if (cur().kind != Tok::Ident) fail("expected tensor name");
      std::string name = cur().text;
      next();
      int64_t dim = 1;
      if (is_sym(",")) {
        next();
        if (cur().kind != Tok::Number) fail("expected mode number");
        auto v = parse_value(cur().text);
        if (!v || !v->is_int() || v->as_int() < 1) fail("bad mode number");
        dim = v->as_int();
        next();
      }
      expect_sym(")");
      return cin::size_of(name, dim);
    }
    if (paren) {
      auto op = op_from_name(t.text);
      if (op && *op != Op::Identity) {
        next();
        auto args = call_args();
        if (args.empty()) throw ParseError(t.line, t.col, t.text + " needs arguments");
        return cin::call(*op, std::move(args));
      }
      if (!op) {
        next();
        auto e = std::make_shared<CinExpr>();
        e->kind = ExprKind::Call;
        e->name = t.text;
        e->args = call_args();
        return e;
      }
    }
    next();
    if (!bracket) return cin::index(t.text);
    next();
    ++depth_;
    std::vector<IndexSlot> slots;
    skip_newlines();
    if (!is_sym("]")) {
      while (true) {
        slots.push_back(slot());
        skip_newlines();
        if (is_sym(",")) {
          next();
          skip_newlines();
          continue;
        }
        break;
      }
    }
    --depth_;
    expect_sym("]");
    return cin::access(t.text, std::move(slots));
  }

  IndexSlot slot() {
    const Token t = cur();
    bool modifier_head = t.kind == Tok::Ident && ahead(1).kind == Tok::Symbol;
    if (modifier_head && t.text == "permit" && ahead(1).text == "[") {
      next();
      return wrap(Modifier{ModKind::Permit, {}});
    }
    if (modifier_head && t.text == "offset" && ahead(1).text == "(") {
      next();
      auto args = call_args();
      if (args.size() != 1) throw ParseError(t.line, t.col, "offset takes one argument");
      return wrap(Modifier{ModKind::Offset, std::move(args)});
    }
    if (modifier_head && t.text == "window" && ahead(1).text == "(") {
      next();
      auto args = call_args();
      if (args.size() != 2) throw ParseError(t.line, t.col, "window takes two arguments");
      return wrap(Modifier{ModKind::Window, std::move(args)});
    }
    IndexSlot s;
    s.index = expr();
    if (is_sym("::")) {
      if (s.index->kind != ExprKind::Index) fail("protocol on a non-index expression");
      next();
      if (cur().kind != Tok::Ident) fail("expected protocol name");
      auto p = protocol_from_name(cur().text);
      if (!p) fail("unknown protocol");
      s.proto = *p;
      next();
    }
    return s;
  }

  IndexSlot wrap(Modifier m) {
    expect_sym("[");
    ++depth_;
    skip_newlines();
    IndexSlot inner = slot();
    skip_newlines();
    --depth_;
    expect_sym("]");
    inner.mods.insert(inner.mods.begin(), std::move(m));
    return inner;
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  int depth_ = 0;
};

}  // namespace

CinStmtPtr parse_kernel(const std::string& text) {
  auto s = Parser(Lexer(text).run()).kernel();
  audit_binders(s);
  return s;
}

namespace {

void audit_expr(const CinExprPtr& e, const std::vector<std::string>& scope) {
  if (!e) return;
  if (e->kind == ExprKind::Index &&
      std::find(scope.begin(), scope.end(), e->name) == scope.end())
    throw CompileError("unbound index " + e->name);
  for (const auto& a : e->args) audit_expr(a, scope);
  for (const auto& s : e->slots) {
    audit_expr(s.index, scope);
    for (const auto& m : s.mods)
      for (const auto& a : m.args) audit_expr(a, scope);
  }
}

void audit_stmt(const CinStmtPtr& s, std::vector<std::string>& scope) {
  switch (s->kind) {
    case StmtKind::Assign:
      audit_expr(s->lhs, scope);
      audit_expr(s->rhs, scope);
      return;
    case StmtKind::Forall:
      audit_expr(s->lo, scope);
      audit_expr(s->hi, scope);
      if (std::find(scope.begin(), scope.end(), s->index) != scope.end())
        throw CompileError("index " + s->index + " is bound twice");
      scope.push_back(s->index);
      audit_stmt(s->body, scope);
      scope.pop_back();
      return;
    case StmtKind::Where:
      audit_stmt(s->consumer, scope);
      audit_stmt(s->producer, scope);
      return;
    case StmtKind::Multi:
      for (const auto& p : s->parts) audit_stmt(p, scope);
      return;
    case StmtKind::Sieve:
      audit_expr(s->cond, scope);
      audit_stmt(s->body, scope);
      return;
    case StmtKind::Pass: return;
  }
}

}  // namespace

void audit_binders(const CinStmtPtr& s) {
  std::vector<std::string> scope;
  audit_stmt(s, scope);
}

CinExprPtr parse_expr(const std::string& text) {
  return Parser(Lexer(text).run()).expr_only();
}

}  // namespace coiter
