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

#include "coiter/unfurl.hpp"

#include <cctype>

namespace coiter {

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::Walk: return "walk";
    case Protocol::Gallop: return "gallop";
    case Protocol::Follow: return "follow";
    case Protocol::FollowZeroCheck: return "followzero";
    case Protocol::Extrude: return "extrude";
  }
  return "?";
}

std::optional<Protocol> protocol_from_name(const std::string& name) {
  std::string s;
  for (char c : name) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "walk") return Protocol::Walk;
  if (s == "gallop" || s == "lead") return Protocol::Gallop;
  if (s == "follow") return Protocol::Follow;
  if (s == "followzero" || s == "followzerocheck") return Protocol::FollowZeroCheck;
  if (s == "extrude") return Protocol::Extrude;
  return std::nullopt;
}

namespace {

TExpr norm(const TExpr& e) { return normalize_index(e); }
TExpr one() { return ir::lit(1); }

[[noreturn]] void unsupported(const TensorMeta& meta, size_t level, Protocol p) {
  throw UnfurlError("unsupported protocol '" + std::string(protocol_name(p)) + "' for " +
                    level_kind_name(meta.format[level]) + " level " + std::to_string(level + 1) +
                    " of " + meta.name);
}

}  // namespace

void check_protocol(const TensorMeta& meta, size_t level, Protocol p) {
  if (level >= meta.format.size() || meta.format[level] == LevelKind::Element)
    throw UnfurlError("no level to unfurl at depth " + std::to_string(level + 1) + " of " +
                      meta.name);
  LevelKind k = meta.format[level];
  bool element_child = level + 1 < meta.format.size() &&
                       meta.format[level + 1] == LevelKind::Element;
  switch (p) {
    case Protocol::Walk:
    case Protocol::Follow:
      return;
    case Protocol::Gallop:
      if (k == LevelKind::SparseList || k == LevelKind::SparseVBL) return;
      unsupported(meta, level, p);
    case Protocol::FollowZeroCheck:
      if (k == LevelKind::Dense && element_child) return;
      unsupported(meta, level, p);
    case Protocol::Extrude:
      unsupported(meta, level, p);
  }
}

LoopletPtr child_payload(const TensorMeta& meta, size_t level, const TExpr& pos) {
  if (meta.format[level + 1] == LevelKind::Element)
    return lp::leaf(ir::read(meta.value_buffer(), pos));
  return lp::fiber(FiberRef{&meta, level + 1, pos, false});
}

LoopletPtr fill_payload(const TensorMeta& meta, size_t level) {
  if (meta.format[level + 1] == LevelKind::Element) return lp::leaf(ir::lit(meta.fill));
  return lp::fiber(FiberRef{&meta, level + 1, nullptr, true});
}

namespace {

LoopletPtr dense_zero_check(const TensorMeta& meta, size_t level, const TExpr& P) {
  int64_t size = meta.dims[level];
  const TensorMeta* m = &meta;
  TExpr base = norm(ir::mul(P, ir::lit(size)));
  size_t l = level;
  return lp::lookup("i", [m, l, base](const TExpr& i) {
    TExpr v = ir::read(m->value_buffer(), norm(ir::sub(ir::add(base, i), ir::lit(1))));
    return lp::switch_of({{ir::eq(v, ir::lit(m->fill)), lp::leaf(ir::lit(m->fill))},
                          {ir::lit(true), lp::leaf(v)}});
  });
}

}  // namespace

LoopletPtr unfurl(const FiberRef& f, Protocol p, const FreshFn& fresh) {
  const TensorMeta& meta = *f.meta;
  size_t l = f.level;
  check_protocol(meta, l, p);
  LevelKind kind = meta.format[l];
  int64_t size = meta.dims[l];
  bool leaf_level = kind == LevelKind::RepeatRLE;

  if (f.fill_only) {
    if (leaf_level) return lp::run(ir::lit(meta.fill));
    return lp::run(fill_payload(meta, l));
  }

  const TExpr& P = f.pos;
  auto buf = [&](const char* field) { return meta.buffer(field, l); };
  auto rd = [](const std::string& b, TExpr i) { return ir::read(b, norm(std::move(i))); };

  switch (kind) {
    case LevelKind::Dense: {
      if (p == Protocol::FollowZeroCheck) return dense_zero_check(meta, l, P);
      const TensorMeta* m = &meta;
      TExpr base = norm(ir::mul(P, ir::lit(size)));
      return lp::lookup("i", [m, l, base](const TExpr& i) {
        return child_payload(*m, l, norm(ir::sub(ir::add(base, i), one())));
      });
    }
    case LevelKind::SparseList: {
      TExpr lo = rd(buf("pos"), P), hi = rd(buf("pos"), ir::add(P, one()));
      std::string idx = buf("idx");
      std::string q = fresh(meta.name + "_q");
      TExpr qv = ir::var(q);
      LoopletPtr fill = fill_payload(meta, l);
      LoopletPtr child = child_payload(meta, l, qv);
      if (p == Protocol::Follow) {
        const TensorMeta* m = &meta;
        return lp::lookup("i", [=](const TExpr& i) {
          TStmt find = ir::assign(q, ir::search(idx, lo, hi, i));
          TExpr found = ir::land({ir::lt(qv, hi), ir::eq(ir::read(idx, qv), i)});
          return lp::switch_of({{found, child_payload(*m, l, qv)}, {ir::lit(true), fill}}, find);
        });
      }
      TExpr last = ir::select(ir::lt(lo, hi), rd(idx, ir::sub(hi, one())), ir::lit(0));
      SeekFn seek = [=](const TExpr& s) { return ir::assign(q, ir::search(idx, lo, hi, s)); };
      TStmt next = ir::assign(q, ir::add(qv, one()));
      LoopletPtr body = lp::spike(fill, child);
      LoopletPtr step = p == Protocol::Gallop ? lp::jumper(seek, ir::read(idx, qv), body, next)
                                              : lp::stepper(seek, ir::read(idx, qv), body, next);
      return lp::pipeline({{last, step}, {nullptr, lp::run(fill)}});
    }
    case LevelKind::SparseBand: {
      TExpr start = rd(buf("start"), P), stop = rd(buf("stop"), P), off = rd(buf("pos"), P);
      LoopletPtr fill = fill_payload(meta, l);
      const TensorMeta* m = &meta;
      LoopletPtr band = lp::lookup("i", [=](const TExpr& i) {
        return child_payload(*m, l, norm(ir::sub(ir::add(off, i), start)));
      });
      return lp::pipeline({{norm(ir::sub(start, one())), lp::run(fill)},
                           {stop, band},
                           {nullptr, lp::run(fill)}});
    }
    case LevelKind::SparseVBL: {
      TExpr lo = rd(buf("pos"), P), hi = rd(buf("pos"), ir::add(P, one()));
      std::string idx = buf("idx"), ofs = buf("ofs");
      std::string b = fresh(meta.name + "_b");
      TExpr bv = ir::var(b);
      TExpr first = ir::read(ofs, bv);
      TExpr bend = ir::read(idx, bv);
      TExpr bstart = norm(ir::add(ir::sub(bend, ir::sub(ir::read(ofs, norm(ir::add(bv, one()))),
                                                        first)),
                                  one()));
      LoopletPtr fill = fill_payload(meta, l);
      const TensorMeta* m = &meta;
      auto value_at = [=](const TExpr& i) {
        return child_payload(*m, l, norm(ir::sub(ir::add(first, i), bstart)));
      };
      if (p == Protocol::Follow) {
        return lp::lookup("i", [=](const TExpr& i) {
          TStmt find = ir::assign(b, ir::search(idx, lo, hi, i));
          TExpr inside = ir::land({ir::lt(bv, hi), ir::le(bstart, i)});
          return lp::switch_of({{inside, value_at(i)}, {ir::lit(true), fill}}, find);
        });
      }
      TExpr last = ir::select(ir::lt(lo, hi), rd(idx, ir::sub(hi, one())), ir::lit(0));
      SeekFn seek = [=](const TExpr& s) { return ir::assign(b, ir::search(idx, lo, hi, s)); };
      TStmt next = ir::assign(b, ir::add(bv, one()));
      LoopletPtr block = lp::pipeline({{norm(ir::sub(bstart, one())), lp::run(fill)},
                                       {nullptr, lp::lookup("i", value_at)}});
      LoopletPtr step = p == Protocol::Gallop ? lp::jumper(seek, bend, block, next)
                                              : lp::stepper(seek, bend, block, next);
      return lp::pipeline({{last, step}, {nullptr, lp::run(fill)}});
    }
    case LevelKind::RepeatRLE: {
      TExpr lo = rd(buf("pos"), P), hi = rd(buf("pos"), ir::add(P, one()));
      std::string idx = buf("idx"), val = meta.value_buffer();
      std::string r = fresh(meta.name + "_r");
      TExpr rv = ir::var(r);
      if (p == Protocol::Follow) {
        return lp::lookup("i", [=](const TExpr& i) {
          TStmt find = ir::assign(r, ir::search(idx, lo, hi, i));
          return lp::switch_of({{ir::lit(true), lp::leaf(ir::read(val, rv))}}, find);
        });
      }
      SeekFn seek = [=](const TExpr& s) { return ir::assign(r, ir::search(idx, lo, hi, s)); };
      return lp::stepper(seek, ir::read(idx, rv), lp::run(ir::read(val, rv)),
                         ir::assign(r, ir::add(rv, one())));
    }
    case LevelKind::Element:
      break;
  }
  throw UnfurlError("cannot unfurl an element level");
}


LoopletPtr unfurl_modified(LoopletPtr base, TExpr size, const std::vector<IndexMod>& mods) {
  // Valid coordinates of the view built so far are lo:hi; null means unbounded.
  LoopletPtr l = std::move(base);
  TExpr lo = one(), hi = std::move(size);
  for (const auto& m : mods) {
    switch (m.kind) {
      case ModKind::Permit:
        if (!hi) break;
        l = lp::pipeline({{norm(ir::sub(lo, one())), lp::run(ir::lit(kMissing))},
                          {hi, l},
                          {nullptr, lp::run(ir::lit(kMissing))}});
        lo = hi = nullptr;
        break;
      case ModKind::Offset:
        l = lp::shift(m.a, l);
        if (hi) {
          lo = norm(ir::add(lo, m.a));
          hi = norm(ir::add(hi, m.a));
        }
        break;
      case ModKind::Window: {
        if (hi) {
          auto wl = const_int(m.a), wh = const_int(m.b), vl = const_int(lo), vh = const_int(hi);
          if (wl && wh && vl && vh && (*wl < *vl || *wh > *vh || *wl > *wh + 1))
            throw UnfurlError("window(" + std::to_string(*wl) + ", " + std::to_string(*wh) +
                              ") outside " + std::to_string(*vl) + ":" + std::to_string(*vh));
          l = truncate(l, Extent{lo, hi}, Extent{m.a, m.b});
        }
        l = lp::shift(norm(ir::sub(one(), m.a)), l);
        lo = one();
        hi = norm(ir::add(ir::sub(m.b, m.a), one()));
        break;
      }
    }
  }
  return l;
}

LoopletPtr mask_looplet(const TExpr& target) {
  return lp::pipeline({{norm(ir::sub(target, one())), lp::run(ir::lit(false))},
                       {target, lp::spike(lp::leaf(ir::lit(false)), lp::leaf(ir::lit(true)))},
                       {nullptr, lp::run(ir::lit(false))}});
}

TExpr linear_position(const TensorMeta& meta, const std::vector<TExpr>& indices) {
  TExpr acc = ir::lit(0);
  for (size_t k = 0; k < indices.size(); ++k)
    acc = ir::add(ir::mul(acc, ir::lit(meta.dims[k])), ir::sub(indices[k], one()));
  return norm(acc);
}

WriterDescriptor unfurl_output(const TensorMeta& meta) {
  WriterDescriptor w;
  w.tensor = meta.name;
  for (LevelKind k : meta.format) {
    if (k == LevelKind::SparseBand || k == LevelKind::SparseVBL)
      throw UnfurlError("output " + meta.name + " cannot be written in " + level_kind_name(k) +
                        " format");
    if (k != LevelKind::Dense && k != LevelKind::Element) w.in_place = false;
  }
  w.init = ir::hook_init(meta.name);
  w.finalize = ir::hook_finalize(meta.name);
  std::string name = meta.name, val = meta.value_buffer();
  if (w.in_place) {
    w.write = [val](const TExpr& pos, UpdateOp op, const TExpr& v) {
      return ir::write(val, pos, op, v);
    };
  } else {
    w.write = [name](const TExpr& pos, UpdateOp op, const TExpr& v) {
      return ir::hook_append(name, pos, op, v);
    };
  }
  return w;
}

}  // namespace coiter
