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

#include "coiter/storage.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace coiter {

const char* level_kind_name(LevelKind k) {
  switch (k) {
    case LevelKind::Dense: return "Dense";
    case LevelKind::SparseList: return "SparseList";
    case LevelKind::SparseBand: return "SparseBand";
    case LevelKind::SparseVBL: return "SparseVBL";
    case LevelKind::RepeatRLE: return "RepeatRLE";
    case LevelKind::Element: return "Element";
  }
  return "?";
}

LevelKind level_kind_from_name(const std::string& name) {
  std::string s;
  for (char c : name) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "dense" || s == "d") return LevelKind::Dense;
  if (s == "sparselist" || s == "list" || s == "splist" || s == "s") return LevelKind::SparseList;
  if (s == "sparseband" || s == "band" || s == "spband") return LevelKind::SparseBand;
  if (s == "sparsevbl" || s == "vbl") return LevelKind::SparseVBL;
  if (s == "repeatrle" || s == "rle") return LevelKind::RepeatRLE;
  if (s == "element" || s == "e") return LevelKind::Element;
  throw FormatError(FormatErrorCode::BadSpec, "unknown level kind '" + name + "'");
}

FormatSpec parse_format(const std::string& text) {
  FormatSpec out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(level_kind_from_name(item));
  }
  return out;
}

std::string format_to_string(const FormatSpec& f) {
  std::string s;
  for (size_t k = 0; k < f.size(); ++k) {
    if (k) s += ",";
    s += level_kind_name(f[k]);
  }
  return s;
}

std::string TensorMeta::buffer(const std::string& field, size_t level) const {
  return name + "_" + field + std::to_string(level + 1);
}

size_t product(const std::vector<int64_t>& dims) {
  size_t n = 1;
  for (auto d : dims) n *= static_cast<size_t>(d);
  return n;
}

void validate_format(const FormatSpec& f, size_t rank) {
  if (f.empty()) throw FormatError(FormatErrorCode::BadSpec, "empty format");
  if (!is_leaf(f.back()))
    throw FormatError(FormatErrorCode::BadSpec, "format must end in Element or RepeatRLE");
  size_t modes = 0;
  for (size_t k = 0; k < f.size(); ++k) {
    if (k + 1 < f.size() && is_leaf(f[k]))
      throw FormatError(FormatErrorCode::Unsupported,
                        std::string(level_kind_name(f[k])) + " must be the last level");
    if (f[k] != LevelKind::Element) ++modes;
  }
  if (modes != rank)
    throw FormatError(FormatErrorCode::ShapeMismatch,
                      "format " + format_to_string(f) + " has " + std::to_string(modes) +
                          " modes but the tensor has rank " + std::to_string(rank));
}

namespace {

struct Builder {
  const std::vector<int64_t>& dims;
  const std::vector<Value>& data;
  const Value& fill;
  ElemType type;

  bool all_fill(size_t offset, size_t len) const {
    for (size_t k = 0; k < len; ++k)
      if (!data[offset + k].numerically_equal(fill)) return false;
    return true;
  }

  size_t sub_size(size_t mode) const {
    size_t n = 1;
    for (size_t k = mode + 1; k < dims.size(); ++k) n *= static_cast<size_t>(dims[k]);
    return n;
  }
};

}  // namespace

Tensor from_dense(const std::string& name, const std::vector<int64_t>& dims,
                  const std::vector<Value>& data, const FormatSpec& format, const Value& fill,
                  ElemType type) {
  validate_format(format, dims.size());
  if (data.size() != product(dims))
    throw FormatError(FormatErrorCode::ShapeMismatch,
                      "data has " + std::to_string(data.size()) + " values, dims need " +
                          std::to_string(product(dims)));
  Tensor t;
  t.meta = TensorMeta{name, dims, format, coerce_to(type, fill), type};
  Builder b{dims, data, t.meta.fill, type};

  std::vector<size_t> offsets = {0};  // start of each current fiber's sub-array
  for (size_t l = 0; l < format.size(); ++l) {
    Level lv;
    lv.kind = format[l];
    std::vector<size_t> next;
    if (lv.kind == LevelKind::Element) {
      for (auto o : offsets) lv.val.push_back(coerce_to(type, data[o]));
      t.levels.push_back(std::move(lv));
      break;
    }
    size_t mode = l;
    lv.size = dims[mode];
    size_t sub = b.sub_size(mode);
    auto child = [&](size_t o, int64_t i) { return o + static_cast<size_t>(i - 1) * sub; };
    switch (lv.kind) {
      case LevelKind::Dense:
        for (auto o : offsets)
          for (int64_t i = 1; i <= lv.size; ++i) next.push_back(child(o, i));
        break;
      case LevelKind::SparseList:
        lv.pos.push_back(0);
        for (auto o : offsets) {
          for (int64_t i = 1; i <= lv.size; ++i) {
            if (b.all_fill(child(o, i), sub)) continue;
            lv.idx.push_back(i);
            next.push_back(child(o, i));
          }
          lv.pos.push_back(static_cast<int64_t>(lv.idx.size()));
        }
        break;
      case LevelKind::SparseBand:
        lv.pos.push_back(0);
        for (auto o : offsets) {
          int64_t first = 0, last = -1;
          for (int64_t i = 1; i <= lv.size; ++i) {
            if (b.all_fill(child(o, i), sub)) continue;
            if (first == 0) first = i;
            last = i;
          }
          if (first == 0) {
            first = 1;
            last = 0;
          }
          lv.start.push_back(first);
          lv.stop.push_back(last);
          for (int64_t i = first; i <= last; ++i) next.push_back(child(o, i));
          lv.pos.push_back(static_cast<int64_t>(next.size()));
        }
        break;
      case LevelKind::SparseVBL:
        lv.pos.push_back(0);
        lv.ofs.push_back(0);
        for (auto o : offsets) {
          int64_t i = 1;
          while (i <= lv.size) {
            if (b.all_fill(child(o, i), sub)) {
              ++i;
              continue;
            }
            int64_t j = i;
            while (j + 1 <= lv.size && !b.all_fill(child(o, j + 1), sub)) ++j;
            for (int64_t k = i; k <= j; ++k) next.push_back(child(o, k));
            lv.idx.push_back(j);
            lv.ofs.push_back(static_cast<int64_t>(next.size()));
            i = j + 1;
          }
          lv.pos.push_back(static_cast<int64_t>(lv.idx.size()));
        }
        break;
      case LevelKind::RepeatRLE:
        lv.pos.push_back(0);
        for (auto o : offsets) {
          for (int64_t i = 1; i <= lv.size; ++i) {
            Value v = coerce_to(type, data[child(o, i)]);
            bool extend = lv.idx.size() > static_cast<size_t>(lv.pos.back()) &&
                          lv.val.back().identical(v);
            if (extend) {
              lv.idx.back() = i;
            } else {
              lv.idx.push_back(i);
              lv.val.push_back(v);
            }
          }
          lv.pos.push_back(static_cast<int64_t>(lv.idx.size()));
        }
        break;
      case LevelKind::Element:
        break;
    }
    t.levels.push_back(std::move(lv));
    offsets = std::move(next);
  }
  t.meta.all_fill = holds_only_fill(t);
  return t;
}

Tensor from_dense(const std::string& name, const std::vector<int64_t>& dims,
                  const std::vector<Value>& data, const FormatSpec& format, const Value& fill) {
  bool any_float = fill.is_float(), all_bool = fill.is_bool();
  for (const auto& v : data) {
    any_float = any_float || v.is_float();
    all_bool = all_bool && v.is_bool();
  }
  ElemType t = any_float ? ElemType::Float : all_bool ? ElemType::Bool : ElemType::Int;
  return from_dense(name, dims, data, format, fill, t);
}

namespace {

void expand(const Tensor& t, size_t l, int64_t p, size_t offset, std::vector<Value>& out) {
  const Level& lv = t.levels[l];
  auto sub = [&]() {
    size_t n = 1;
    for (size_t k = l + 1; k < t.meta.dims.size(); ++k) n *= static_cast<size_t>(t.meta.dims[k]);
    return n;
  }();
  auto at = [&](int64_t i) { return offset + static_cast<size_t>(i - 1) * sub; };
  switch (lv.kind) {
    case LevelKind::Element:
      out[offset] = lv.val[static_cast<size_t>(p)];
      return;
    case LevelKind::Dense:
      for (int64_t i = 1; i <= lv.size; ++i) expand(t, l + 1, p * lv.size + i - 1, at(i), out);
      return;
    case LevelKind::SparseList:
      for (int64_t q = lv.pos[p]; q < lv.pos[p + 1]; ++q) expand(t, l + 1, q, at(lv.idx[q]), out);
      return;
    case LevelKind::SparseBand:
      for (int64_t i = lv.start[p]; i <= lv.stop[p]; ++i)
        expand(t, l + 1, lv.pos[p] + (i - lv.start[p]), at(i), out);
      return;
    case LevelKind::SparseVBL:
      for (int64_t b = lv.pos[p]; b < lv.pos[p + 1]; ++b) {
        int64_t len = lv.ofs[b + 1] - lv.ofs[b];
        for (int64_t k = 0; k < len; ++k)
          expand(t, l + 1, lv.ofs[b] + k, at(lv.idx[b] - len + 1 + k), out);
      }
      return;
    case LevelKind::RepeatRLE: {
      int64_t i = 1;
      for (int64_t r = lv.pos[p]; r < lv.pos[p + 1]; ++r)
        for (; i <= lv.idx[r]; ++i) out[at(i)] = lv.val[r];
      return;
    }
  }
}

size_t child_count(const Level& lv, size_t fibers) {
  switch (lv.kind) {
    case LevelKind::Dense: return fibers * static_cast<size_t>(lv.size);
    case LevelKind::SparseList: return lv.idx.size();
    case LevelKind::SparseBand: return lv.pos.empty() ? 0 : static_cast<size_t>(lv.pos.back());
    case LevelKind::SparseVBL: return lv.ofs.empty() ? 0 : static_cast<size_t>(lv.ofs.back());
    case LevelKind::RepeatRLE:
    case LevelKind::Element: return 0;
  }
  return 0;
}

[[noreturn]] void fail(FormatErrorCode c, const Tensor& t, size_t l, const std::string& msg) {
  throw FormatError(c, t.meta.name + " level " + std::to_string(l + 1) + " (" +
                           level_kind_name(t.levels[l].kind) + "): " + msg);
}

void check_pos(const Tensor& t, size_t l, const std::vector<int64_t>& pos, size_t fibers,
               size_t entries) {
  if (pos.size() != fibers + 1)
    fail(FormatErrorCode::PosLength, t, l,
         "pos has " + std::to_string(pos.size()) + " entries, expected " +
             std::to_string(fibers + 1));
  if (pos.front() != 0) fail(FormatErrorCode::PosRegression, t, l, "pos must start at 0");
  for (size_t k = 1; k < pos.size(); ++k)
    if (pos[k] < pos[k - 1]) fail(FormatErrorCode::PosRegression, t, l, "pos decreases");
  if (static_cast<size_t>(pos.back()) != entries)
    fail(FormatErrorCode::PosLength, t, l, "pos does not end at the entry count");
}

}  // namespace

std::vector<Value> to_dense(const Tensor& t) {
  std::vector<Value> out(product(t.meta.dims), t.meta.fill);
  expand(t, 0, 0, 0, out);
  return out;
}

bool holds_only_fill(const Tensor& t) {
  for (const auto& v : to_dense(t))
    if (!v.identical(t.meta.fill)) return false;
  return true;
}

void validate(const Tensor& t) {
  validate_format(t.meta.format, t.meta.dims.size());
  if (t.levels.size() != t.meta.format.size())
    throw FormatError(FormatErrorCode::BadSpec, "level count does not match format");
  size_t fibers = 1;
  for (size_t l = 0; l < t.levels.size(); ++l) {
    const Level& lv = t.levels[l];
    if (lv.kind != t.meta.format[l]) fail(FormatErrorCode::BadSpec, t, l, "kind mismatch");
    switch (lv.kind) {
      case LevelKind::Dense:
        break;
      case LevelKind::SparseList:
        check_pos(t, l, lv.pos, fibers, lv.idx.size());
        for (size_t p = 0; p < fibers; ++p) {
          for (int64_t q = lv.pos[p]; q < lv.pos[p + 1]; ++q) {
            if (lv.idx[q] < 1 || lv.idx[q] > lv.size)
              fail(FormatErrorCode::IdxOutOfBounds, t, l, "index out of bounds");
            if (q > lv.pos[p] && lv.idx[q] <= lv.idx[q - 1])
              fail(FormatErrorCode::UnsortedIdx, t, l, "indices not strictly increasing");
          }
        }
        break;
      case LevelKind::SparseBand: {
        if (lv.start.size() != fibers || lv.stop.size() != fibers)
          fail(FormatErrorCode::PosLength, t, l, "start/stop length mismatch");
        size_t total = 0;
        for (size_t p = 0; p < fibers; ++p) {
          bool empty = lv.stop[p] == lv.start[p] - 1;
          if (!empty && (lv.start[p] < 1 || lv.stop[p] > lv.size || lv.stop[p] < lv.start[p]))
            fail(FormatErrorCode::BandOutOfBounds, t, l, "band outside 1:size");
          total += static_cast<size_t>(lv.stop[p] - lv.start[p] + 1);
        }
        check_pos(t, l, lv.pos, fibers, total);
        for (size_t p = 0; p < fibers; ++p)
          if (lv.pos[p + 1] - lv.pos[p] != lv.stop[p] - lv.start[p] + 1)
            fail(FormatErrorCode::ValueLength, t, l, "band length does not match pos window");
        break;
      }
      case LevelKind::SparseVBL: {
        check_pos(t, l, lv.pos, fibers, lv.idx.size());
        if (lv.ofs.size() != lv.idx.size() + 1)
          fail(FormatErrorCode::PosLength, t, l, "ofs must have one entry per block plus one");
        for (size_t k = 1; k < lv.ofs.size(); ++k)
          if (lv.ofs[k] <= lv.ofs[k - 1])
            fail(FormatErrorCode::PosRegression, t, l, "blocks must hold at least one value");
        for (size_t p = 0; p < fibers; ++p) {
          for (int64_t b = lv.pos[p]; b < lv.pos[p + 1]; ++b) {
            int64_t len = lv.ofs[b + 1] - lv.ofs[b];
            int64_t first = lv.idx[b] - len + 1;
            if (first < 1 || lv.idx[b] > lv.size)
              fail(FormatErrorCode::IdxOutOfBounds, t, l, "block outside 1:size");
            if (b > lv.pos[p]) {
              if (lv.idx[b] <= lv.idx[b - 1])
                fail(FormatErrorCode::UnsortedIdx, t, l, "blocks not sorted");
              if (first <= lv.idx[b - 1])
                fail(FormatErrorCode::VblOverlap, t, l, "blocks overlap");
            }
          }
        }
        break;
      }
      case LevelKind::RepeatRLE:
        check_pos(t, l, lv.pos, fibers, lv.idx.size());
        if (lv.val.size() != lv.idx.size())
          fail(FormatErrorCode::ValueLength, t, l, "one value per run required");
        for (size_t p = 0; p < fibers; ++p) {
          for (int64_t r = lv.pos[p]; r < lv.pos[p + 1]; ++r)
            if (r > lv.pos[p] && lv.idx[r] <= lv.idx[r - 1])
              fail(FormatErrorCode::UnsortedIdx, t, l, "run ends not strictly increasing");
          if (lv.size > 0 &&
              (lv.pos[p + 1] == lv.pos[p] || lv.idx[lv.pos[p + 1] - 1] != lv.size))
            fail(FormatErrorCode::RleNotTiling, t, l, "runs must end exactly at size");
        }
        break;
      case LevelKind::Element:
        if (lv.val.size() != fibers)
          fail(FormatErrorCode::ValueLength, t, l,
               "expected " + std::to_string(fibers) + " values, found " +
                   std::to_string(lv.val.size()));
        break;
    }
    fibers = child_count(lv, fibers);
  }
}

Fiber root_fiber(const Tensor& t) { return Fiber{&t, 0, {0}, false}; }

std::variant<Fiber, Value> subfiber(const Fiber& f, int64_t i) {
  const Tensor& t = *f.tensor;
  const Level& lv = t.levels[f.level];
  if (lv.kind == LevelKind::Element) return lv.val[static_cast<size_t>(f.position())];
  if (i < 1 || i > lv.size)
    throw std::out_of_range("index " + std::to_string(i) + " outside 1:" + std::to_string(lv.size));

  auto descend = [&](int64_t q) -> std::variant<Fiber, Value> {
    Fiber c{f.tensor, f.level + 1, f.path, f.virtual_fill};
    c.path.push_back(q);
    if (!c.virtual_fill && t.levels[c.level].kind == LevelKind::Element)
      return t.levels[c.level].val[static_cast<size_t>(q)];
    return c;
  };
  auto unstored = [&]() -> std::variant<Fiber, Value> {
    if (f.level + 1 >= t.levels.size() || t.levels[f.level + 1].kind == LevelKind::Element)
      return t.meta.fill;
    Fiber c{f.tensor, f.level + 1, f.path, true};
    c.path.push_back(-1);
    return c;
  };
  if (f.virtual_fill) return unstored();

  int64_t p = f.position();
  switch (lv.kind) {
    case LevelKind::Dense:
      return descend(p * lv.size + i - 1);
    case LevelKind::SparseList: {
      auto b = lv.idx.begin() + lv.pos[p], e = lv.idx.begin() + lv.pos[p + 1];
      auto it = std::lower_bound(b, e, i);
      if (it != e && *it == i) return descend(it - lv.idx.begin());
      return unstored();
    }
    case LevelKind::SparseBand:
      if (i >= lv.start[p] && i <= lv.stop[p]) return descend(lv.pos[p] + i - lv.start[p]);
      return unstored();
    case LevelKind::SparseVBL: {
      auto b = lv.idx.begin() + lv.pos[p], e = lv.idx.begin() + lv.pos[p + 1];
      auto it = std::lower_bound(b, e, i);
      if (it == e) return unstored();
      int64_t blk = it - lv.idx.begin();
      int64_t len = lv.ofs[blk + 1] - lv.ofs[blk];
      if (i < lv.idx[blk] - len + 1) return unstored();
      return descend(lv.ofs[blk + 1] - 1 - (lv.idx[blk] - i));
    }
    case LevelKind::RepeatRLE: {
      auto b = lv.idx.begin() + lv.pos[p], e = lv.idx.begin() + lv.pos[p + 1];
      auto it = std::lower_bound(b, e, i);
      return lv.val[static_cast<size_t>(it - lv.idx.begin())];
    }
    case LevelKind::Element:
      break;
  }
  return t.meta.fill;
}

std::map<std::string, std::vector<Value>> tensor_buffers(const Tensor& t) {
  std::map<std::string, std::vector<Value>> out;
  auto ints = [](const std::vector<int64_t>& v) {
    return std::vector<Value>(v.begin(), v.end());
  };
  for (size_t l = 0; l < t.levels.size(); ++l) {
    const Level& lv = t.levels[l];
    switch (lv.kind) {
      case LevelKind::Dense: break;
      case LevelKind::SparseList:
        out[t.meta.buffer("pos", l)] = ints(lv.pos);
        out[t.meta.buffer("idx", l)] = ints(lv.idx);
        break;
      case LevelKind::SparseBand:
        out[t.meta.buffer("pos", l)] = ints(lv.pos);
        out[t.meta.buffer("start", l)] = ints(lv.start);
        out[t.meta.buffer("stop", l)] = ints(lv.stop);
        break;
      case LevelKind::SparseVBL:
        out[t.meta.buffer("pos", l)] = ints(lv.pos);
        out[t.meta.buffer("idx", l)] = ints(lv.idx);
        out[t.meta.buffer("ofs", l)] = ints(lv.ofs);
        break;
      case LevelKind::RepeatRLE:
        out[t.meta.buffer("pos", l)] = ints(lv.pos);
        out[t.meta.buffer("idx", l)] = ints(lv.idx);
        out[t.meta.value_buffer()] = lv.val;
        break;
      case LevelKind::Element:
        out[t.meta.value_buffer()] = lv.val;
        break;
    }
  }
  return out;
}

// MatrixMarket ------------------------------------------------------------------

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseFileError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

MatrixMarketData parse_matrix_market(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseFileError("empty MatrixMarket file");
  std::istringstream hs(line);
  std::string banner, object, layout, field, symmetry;
  hs >> banner >> object >> layout >> field >> symmetry;
  if (banner != "%%MatrixMarket" || lower(object) != "matrix")
    throw ParseFileError("malformed MatrixMarket header: " + line);
  layout = lower(layout);
  field = lower(field);
  symmetry = lower(symmetry);
  if (layout != "coordinate" && layout != "array")
    throw ParseFileError("unsupported MatrixMarket layout '" + layout + "'");
  if (field != "real" && field != "integer" && field != "pattern" && field != "double")
    throw ParseFileError("unsupported MatrixMarket field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric")
    throw ParseFileError("unsupported MatrixMarket symmetry '" + symmetry + "'");
  if (layout == "array" && field == "pattern")
    throw ParseFileError("pattern field requires coordinate layout");

  MatrixMarketData m;
  m.type = field == "real" || field == "double" ? ElemType::Float : ElemType::Int;
  bool symmetric = symmetry == "symmetric";

  auto next_data_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      auto first = out.find_first_not_of(" \t\r");
      if (first == std::string::npos || out[first] == '%') continue;
      return true;
    }
    return false;
  };
  auto parse_num = [&](const std::string& tok) -> Value {
    auto v = parse_value(tok);
    if (!v || v->is_missing() || v->is_bool()) throw ParseFileError("bad value '" + tok + "'");
    if (m.type == ElemType::Float) return v->as_double();
    if (v->is_float()) throw ParseFileError("non-integer value in integer matrix: " + tok);
    return *v;
  };

  if (!next_data_line(line)) throw ParseFileError("missing size line");
  std::istringstream sz(line);
  int64_t rows = 0, cols = 0, nnz = 0;
  if (!(sz >> rows >> cols)) throw ParseFileError("malformed size line: " + line);
  m.dims = {rows, cols};

  std::map<std::pair<int64_t, int64_t>, Value> acc;
  auto add = [&](int64_t r, int64_t c, const Value& v) {
    if (r < 1 || r > rows || c < 1 || c > cols)
      throw ParseFileError("coordinate (" + std::to_string(r) + "," + std::to_string(c) +
                           ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    auto [it, fresh] = acc.try_emplace({r, c}, v);
    if (!fresh) {
      Value a[] = {it->second, v};
      it->second = apply_op(Op::Add, a);
      ++m.duplicates;
    }
  };

  if (layout == "coordinate") {
    if (!(sz >> nnz)) throw ParseFileError("coordinate size line needs nnz: " + line);
    for (int64_t k = 0; k < nnz; ++k) {
      if (!next_data_line(line)) throw ParseFileError("fewer entries than declared");
      std::istringstream es(line);
      int64_t r = 0, c = 0;
      std::string tok;
      if (!(es >> r >> c)) throw ParseFileError("malformed entry: " + line);
      Value v = int64_t{1};
      if (field != "pattern") {
        if (!(es >> tok)) throw ParseFileError("entry missing value: " + line);
        v = parse_num(tok);
      }
      add(r, c, v);
      if (symmetric && r != c) add(c, r, v);
    }
  } else {
    // Column-major; symmetric arrays list the lower triangle only.
    for (int64_t c = 1; c <= cols; ++c) {
      for (int64_t r = symmetric ? c : 1; r <= rows; ++r) {
        if (!next_data_line(line)) throw ParseFileError("fewer array values than declared");
        std::istringstream es(line);
        std::string tok;
        es >> tok;
        Value v = parse_num(tok);
        add(r, c, v);
        if (symmetric && r != c) add(c, r, v);
      }
    }
  }
  for (auto& [rc, v] : acc) m.entries.push_back({rc.first, rc.second, v});
  return m;
}

MatrixMarketData read_matrix_market(const std::string& path) {
  return parse_matrix_market(slurp(path));
}

std::vector<Value> assemble_dense(const MatrixMarketData& m, const Value& fill) {
  std::vector<Value> out(product(m.dims), fill);
  for (const auto& e : m.entries)
    out[static_cast<size_t>((e.row - 1) * m.dims[1] + (e.col - 1))] = e.value;
  return out;
}

DenseText parse_dense_text(const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  if (!(in >> tok) || tok != "dims:") throw ParseFileError("dense text must start with 'dims:'");
  DenseText d;
  std::vector<std::string> rest;
  while (in >> tok) rest.push_back(tok);
  // Dims run until the count of trailing values matches their product.
  size_t k = 0;
  std::string first_line = text.substr(0, text.find('\n'));
  std::istringstream fl(first_line);
  fl >> tok;
  while (fl >> tok) {
    d.dims.push_back(std::stoll(tok));
    ++k;
  }
  for (size_t j = k; j < rest.size(); ++j) {
    auto v = parse_value(rest[j]);
    if (!v) throw ParseFileError("bad value '" + rest[j] + "'");
    d.data.push_back(*v);
  }
  if (d.data.size() != product(d.dims))
    throw ParseFileError("dense text has " + std::to_string(d.data.size()) +
                         " values, dims need " + std::to_string(product(d.dims)));
  return d;
}

DenseText read_dense_text(const std::string& path) { return parse_dense_text(slurp(path)); }

std::string write_dense_text(const std::vector<int64_t>& dims, const std::vector<Value>& data) {
  std::ostringstream out;
  out << "dims:";
  for (auto d : dims) out << ' ' << d;
  out << '\n';
  size_t row = dims.empty() ? 1 : static_cast<size_t>(dims.back());
  for (size_t k = 0; k < data.size(); ++k) {
    out << to_string(data[k]);
    out << ((k + 1) % row == 0 ? '\n' : ' ');
  }
  return out.str();
}

}  // namespace coiter
