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

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria (capped at 125).

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "coiter/analysis.hpp"
#include "coiter/job.hpp"
#include "coiter/oracle.hpp"
#include "coiter/rewrite.hpp"
#include "coiter/unfurl.hpp"
#include "corpus.hpp"
#include "gen.hpp"

using namespace coiter;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Collects failures; keeps the first few messages.
struct Tally {
  size_t cases = 0, failures = 0;
  std::vector<std::string> first;
  void check(bool ok, const std::function<std::string()>& why) {
    ++cases;
    if (ok) return;
    ++failures;
    if (first.size() < 3) first.push_back(why());
  }
  Verdict verdict(const std::string& summary) const {
    Verdict v{failures == 0, summary};
    if (failures) {
      v.detail += "; " + std::to_string(failures) + " failing of " + std::to_string(cases);
      for (const auto& f : first) v.detail += "\n    " + f;
    }
    return v;
  }
};

std::vector<Value> floats(std::initializer_list<double> xs) {
  std::vector<Value> v;
  for (double x : xs) v.emplace_back(x);
  return v;
}

Tensor vec(const std::string& name, const std::vector<Value>& data, const std::string& format) {
  Value fill = data.empty() || data.front().is_float() ? Value(0.0) : Value(int64_t{0});
  return from_dense(name, {static_cast<int64_t>(data.size())}, data, parse_format(format), fill);
}

struct Compiled {
  CompiledKernel k;
  RunResult r;
  bool matches_oracle = false;
};

Compiled compile_run(const std::string& kernel, const Tensors& in, const CompileOptions& opts = {}) {
  Compiled c;
  c.k = compile_kernel(parse_kernel(kernel), metas_of(in), {}, opts);
  c.r = run_kernel(c.k, in, {});
  auto want = oracle_eval(c.k.bound, c.k.metas, dense_arrays(in), {});
  c.matches_oracle = compare_outputs(c.r.outputs, want, 1e-12).empty();
  return c;
}

size_t count(const std::map<std::string, size_t>& m, const std::string& key) {
  auto it = m.find(key);
  return it == m.end() ? 0 : it->second;
}

const auto kListA = floats({0, 1.9, 0, 3.0, 0, 2.7, 0, 5.5, 0, 0, 0});
const auto kBandB = floats({0, 0, 0, 3.7, 4.7, 9.2, 1.5, 8.2, 0, 0, 0});
const char* kDot = "@V i C[] += A[i] * B[i]";

std::string source_dir() { return COITER_SOURCE_DIR; }

// ---------------------------------------------------------------------------

Verdict list_band_counts() {
  Compiled band = compile_run(kDot, {{"A", vec("A", kListA, "sparselist,element")},
                                     {"B", vec("B", kBandB, "sparseband,element")}});
  const ExecCounters& c = band.r.exec.counters;
  size_t a_reads = count(c.reads_by_buffer, "A_val");
  CompileOptions walk;
  walk.protocols = {{"A.i", Protocol::Walk}, {"B.i", Protocol::Walk}};
  Compiled lists = compile_run(kDot, {{"A", vec("A", kListA, "sparselist,element")},
                                      {"B", vec("B", kBandB, "sparselist,element")}},
                               walk);
  const ExecCounters& w = lists.r.exec.counters;
  size_t band_work = c.multiplies + c.compares, walk_work = w.multiplies + w.compares;
  std::ostringstream os;
  os << "list x band: A_val reads " << a_reads << ", multiplies " << c.multiplies << ", mul+cmp "
     << band_work << "; walk x walk lists: mul+cmp " << walk_work;
  bool ok = band.matches_oracle && lists.matches_oracle && a_reads == 3 && c.multiplies == 3 &&
            walk_work >= band_work + 4;
  return {ok, os.str()};
}

Verdict zero_annihilation() {
  Tally t;
  const std::vector<std::string> formats = {"dense,element", "sparselist,element", "sparseband,element",
                                            "sparsevbl,element", "repeatrle"};
  std::mt19937_64 rng(3);
  for (const auto& fa : formats)
    for (const auto& fb : formats) {
      auto a = testgen::random_values(16, ElemType::Float, testgen::DataShape::Sparse, 0.5, rng);
      std::vector<Value> b(16, Value(0.0));
      Compiled c = compile_run(kDot, {{"A", vec("A", a, fa)}, {"B", vec("B", b, fb)}});
      size_t loops = count_loops(c.k.program), muls = c.r.exec.counters.multiplies;
      t.check(c.matches_oracle && loops == 0 && muls == 0, [&] {
        return "A=" + fa + " B=" + fb + ": loops " + std::to_string(loops) + ", multiplies " +
               std::to_string(muls);
      });
    }
  return t.verdict(std::to_string(t.cases) + " format pairs with all-fill B: 0 loop nodes, 0 multiplies");
}

std::vector<Value> sparse_with_nnz(int64_t n, int64_t nnz, std::mt19937_64& rng) {
  std::vector<int64_t> slots(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) slots[static_cast<size_t>(i)] = i;
  std::shuffle(slots.begin(), slots.end(), rng);
  std::vector<Value> v(static_cast<size_t>(n), Value(0.0));
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int64_t k = 0; k < nnz; ++k) v[static_cast<size_t>(slots[static_cast<size_t>(k)])] = Value(u(rng));
  return v;
}

Verdict merge_bounds() {
  Tally walk;
  CompileOptions ww;
  ww.protocols = {{"A.i", Protocol::Walk}, {"B.i", Protocol::Walk}};
  std::mt19937_64 rng(4);
  size_t worst_slack = SIZE_MAX;
  for (int t = 0; t < 1000; ++t) {
    int64_t n = 1 + static_cast<int64_t>(rng() % 200);
    int64_t na = static_cast<int64_t>(rng() % static_cast<uint64_t>(n + 1));
    int64_t nb = static_cast<int64_t>(rng() % static_cast<uint64_t>(n + 1));
    Compiled c = compile_run(kDot, {{"A", vec("A", sparse_with_nnz(n, na, rng), "sparselist,element")},
                                    {"B", vec("B", sparse_with_nnz(n, nb, rng), "sparselist,element")}},
                             ww);
    size_t w = c.r.exec.counters.while_iterations, bound = static_cast<size_t>(na + nb + 1);
    if (w <= bound) worst_slack = std::min(worst_slack, bound - w);
    walk.check(c.matches_oracle && w <= bound, [&] {
      return "instance " + std::to_string(t) + ": nnz " + std::to_string(na) + "+" + std::to_string(nb) +
             ", while iterations " + std::to_string(w);
    });
  }
  Tally gallop;
  CompileOptions gg;
  gg.protocols = {{"A.i", Protocol::Gallop}, {"B.i", Protocol::Gallop}};
  size_t worst_gallop = 0;
  for (int t = 0; t < 20; ++t) {
    int64_t n = 4000;
    auto b = sparse_with_nnz(n, 1000, rng);
    std::vector<Value> a(static_cast<size_t>(n), Value(0.0));
    size_t at = rng() % static_cast<size_t>(n);
    // Half the instances put A's entry on one of B's.
    if (t % 2 == 0)
      while (b[at].as_double() == 0.0) at = rng() % static_cast<size_t>(n);
    a[at] = Value(1.5);
    Compiled c = compile_run(kDot, {{"A", vec("A", a, "sparselist,element")},
                                    {"B", vec("B", b, "sparselist,element")}},
                             gg);
    size_t w = c.r.exec.counters.while_iterations;
    worst_gallop = std::max(worst_gallop, w);
    gallop.check(c.matches_oracle && w <= 4, [&] {
      return "gallop instance " + std::to_string(t) + ": while iterations " + std::to_string(w);
    });
  }
  Verdict v = walk.verdict("walk x walk: 1000 instances within nnzA+nnzB+1 (min slack " +
                           std::to_string(worst_slack) + ")");
  Verdict g = gallop.verdict("gallop x gallop nnz 1 vs 1000: max while iterations " +
                             std::to_string(worst_gallop) + " over 20 instances");
  return {v.pass && g.pass, v.detail + "; " + g.detail};
}

Verdict rle_run_sum() {
  Tally t;
  std::mt19937_64 rng(5);
  std::ostringstream os;
  for (int64_t r : {1, 5, 50}) {
    std::vector<Value> data;
    int64_t prev = 0;
    for (int64_t k = 0; k < r; ++k) {
      int64_t v;
      do v = 1 + static_cast<int64_t>(rng() % 9);
      while (v == prev);
      prev = v;
      int64_t len = 1 + static_cast<int64_t>(rng() % 6);
      for (int64_t j = 0; j < len; ++j) data.emplace_back(v);
    }
    Compiled c = compile_run("@V i C[] += A[i]", {{"A", vec("A", data, "repeatrle")}});
    size_t adds = count(c.r.exec.counters.writes_by_buffer, "C_val");
    os << (r == 1 ? "" : ", ") << "r=" << r << " adds " << adds;
    t.check(c.matches_oracle && adds == static_cast<size_t>(r), [&] {
      return "r=" + std::to_string(r) + ": " + std::to_string(adds) + " add statements";
    });
  }
  return t.verdict(os.str());
}

std::string list_band_ir() {
  CompiledKernel k = compile_kernel(parse_kernel(kDot),
                                    metas_of({{"A", vec("A", kListA, "sparselist,element")},
                                              {"B", vec("B", kBandB, "sparseband,element")}}),
                                    {});
  return print_ir(k.program);
}

Verdict golden_ir(bool update) {
  const std::string path = source_dir() + "/tests/golden/dot_list_band.ir";
  std::string first = list_band_ir(), second = list_band_ir();
  if (update) {
    std::ofstream(path) << first;
    return {true, "rewrote " + path};
  }
  std::ifstream f(path);
  std::stringstream golden;
  golden << f.rdbuf();
  CompiledKernel k = compile_kernel(parse_kernel(kDot),
                                    metas_of({{"A", vec("A", kListA, "sparselist,element")},
                                              {"B", vec("B", kBandB, "sparseband,element")}}),
                                    {});
  IrCensus c = census(k.program);
  bool band = first.find("B_val[B_pos1[0] + i - B_start1[0]]") != std::string::npos;
  std::ostringstream os;
  os << "searches " << c.searches << ", whiles " << c.whiles << ", fors " << c.fors
     << ", band lookup " << (band ? "present" : "absent") << ", snapshot "
     << (!f ? "missing" : first == golden.str() ? "byte-identical" : "differs")
     << ", repeat compile " << (first == second ? "identical" : "differs");
  bool ok = f && first == golden.str() && first == second && c.searches == 1 && c.whiles == 1 &&
            c.fors == 0 && band;
  return {ok, os.str()};
}

// ---------------------------------------------------------------------------
// Looplet and unfurl properties.

TExpr L(int64_t v) { return ir::lit(Value(v)); }
Extent ext(int64_t a, int64_t b) { return {L(a), L(b)}; }

std::vector<Value> mat(const LoopletPtr& l, int64_t lo, int64_t hi, Interpreter& env) {
  return materialize_values(l, lo, hi, env);
}

std::vector<Value> slice(const std::vector<Value>& v, int64_t from, int64_t lo, int64_t hi) {
  return {v.begin() + (lo - from), v.begin() + (hi - from + 1)};
}

struct RandomFiber {
  Tensor tensor;
  size_t level;
  int64_t row;                // 1-based row for level-1 fibers
  std::vector<Value> dense;   // the fiber's values
};

const std::vector<std::string> kLevels = {"dense,element", "sparselist,element", "sparseband,element",
                                          "sparsevbl,element", "repeatrle"};
const std::vector<Protocol> kProtocols = {Protocol::Walk, Protocol::Gallop, Protocol::Follow,
                                          Protocol::FollowZeroCheck, Protocol::Extrude};

RandomFiber random_fiber(const std::string& level, std::mt19937_64& rng) {
  int64_t n = 1 + static_cast<int64_t>(rng() % 24);
  ElemType t = rng() % 3 == 0 ? ElemType::Int : ElemType::Float;
  Value fill = zero_of(t);
  if (rng() % 2) {
    auto data = testgen::random_values(static_cast<size_t>(n), t, rng);
    return {from_dense("A", {n}, data, parse_format(level), fill, t), 0, 0, data};
  }
  // Inner fiber of a matrix with a dense outer mode.
  int64_t m = 1 + static_cast<int64_t>(rng() % 4);
  auto data = testgen::random_values(static_cast<size_t>(m * n), t, rng);
  int64_t row = 1 + static_cast<int64_t>(rng() % static_cast<uint64_t>(m));
  std::vector<Value> fiber(data.begin() + (row - 1) * n, data.begin() + row * n);
  return {from_dense("A", {m, n}, data, parse_format("dense," + level), fill, t), 1, row, fiber};
}

LoopletPtr unfurl_fiber(const RandomFiber& f, Protocol p) {
  auto n = std::make_shared<int>(0);
  FreshFn fresh = [n](const std::string& h) { return h + std::to_string(++*n); };
  TExpr pos = f.level == 0 ? L(0) : L(f.row - 1);
  return unfurl(FiberRef{&f.tensor.meta, f.level, pos, false}, p, fresh);
}

bool admissible(const RandomFiber& f, Protocol p) {
  try {
    check_protocol(f.tensor.meta, f.level, p);
    return true;
  } catch (const UnfurlError&) {
    return false;
  }
}

std::string fiber_label(const RandomFiber& f, const std::string& level, Protocol p) {
  return level + (f.level ? " (inner)" : "") + " " + protocol_name(p) + " n=" +
         std::to_string(f.dense.size());
}

Verdict properties() {
  Tally t;
  std::map<std::string, size_t> by_family;
  // A case that throws counts as failing.
  auto check = [&](const std::string& family, const std::function<bool()>& prop,
                   const std::function<std::string()>& why) {
    ++by_family[family];
    std::string error;
    bool ok = false;
    try {
      ok = prop();
    } catch (const std::exception& e) {
      error = std::string(" threw ") + e.what();
    }
    t.check(ok, [&] { return family + ": " + why() + error; });
  };
  std::mt19937_64 rng(6);

  // Unfurl soundness, protocol equivalence, truncated unfurls and modifier laws.
  for (int round = 0; round < 120; ++round)
    for (const auto& level : kLevels) {
      RandomFiber f = random_fiber(level, rng);
      Buffers bufs = tensor_buffers(f.tensor);
      Interpreter env(bufs);
      int64_t n = static_cast<int64_t>(f.dense.size());
      std::vector<std::vector<Value>> seen;
      for (Protocol p : kProtocols) {
        if (!admissible(f, p)) continue;
        LoopletPtr l = unfurl_fiber(f, p);
        auto got = mat(l, 1, n, env);
        check("unfurl soundness", [&] { return got == f.dense; }, [&] { return fiber_label(f, level, p); });
        if (!seen.empty())
          check("protocol equivalence", [&] { return got == seen.front(); }, [&] { return fiber_label(f, level, p); });
        seen.push_back(got);
        for (int k = 0; k < 3; ++k) {
          int64_t a = 1 + static_cast<int64_t>(rng() % static_cast<uint64_t>(n));
          int64_t b = a - 1 + static_cast<int64_t>(rng() % static_cast<uint64_t>(n - a + 2));
          auto part = mat(truncate(l, ext(1, n), ext(a, b)), a, b, env);
          check("truncated unfurl", [&] { return part == slice(f.dense, 1, a, b); }, [&] {
            return fiber_label(f, level, p) + " sub " + std::to_string(a) + ":" + std::to_string(b);
          });
        }
        check("offset(0) identity", [&] { return mat(unfurl_modified(l, L(n), {{ModKind::Offset, L(0), nullptr}}), 1, n, env) == f.dense; },
              [&] { return fiber_label(f, level, p); });
        check("window(1,size) identity", [&] { return mat(unfurl_modified(l, L(n), {{ModKind::Window, L(1), L(n)}}), 1, n, env) == f.dense; },
              [&] { return fiber_label(f, level, p); });
        check("permit in-bounds identity", [&] { return mat(unfurl_modified(l, L(n), {{ModKind::Permit, nullptr, nullptr}}), 1, n, env) == f.dense; },
              [&] { return fiber_label(f, level, p); });
      }
      check("protocols per level", [&] { return seen.size() >= 2; }, [&] { return level; });
    }

  // Looplet trees: truncation, shift and spike laws.
  testgen::TreeGen g(7);
  Buffers none;
  Interpreter env(none);
  for (int k = 0; k < 2500; ++k) {
    int64_t lo = 1 + g.below(3), hi = lo + g.below(10);
    LoopletPtr l = g.gen(lo, hi, 0);
    auto full = mat(l, lo, hi, env);
    int64_t a = lo + g.below(hi - lo + 1);
    int64_t b = a - 1 + g.below(hi - a + 2);
    check("tree truncation", [&] { return mat(truncate(l, ext(lo, hi), ext(a, b)), a, b, env) == slice(full, lo, a, b); },
          [&] { return render(l) + " sub " + std::to_string(a) + ":" + std::to_string(b); });
    int64_t d = g.below(7) - 3;
    check("shift law", [&] { return mat(lp::shift(L(d), l), lo + d, hi + d, env) == full; },
          [&] { return render(l) + " shifted by " + std::to_string(d); });
  }
  for (int k = 0; k < 1000; ++k) {
    int64_t lo = 1 + g.below(3), hi = lo + 1 + g.below(10);
    LoopletPtr body = lp::leaf(L(g.below(9))), tail = lp::leaf(L(g.below(9)));
    int64_t a = lo + g.below(hi - lo), b = a - 1 + g.below(hi - a + 1);  // b < hi
    check("spike law", [&] { return mat(truncate(lp::spike(body, tail), ext(lo, hi), ext(a, b)), a, b, env) ==
              mat(truncate(lp::run(body), ext(lo, hi), ext(a, b)), a, b, env); },
          [&] { return render(body) + " sub " + std::to_string(a) + ":" + std::to_string(b); });
  }

  // Style resolution is a commutative, associative, idempotent join.
  for (int x = 0; x <= static_cast<int>(Style::Switch); ++x)
    for (int y = 0; y <= static_cast<int>(Style::Switch); ++y)
      for (int z = 0; z <= static_cast<int>(Style::Switch); ++z) {
        auto a = static_cast<Style>(x), b = static_cast<Style>(y), c = static_cast<Style>(z);
        bool ok = resolve_style(a, b) == resolve_style(b, a) &&
                  resolve_style(resolve_style(a, b), c) == resolve_style(a, resolve_style(b, c)) &&
                  resolve_style(a, a) == a && resolve_style(a, b) == std::max(a, b);
        check("style join", [&] { return ok; }, [&] { return std::string(style_name(a)) + "," + style_name(b) + "," + style_name(c); });
      }

  std::ostringstream os;
  os << t.cases << " cases (";
  bool first = true;
  for (const auto& [fam, n] : by_family) {
    os << (first ? "" : ", ") << fam << " " << n;
    first = false;
  }
  os << ")";
  Verdict v = t.verdict(os.str());
  if (t.cases < 10000) {
    v.pass = false;
    v.detail += "; fewer than 10000 cases";
  }
  return v;
}

// ---------------------------------------------------------------------------

Verdict oracle_corpus(size_t shapes, size_t per_shape, unsigned threads) {
  auto reports = corpus::run(shapes, per_shape, 4 * shapes, 1e-12, threads);
  Verdict v;
  std::ostringstream os;
  size_t total = 0;
  for (const auto& r : reports) {
    total += r.instances;
    os << "\n    " << r.kernel << ": " << r.assignments << " assignments, " << r.instances
       << " instances, " << r.failures << " failures, " << std::fixed << std::setprecision(1) << r.seconds
       << "s";
    if (r.failures) {
      v.pass = false;
      os << "\n      first: " << r.first_failure;
    }
  }
  v.detail = std::to_string(total) + " instances, " + std::to_string(shapes) + " shapes x " +
             std::to_string(per_shape) + " data draws per assignment" + os.str();
  return v;
}

bool same_value(const Value& a, const Value& b) {
  if (a.is_missing() || b.is_missing()) return a.is_missing() && b.is_missing();
  return values_close(a, b, 1e-12);
}

// Compares the kernel outputs of two oracle results; an output absent from
// `got` must be all fill. Where-scoped temporaries are not observable.
std::string compare_arrays(const DenseArrays& want, const DenseArrays& got, const TensorMetas& metas,
                           const std::map<std::string, const CinStmt*>& scopes) {
  for (const auto& [name, w] : want) {
    if (scopes.at(name)) continue;
    auto it = got.find(name);
    for (size_t k = 0; k < w.data.size(); ++k) {
      Value g = it == got.end() ? metas.at(name).fill : it->second.data.at(k);
      if (!same_value(w.data[k], g))
        return name + "[" + std::to_string(k) + "] " + to_string(g) + " vs " + to_string(w.data[k]);
    }
  }
  return "";
}

Verdict rewrite_preservation() {
  Tally t;
  size_t changed = 0;
  for (uint64_t seed = 1; seed <= 1000; ++seed) {
    testgen::RandomKernel rk = testgen::random_kernel(seed);
    std::string why;
    try {
      TensorMetas metas = metas_of(rk.inputs);
      CinStmtPtr bound = bind_kernel(parse_kernel(rk.text), metas, rk.params);
      DenseArrays in = dense_arrays(rk.inputs);
      DenseArrays want = oracle_eval(bound, metas, in, rk.params);
      auto scopes = result_scopes(bound);
      for (uint64_t order : {0, 1, 2}) {
        SimplifyOptions so;
        so.metas = &metas;
        so.shuffle_seed = order ? mix_seed(seed, order) : 0;
        SimplifyStats st;
        CinStmtPtr s = simplify(bound, RuleSet::standard(), so, &st);
        if (order == 0 && print(s) != print(bound)) ++changed;
        std::string diff = compare_arrays(want, oracle_eval(s, metas, in, rk.params), metas, scopes);
        if (!diff.empty()) {
          why = "order " + std::to_string(order) + ": " + diff + "\n      simplified: " + print(s);
          break;
        }
      }
    } catch (const std::exception& e) {
      why = e.what();
    }
    t.check(why.empty(), [&] { return "seed " + std::to_string(seed) + ": " + rk.text + "\n      " + why; });
  }
  return t.verdict("1000 kernels, 3 rule orders each, " + std::to_string(changed) + " changed by simplify");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  bool update_golden = false;
  size_t shapes = 10, per_shape = 10;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<int> only;
  app.add_flag("--update-golden", update_golden, "Rewrite the golden IR snapshot");
  app.add_option("--shapes", shapes, "Corpus size draws per kernel");
  app.add_option("--per-shape", per_shape, "Corpus data draws per size draw");
  app.add_option("--threads", threads, "Corpus worker threads");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  std::vector<Criterion> all = {
      {1, "oracle corpus", [&] { return oracle_corpus(shapes, per_shape, threads); }},
      {2, "list x band dot counts", list_band_counts},
      {3, "zero annihilation", zero_annihilation},
      {4, "merge bounds", merge_bounds},
      {5, "RLE run summing", rle_run_sum},
      {6, "looplet and unfurl properties", properties},
      {7, "golden dot IR", [&] { return golden_ir(update_golden); }},
      {8, "rewrite preservation", rewrite_preservation},
  };
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << " (" << std::fixed
              << std::setprecision(1) << secs << "s): " << v.detail << std::endl;
  }
  return std::min(failed, 125);
}
