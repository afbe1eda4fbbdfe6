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

#include <doctest.h>

#include <random>

#include "coiter/runtime.hpp"

using namespace coiter;

namespace {

std::vector<Value> floats(std::initializer_list<double> xs) {
  std::vector<Value> v;
  for (double x : xs) v.emplace_back(x);
  return v;
}

std::vector<Value> random_matrix(size_t n, double density, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Value> v(n, Value(0.0));
  for (auto& x : v)
    if (u(rng) < density) x = Value(static_cast<double>(1 + rng() % 3));
  return v;
}

FormatErrorCode code_of(const Tensor& t) {
  try {
    validate(t);
  } catch (const FormatError& e) {
    return e.code();
  }
  return FormatErrorCode::BadSpec;
}

}  // namespace

TEST_CASE("sparse list from the dense row") {
  Tensor a = from_dense("A", {11}, floats({0, 1.9, 0, 3.0, 0, 2.7, 0, 5.5, 0, 0, 0}),
                        parse_format("sparselist,element"), Value(0.0));
  CHECK(a.levels[0].idx == std::vector<int64_t>{2, 4, 6, 8});
  CHECK(a.levels[1].val == floats({1.9, 3.0, 2.7, 5.5}));
  CHECK(tensor_buffers(a).count("A_idx1"));
}

TEST_CASE("constant rle is one run") {
  Tensor r = from_dense("R", {4}, floats({7, 7, 7, 7}), {LevelKind::RepeatRLE}, Value(0.0));
  CHECK(r.levels[0].idx == std::vector<int64_t>{4});
  CHECK(r.levels[0].val == floats({7}));
}

TEST_CASE("sparse band holds one block") {
  Tensor b = from_dense("B", {11}, floats({0, 0, 0, 3.7, 4.7, 9.2, 1.5, 8.2, 0, 0, 0}),
                        parse_format("sparseband,element"), Value(0.0));
  CHECK(b.levels[0].start == std::vector<int64_t>{4});
  CHECK(b.levels[0].stop == std::vector<int64_t>{8});
  CHECK(b.levels[1].val == floats({3.7, 4.7, 9.2, 1.5, 8.2}));
  Tensor empty = from_dense("E", {5}, std::vector<Value>(5, Value(0.0)),
                            parse_format("sparseband,element"), Value(0.0));
  CHECK(empty.levels[0].start[0] == empty.levels[0].stop[0] + 1);
}

TEST_CASE("round trips") {
  std::vector<Value> zeros(6, Value(0.0));
  for (const char* f : {"dense,element", "sparselist,element", "sparseband,element",
                        "sparsevbl,element", "repeatrle"}) {
    INFO(f);
    CHECK(to_dense(from_dense("Z", {6}, zeros, parse_format(f), Value(0.0))) == zeros);
  }
  auto vbl = floats({0, 1, 2, 0, 0, 3, 0});
  CHECK(to_dense(from_dense("V", {7}, vbl, parse_format("sparsevbl,element"), Value(0.0))) == vbl);
  for (const char* f : {"dense,dense,element", "dense,sparselist,element",
                        "sparselist,sparselist,element", "dense,sparseband,element",
                        "dense,sparsevbl,element", "dense,repeatrle", "sparselist,dense,element"}) {
    for (uint64_t seed = 1; seed <= 20; ++seed) {
      INFO(f << " seed " << seed);
      auto m = random_matrix(64, 0.3, seed);
      Tensor t = from_dense("M", {8, 8}, m, parse_format(f), Value(0.0));
      CHECK_NOTHROW(validate(t));
      CHECK(to_dense(t) == m);
    }
  }
}

TEST_CASE("non-zero and missing fills") {
  std::vector<Value> data{Value(false), Value(true), Value(false)};
  Tensor b = from_dense("B", {3}, data, parse_format("sparselist,element"), Value(false));
  CHECK(b.levels[0].idx == std::vector<int64_t>{2});
  CHECK(to_dense(b) == data);
  auto ones = floats({1, 1, 4, 1});
  Tensor o = from_dense("O", {4}, ones, parse_format("sparselist,element"), Value(1.0));
  CHECK(o.levels[0].idx == std::vector<int64_t>{3});
  CHECK(to_dense(o) == ones);
}

TEST_CASE("subfibers") {
  auto vbl = floats({0, 1, 2, 0, 0, 3, 0});
  Tensor v = from_dense("V", {7}, vbl, parse_format("sparsevbl,element"), Value(0.0));
  auto leaf = subfiber(root_fiber(v), 6);
  REQUIRE(std::holds_alternative<Value>(leaf));
  CHECK(std::get<Value>(leaf) == Value(3.0));

  Tensor l = from_dense("L", {4}, floats({0, 5, 0, 6}), parse_format("sparselist,element"), Value(0.0));
  CHECK(std::get<Value>(subfiber(root_fiber(l), 3)) == Value(0.0));
  CHECK_THROWS(subfiber(root_fiber(l), 5));

  auto m = random_matrix(12, 0.5, 3);
  Tensor d = from_dense("D", {3, 4}, m, parse_format("dense,sparselist,element"), Value(0.0));
  auto row = subfiber(root_fiber(d), 3);
  REQUIRE(std::holds_alternative<Fiber>(row));
  CHECK(std::get<Fiber>(row).position() == 2);
  for (int64_t j = 1; j <= 4; ++j)
    CHECK(std::get<Value>(subfiber(std::get<Fiber>(row), j)) == m[8 + static_cast<size_t>(j - 1)]);

  Tensor s = from_dense("S", {2, 3}, std::vector<Value>(6, Value(0.0)),
                        parse_format("sparselist,dense,element"), Value(0.0));
  auto unstored = subfiber(root_fiber(s), 2);
  REQUIRE(std::holds_alternative<Fiber>(unstored));
  CHECK(std::get<Fiber>(unstored).virtual_fill);
  CHECK(std::get<Value>(subfiber(std::get<Fiber>(unstored), 1)) == Value(0.0));
}

TEST_CASE("validators give distinct errors") {
  Tensor l = from_dense("L", {6}, floats({0, 1, 0, 2, 3, 0}), parse_format("sparselist,element"), Value(0.0));
  Tensor bad = l;
  std::swap(bad.levels[0].idx[0], bad.levels[0].idx[1]);
  CHECK(code_of(bad) == FormatErrorCode::UnsortedIdx);
  bad = l;
  bad.levels[0].pos = {2, 1};
  CHECK(code_of(bad) == FormatErrorCode::PosRegression);

  Tensor r = from_dense("R", {6}, floats({1, 1, 2, 2, 2, 3}), {LevelKind::RepeatRLE}, Value(0.0));
  bad = r;
  bad.levels[0].idx.pop_back();
  bad.levels[0].val.pop_back();
  bad.levels[0].pos = {0, 2};
  CHECK(code_of(bad) == FormatErrorCode::RleNotTiling);

  Tensor v = from_dense("V", {7}, floats({0, 1, 2, 0, 0, 3, 0}), parse_format("sparsevbl,element"), Value(0.0));
  bad = v;
  bad.levels[0].idx = {3, 4};
  bad.levels[0].ofs = {0, 2, 4};
  bad.levels[1].val = floats({1, 2, 3, 3});
  CHECK(code_of(bad) == FormatErrorCode::VblOverlap);

  CHECK_THROWS_AS(validate_format(parse_format("dense,element"), 2), FormatError);
  CHECK_THROWS_AS(parse_format("sparselist,gizmo"), FormatError);
}

TEST_CASE("matrix market") {
  auto m = parse_matrix_market(
      "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 5\n2 2 6\n");
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].row == 1);
  CHECK(m.entries[0].col == 1);
  CHECK(m.entries[0].value == Value(5.0));
  CHECK(m.entries[1].row == 2);
  CHECK(m.entries[1].value == Value(6.0));

  auto sym = parse_matrix_market(
      "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 3\n");
  REQUIRE(sym.entries.size() == 2);
  CHECK(sym.entries[0].row == 1);
  CHECK(sym.entries[0].col == 2);
  CHECK(sym.entries[1].row == 2);
  CHECK(sym.entries[1].col == 1);

  auto pat = parse_matrix_market("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 2\n");
  CHECK(pat.entries.at(0).value.as_double() == 1.0);

  auto dup = parse_matrix_market(
      "%%MatrixMarket matrix coordinate integer general\n2 2 2\n1 2 3\n1 2 4\n");
  CHECK(dup.duplicates == 1);
  REQUIRE(dup.entries.size() == 1);
  CHECK(dup.entries[0].value.as_int() == 7);

  auto arr = parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n");
  auto dense = assemble_dense(arr, Value(0.0));
  CHECK(dense == floats({1, 3, 2, 4}));  // array format is column-major

  CHECK_THROWS_AS(parse_matrix_market("%%MatrixMarket tensor\n"), ParseFileError);
  CHECK_THROWS_AS(parse_matrix_market(
                      "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n"),
                  ParseFileError);
}

TEST_CASE("dense text format") {
  auto d = parse_dense_text("dims: 2 3\n1 2 3\n4 5 6\n");
  CHECK(d.dims == std::vector<int64_t>{2, 3});
  CHECK(d.data.size() == 6);
  auto again = parse_dense_text(write_dense_text(d.dims, d.data));
  CHECK(again.dims == d.dims);
  CHECK(again.data == d.data);
  CHECK_THROWS(parse_dense_text("dims: 2 2\n1 2 3\n"));
}

TEST_CASE("output writers") {
  Tensor a = from_dense("A", {8}, floats({4, 0, 0, 0, 0, 0, 9, 0}), parse_format("dense,element"), Value(0.0));
  TensorMeta c;
  c.name = "C";
  c.dims = {8};
  c.format = parse_format("sparselist,element");
  TensorMetas metas = metas_of({{"A", a}});
  metas["C"] = c;
  CompiledKernel k = compile_kernel(parse_kernel("@V i C[i] = A[i]"), metas, {});
  RunResult r = run_kernel(k, {{"A", a}}, {});
  const Tensor& out = r.outputs.at("C");
  CHECK(out.levels[0].idx == std::vector<int64_t>{1, 7});
  CHECK(out.levels[1].val == floats({4, 9}));

  Tensor b = from_dense("B", {4}, floats({3, 3, 3, 8}), parse_format("dense,element"), Value(0.0));
  metas = metas_of({{"B", b}});
  c.format = {LevelKind::RepeatRLE};
  c.dims = {4};
  metas["C"] = c;
  RunResult rle = run_kernel(compile_kernel(parse_kernel("@V i C[i] = B[i]"), metas, {}), {{"B", b}}, {});
  CHECK(rle.outputs.at("C").levels[0].idx == std::vector<int64_t>{3, 4});
  CHECK(rle.outputs.at("C").levels[0].val == floats({3, 8}));

  c.format = parse_format("dense,element");
  metas["C"] = c;
  RunResult dense = run_kernel(compile_kernel(parse_kernel("@V i @sieve i == 2 C[i] = 5"), metas, {}), {{"B", b}}, {});
  CHECK(to_dense(dense.outputs.at("C")) == floats({0, 5, 0, 0}));
}

TEST_CASE("non-ascending writes to append-only outputs are rejected") {
  Tensor a = from_dense("A", {4}, floats({1, 2, 3, 4}), parse_format("dense,element"), Value(0.0));
  TensorMetas metas = metas_of({{"A", a}});
  TensorMeta c;
  c.name = "C";
  c.dims = {4};
  c.format = parse_format("sparselist,element");
  metas["C"] = c;
  CHECK_THROWS_AS(compile_kernel(parse_kernel("@V i C[5 - i] = A[i]"), metas, {}), CompileError);
  TensorMeta m = c;
  m.dims = {4, 4};
  m.format = parse_format("dense,sparselist,element");
  metas["C"] = m;
  CHECK_THROWS_AS(compile_kernel(parse_kernel("@V j i C[i,j] = A[i]"), metas, {}), CompileError);
  CHECK_NOTHROW(compile_kernel(parse_kernel("@V i j C[i,j] = A[i]"), metas, {}));
}
