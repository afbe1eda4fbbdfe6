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

#include "coiter/analysis.hpp"
#include "coiter/cin.hpp"

using namespace coiter;

namespace {

void round_trips(const std::string& text) {
  INFO(text);
  CinStmtPtr a = parse_kernel(text);
  std::string once = print(a);
  CinStmtPtr b = parse_kernel(once);
  CHECK(same_stmt(a, b));
  CHECK(print(b) == once);
}

std::string parse_error(const std::string& text, int* line = nullptr, int* col = nullptr) {
  try {
    parse_kernel(text);
  } catch (const ParseError& e) {
    if (line) *line = e.line();
    if (col) *col = e.col();
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("dot product parses to a forall over an add-update") {
  CinStmtPtr s = parse_kernel("@V i C[] += A[i] * B[i]");
  REQUIRE(s->kind == StmtKind::Forall);
  CHECK(s->index == "i");
  const CinStmtPtr& a = s->body;
  REQUIRE(a->kind == StmtKind::Assign);
  CHECK(a->op == UpdateOp::Add);
  CHECK(a->lhs->name == "C");
  CHECK(a->lhs->slots.empty());
  REQUIRE(a->rhs->kind == ExprKind::Call);
  CHECK(a->rhs->op == Op::Mul);
  CHECK(print(a->rhs) == "A[i] * B[i]");
}

TEST_CASE("triangle count nests three loops") {
  CinStmtPtr s = parse_kernel("@V i j k C[] += A[i,j] && A[j,k] && A[k,i]");
  std::vector<std::string> order;
  CinStmtPtr cur = s;
  while (cur->kind == StmtKind::Forall) {
    order.push_back(cur->index);
    cur = cur->body;
  }
  CHECK(order == std::vector<std::string>{"i", "j", "k"});
  REQUIRE(cur->kind == StmtKind::Assign);
  CHECK(tensors_read(s) == std::set<std::string>{"A"});
}

TEST_CASE("opaque index call parses") {
  CinStmtPtr s = parse_kernel("@V i A[i] = B[f(i)]");
  const CinExprPtr& rhs = s->body->rhs;
  REQUIRE(rhs->kind == ExprKind::Access);
  const CinExprPtr& ix = rhs->slots.at(0).index;
  REQUIRE(ix->kind == ExprKind::Call);
  CHECK(ix->name == "f");
}

TEST_CASE("printer round trips") {
  for (const char* k : {
           "@V i C[] += A[i] * B[i]",
           "@V i j k C[] += A[i,j] && A[j,k] && A[k,i]",
           "@V i in 1:10 C[i] = coalesce(A[permit[i]], B[permit[offset(3)[i]]])",
           "@V i in 1:3 C[i] = A[window(2,4)[i]]",
           "@V i C[] += A[i::gallop] * B[i::follow]",
           "@V i C[i] <<min>>= A[i]",
           "@V i C[i] <<max>>= A[i]",
           "@V i C[i] <<or>>= A[i] != 0",
           "@V i C[i] *= A[i]",
           "@V i @sieve i == 3 C[] += A[i]",
           "@multi { @V i C[] += A[i]; @V i D[i] = A[i] }",
           "@V k l (O[k,l] = sqrt(R[k] + R[l] - 2 * o[])) where (@V i o[] += A[i,k] * A[i,l])",
           "@pass A B",
           "@V i in 1:$n C[i] = $alpha * A[i] + -1.5",
           "@V i C[i] = round(ifelse(A[i] > 0, A[i], -A[i]))",
       })
    round_trips(k);
}

TEST_CASE("comments and whitespace are ignored") {
  CinStmtPtr a = parse_kernel("# dot\n@V i\n  C[] += A[i]  # trailing\n");
  CHECK(same_stmt(a, parse_kernel("@V i C[] += A[i]")));
}

TEST_CASE("syntax errors carry line and column") {
  int line = 0, col = 0;
  std::string msg = parse_error("@V i\nC[] += A[i] *", &line, &col);
  CHECK(!msg.empty());
  CHECK(line == 2);
  CHECK(col >= 13);
  CHECK(!parse_error("@V i C[] += A[i").empty());
  CHECK(!parse_error("@V i C[] <<xor>>= A[i]").empty());
}

TEST_CASE("protocol annotations attach only to indices") {
  CHECK(!parse_error("@V i C[] += A[(i + 1)::gallop]").empty());
  CHECK(!parse_error("@V i C[] += A[i]::walk").empty());
  CHECK_THROWS(parse_kernel("@V i C[] += A[i::sprint]"));
}

TEST_CASE("binder audit rejects free and rebound indices") {
  CHECK_THROWS_AS(audit_binders(parse_kernel("@V i C[] += A[j]")), CompileError);
  CHECK_THROWS_AS(audit_binders(parse_kernel("@V i @V i C[] += A[i]")), CompileError);
  CHECK_NOTHROW(audit_binders(parse_kernel("@V i j C[] += A[i,j]")));
}

TEST_CASE("scatter normalization introduces sieved loops") {
  TensorMetas metas;
  metas["B"].dims = {10};
  metas["B"].format = parse_format("dense,element");
  int n = 0;
  auto fresh = [&](const std::string& hint) { return hint + std::to_string(++n); };

  CinStmtPtr s = normalize_scatter(parse_kernel("@V i A[i] = B[f(i)]"), metas, fresh);
  CHECK(print(s) == print(parse_kernel("@V i j1 in 1:10 @sieve j1 == f(i) A[i] = B[j1]")));

  CinStmtPtr plain = parse_kernel("@V i A[i] = B[i]");
  CHECK(same_stmt(normalize_scatter(plain, metas, fresh), plain));

  n = 0;
  CinStmtPtr two = normalize_scatter(parse_kernel("@V i A[i] = B[f(i)] + B[g(i)]"), metas, fresh);
  CHECK(print(two) ==
        print(parse_kernel("@V i j1 in 1:10 @sieve j1 == f(i) @V j2 in 1:10 @sieve j2 == g(i) A[i] = B[j1] + B[j2]")));
}

TEST_CASE("result scopes") {
  CinStmtPtr single = parse_kernel("@V i C[] += A[i]");
  auto s1 = result_scopes(single);
  REQUIRE(s1.count("C"));
  CHECK(s1["C"] == nullptr);

  CinStmtPtr w = parse_kernel(
      "@V k l (O[k,l] = sqrt(o[])) where (@V i o[] += A[i,k] * A[i,l])");
  auto s2 = result_scopes(w);
  REQUIRE(s2.count("o"));
  REQUIRE(s2["o"] != nullptr);
  CHECK(s2["o"]->kind == StmtKind::Where);
  CHECK(s2["O"] == nullptr);

  auto s3 = result_scopes(parse_kernel("@multi { @V i C[] += A[i]; @V i D[i] = A[i] }"));
  CHECK(s3.size() == 2);
  CHECK(s3["C"] == nullptr);
  CHECK(s3["D"] == nullptr);
}

TEST_CASE("a tensor written by two multi branches is rejected") {
  CHECK_THROWS(result_scopes(parse_kernel("@multi { @V i C[] += A[i]; @V i C[] += B[i] }")));
}

TEST_CASE("results of statements") {
  CHECK(results(parse_kernel("@pass A B")) == std::vector<std::string>{"A", "B"});
  CHECK(results(parse_kernel("@V i C[i] = A[i]")) == std::vector<std::string>{"C"});
  CHECK(results(parse_kernel("(@V i C[i] = t[]) where (t[] = 1)")) ==
        std::vector<std::string>{"C"});
}
