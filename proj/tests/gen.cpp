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

#include "gen.hpp"

#include <set>

namespace coiter::testgen {
namespace {

TExpr L(int64_t v) { return ir::lit(Value(v)); }

}  // namespace

int64_t TreeGen::below(int64_t n) { return static_cast<int64_t>(rng_() % static_cast<uint64_t>(n)); }

double TreeGen::small() { return static_cast<double>(rng_() % 7); }

LoopletPtr TreeGen::gen(int64_t lo, int64_t hi, int depth) {
  int pick = static_cast<int>(rng_() % (depth >= 4 ? 3 : 7));
  switch (pick) {
    case 0:
      return lp::run(lp::leaf(ir::lit(Value(small()))));
    case 1:
      return lp::spike(lp::leaf(ir::lit(Value(small()))), lp::leaf(ir::lit(Value(small()))));
    case 2: {
      double k = small();
      return lp::lookup("i", [k](const TExpr& i) {
        return lp::leaf(ir::call(Op::Add, {ir::call(Op::Mul, {i, ir::lit(Value(k))}), ir::lit(Value(0.5))}));
      });
    }
    case 3: {
      std::vector<Phase> phases;
      int64_t at = lo - 1;
      int n = 1 + static_cast<int>(rng_() % 3);
      for (int p = 0; p < n; ++p) {
        int64_t stop = p + 1 == n ? hi : std::min(hi, at + below(4));
        phases.push_back({p + 1 == n ? nullptr : L(stop), gen(at + 1, stop, depth + 1)});
        at = stop;
      }
      return lp::pipeline(std::move(phases));
    }
    case 4: {
      int64_t d = below(5) - 2;
      return lp::shift(L(d), gen(lo - d, hi - d, depth + 1));
    }
    case 5: {
      bool first = rng_() % 2;
      return lp::switch_of({{ir::lit(Value(first)), gen(lo, hi, depth + 1)},
                            {ir::lit(Value(true)), gen(lo, hi, depth + 1)}});
    }
    default:
      return lp::simplify(gen(lo, hi, depth + 1));
  }
}

std::vector<Value> random_values(size_t n, ElemType t, DataShape shape, double density,
                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&]() -> Value {
    switch (t) {
      case ElemType::Bool: return Value(true);
      case ElemType::Int: return Value(static_cast<int64_t>(1 + rng() % 9));
      case ElemType::Float: return Value(1.0 - u(rng));
    }
    return Value(1.0);
  };
  std::vector<Value> v(n, zero_of(t));
  switch (shape) {
    case DataShape::AllFill:
      break;
    case DataShape::Sparse:
      for (auto& x : v)
        if (u(rng) < density) x = draw();
      break;
    case DataShape::Dense:
      for (auto& x : v) x = draw();
      break;
    case DataShape::Runs: {
      size_t k = 0;
      while (k < n) {
        size_t len = 1 + rng() % 6;
        Value x = u(rng) < 0.4 ? zero_of(t) : draw();
        for (size_t e = 0; e < len && k < n; ++e) v[k++] = x;
      }
      break;
    }
  }
  return v;
}

std::vector<Value> random_values(size_t n, ElemType t, std::mt19937_64& rng) {
  static const double densities[] = {0.05, 0.2, 0.5};
  int pick = static_cast<int>(rng() % 7);
  if (pick == 0) return random_values(n, t, DataShape::AllFill, 0, rng);
  if (pick == 1) return random_values(n, t, DataShape::Dense, 1, rng);
  if (pick == 2 && t != ElemType::Bool) return random_values(n, t, DataShape::Runs, 0, rng);
  return random_values(n, t, DataShape::Sparse, densities[rng() % 3], rng);
}

namespace {

class KernelGen {
 public:
  explicit KernelGen(uint64_t seed) : rng_(seed) {}

  RandomKernel make() {
    RandomKernel k;
    std::vector<std::string> loops;
    std::string head;
    int depth = 1 + pick(2);
    const char* names[] = {"i", "j"};
    for (int d = 0; d < depth; ++d) {
      loops.push_back(names[d]);
      head += "@V " + std::string(names[d]) + " in " + extent() + " ";
    }
    k.text = head + stmt(loops, 0);
    k.params["n"] = Value(static_cast<int64_t>(pick(6)));
    const char* formats[] = {"dense,element", "sparselist,element", "sparseband,element", "sparsevbl,element",
                             "repeatrle"};
    for (const char* t : {"A", "B"}) {
      auto v = random_values(5, ElemType::Int, rng_);
      k.inputs[t] = from_dense(t, {5}, v, parse_format(formats[pick(5)]), Value(int64_t{0}), ElemType::Int);
    }
    // Indexed outputs get an explicit shape; every index stays within 1:5.
    for (const auto& out : vector_outputs_)
      k.inputs[out] = from_dense(out, {5}, std::vector<Value>(5, Value(0.0)), parse_format("dense,element"),
                                 Value(0.0), ElemType::Float);
    auto m = random_values(25, ElemType::Int, rng_);
    k.inputs["M"] = from_dense("M", {5, 5}, m, parse_format("dense,sparselist,element"), Value(int64_t{0}),
                               ElemType::Int);
    return k;
  }

 private:
  std::mt19937_64 rng_;
  int temp_count_ = 0;
  std::set<std::string> vector_outputs_;

  int pick(int n) { return static_cast<int>(rng_() % static_cast<uint64_t>(n)); }

  std::string extent() {
    switch (pick(4)) {
      case 0: return "1:$n";
      case 1: return "1:5";
      case 2: return "2:4";
      default: return "1:" + std::to_string(pick(6));
    }
  }

  std::string index(const std::vector<std::string>& loops) { return loops[static_cast<size_t>(pick(static_cast<int>(loops.size())))]; }

  std::string leaf(const std::vector<std::string>& loops) {
    std::string i = index(loops);
    switch (pick(9)) {
      case 0: return std::to_string(pick(4) - 1);
      case 1: return i;
      case 2: return "A[" + i + "]";
      case 3: return "B[" + i + "]";
      case 4: return "M[" + index(loops) + ", " + index(loops) + "]";
      case 5: return "coalesce(A[permit[offset(" + std::to_string(pick(3)) + ")[" + i + "]]], " +
                     std::to_string(pick(3)) + ")";
      case 6: return "0.5";
      case 7: return "$n";
      default: return "A[" + i + "]";
    }
  }

  std::string expr(const std::vector<std::string>& loops, int depth) {
    if (depth >= 3 || pick(3) == 0) return leaf(loops);
    std::string a = expr(loops, depth + 1), b = expr(loops, depth + 1);
    switch (pick(8)) {
      case 0: return "(" + a + " + " + b + ")";
      case 1: return "(" + a + " - " + b + ")";
      case 2: return "(" + a + " * " + b + ")";
      case 3: return "min(" + a + ", " + b + ")";
      case 4: return "max(" + a + ", " + b + ")";
      case 5: return "-(" + a + ")";
      case 6: return "(" + a + " * 0)";
      default: return "(" + a + " * 1 + 0)";
    }
  }

  std::string cond(const std::vector<std::string>& loops) {
    switch (pick(5)) {
      case 0: return "true";
      case 1: return "false";
      case 2: return index(loops) + " == " + std::to_string(1 + pick(5));
      case 3: return "(" + expr(loops, 2) + " < " + expr(loops, 2) + ")";
      default: return "(" + expr(loops, 2) + " != 0)";
    }
  }

  std::string lhs(const std::string& name, const std::vector<std::string>& loops) {
    if (pick(2) == 0) return name + "[]";
    vector_outputs_.insert(name);
    return name + "[" + index(loops) + "]";
  }

  std::string assign(const std::string& out, const std::vector<std::string>& loops) {
    static const char* ops[] = {"=", "+=", "+=", "*=", "<<min>>=", "<<max>>="};
    return lhs(out, loops) + " " + ops[pick(6)] + " " + expr(loops, 0);
  }

  std::string stmt(const std::vector<std::string>& loops, int depth) {
    int p = depth >= 2 ? 0 : pick(6);
    switch (p) {
      case 1:
        return "@sieve " + cond(loops) + " (" + stmt(loops, depth + 1) + ")";
      case 2:
        return "@multi { " + assign("C", loops) + "; " + assign("D", loops) + " }";
      case 3: {
        std::string t = "t" + std::to_string(++temp_count_);
        std::string inner = "k";
        std::vector<std::string> with_k = loops;
        with_k.push_back(inner);
        vector_outputs_.insert("C");
        return "(C[" + index(loops) + "] += " + t + "[] * " + leaf(loops) + ") where (@V " + inner + " in " +
               extent() + " " + t + "[] += " + expr(with_k, 1) + ")";
      }
      case 4: {
        std::vector<std::string> more = loops;
        more.push_back("k");
        return "@V k in " + extent() + " " + assign("C", more);
      }
      default:
        return assign("C", loops);
    }
  }
};

}  // namespace

RandomKernel random_kernel(uint64_t seed) { return KernelGen(seed).make(); }

}  // namespace coiter::testgen
