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

#include "corpus.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "coiter/oracle.hpp"
#include "gen.hpp"

namespace coiter::corpus {
namespace {

const std::vector<std::string> kFormats1 = {"dense,element", "sparselist,element", "sparseband,element",
                                            "sparsevbl,element", "repeatrle"};
const std::vector<std::string> kFormats2 = {"dense,dense,element",         "dense,sparselist,element",
                                            "dense,sparseband,element",    "dense,sparsevbl,element",
                                            "dense,repeatrle",             "sparselist,sparselist,element",
                                            "sparselist,dense,element"};

const std::vector<std::string>& formats_for(const InputDecl& in) {
  static const std::vector<std::string> dense1 = {"dense,element"}, dense2 = {"dense,dense,element"};
  if (in.dense_only) return in.sizes.size() == 1 ? dense1 : dense2;
  return in.sizes.size() == 1 ? kFormats1 : kFormats2;
}

Value fill_of(ElemType t) { return zero_of(t); }

TensorMetas sample_metas(const KernelDecl& k, const std::map<std::string, FormatSpec>& formats) {
  TensorMetas metas;
  for (const auto& in : k.inputs) {
    TensorMeta m;
    m.name = in.name;
    for (const auto& s : in.sizes) m.dims.push_back(k.max_size.at(s));
    m.format = formats.at(in.name);
    m.type = in.type;
    m.fill = fill_of(in.type);
    metas[in.name] = m;
  }
  return metas;
}

}  // namespace

const std::vector<KernelDecl>& kernels() {
  static const std::vector<KernelDecl> all = [] {
    std::vector<KernelDecl> v;
    v.push_back({"dot", "@V i C[] += A[i] * B[i]", {{"n", 64}},
                 {{"A", {"n"}}, {"B", {"n"}}}, {}});
    v.push_back({"spmspv", "@V i j y[i] += A[i, j] * x[j]", {{"m", 16}, {"n", 16}},
                 {{"A", {"m", "n"}}, {"x", {"n"}}}, {}});
    v.push_back({"triangle", "@V i j k C[] += A[i, j] && A[j, k] && A[k, i]", {{"n", 8}},
                 {{"A", {"n", "n"}, ElemType::Bool}}, {}});
    v.push_back({"masked_conv2d",
                 "@V i k j in 1:3 l in 1:3 C[i, k] += (A[i, k] != 0) * "
                 "coalesce(A[permit[offset(2 - i)[j]], permit[offset(2 - k)[l]]], 0) * "
                 "coalesce(F[permit[j], permit[l]], 0)",
                 {{"m", 9}, {"n", 9}, {"f", 3}},
                 {{"A", {"m", "n"}}, {"F", {"f", "f"}, ElemType::Float, true}}, {}});
    v.push_back({"alpha_blend", "@V i j O[i, j] = round($alpha * B[i, j] + $beta * C[i, j])",
                 {{"m", 12}, {"n", 12}},
                 {{"B", {"m", "n"}, ElemType::Int}, {"C", {"m", "n"}, ElemType::Int}},
                 {{"alpha", Value(0.25)}, {"beta", Value(0.75)}}});
    v.push_back({"similarity",
                 "((@V k l ((O[k, l] = sqrt(R[k] + R[l] - 2 * o[])) where "
                 "(@V ij o[] += A[k, ij] * A[l, ij])))) where (@V k ij R[k] += A[k, ij] * A[k, ij])",
                 {{"m", 6}, {"n", 16}},
                 {{"A", {"m", "n"}, ElemType::Int}}, {}});
    v.push_back({"concat",
                 "@V i in 1:size(A, 1) + size(B, 1) C[i] = coalesce(A[permit[i]], "
                 "B[permit[offset(size(A, 1))[i]]])",
                 {{"a", 32}, {"b", 32}}, {{"A", {"a"}}, {"B", {"b"}}}, {}});
    v.push_back({"conv1d",
                 "@V i in 1:size(A, 1) j in 1:3 C[i] += coalesce(A[permit[offset(2 - i)[j]]], 0) * "
                 "coalesce(F[permit[j]], 0)",
                 {{"n", 64}, {"f", 3}}, {{"A", {"n"}}, {"F", {"f"}, ElemType::Float, true}}, {}});
    return v;
  }();
  return all;
}

std::string Assignment::label() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [n, f] : formats) {
    os << (first ? "" : " ") << n << "=" << format_to_string(f);
    first = false;
  }
  for (const auto& [k, p] : protocols) os << " " << k << "::" << protocol_name(p);
  return os.str();
}

std::vector<Assignment> assignments(const KernelDecl& k) {
  std::vector<Assignment> out;
  CinStmtPtr kernel = parse_kernel(k.text);
  std::vector<size_t> pick(k.inputs.size(), 0);
  while (true) {
    std::map<std::string, FormatSpec> formats;
    for (size_t n = 0; n < k.inputs.size(); ++n)
      formats[k.inputs[n].name] = parse_format(formats_for(k.inputs[n])[pick[n]]);
    ProtocolAxes axes = protocol_axes(kernel, sample_metas(k, formats));
    std::vector<size_t> choice(axes.size(), 0);
    while (true) {
      Assignment a;
      a.formats = formats;
      for (size_t x = 0; x < axes.size(); ++x) a.protocols[axes[x].first] = axes[x].second[choice[x]];
      out.push_back(std::move(a));
      size_t x = axes.size();
      while (x > 0 && ++choice[x - 1] == axes[x - 1].second.size()) choice[--x] = 0;
      if (x == 0) break;
    }
    size_t n = k.inputs.size();
    while (n > 0 && ++pick[n - 1] == formats_for(k.inputs[n - 1]).size()) pick[--n] = 0;
    if (n == 0) break;
  }
  return out;
}

std::vector<Instance> instances(const KernelDecl& k, size_t shapes, size_t per_shape, uint64_t seed) {
  std::mt19937_64 rng(seed);
  CinStmtPtr kernel = parse_kernel(k.text);
  std::vector<Instance> out;
  for (size_t sh = 0; sh < shapes; ++sh) {
    std::map<std::string, int64_t> sizes;
    for (const auto& [name, max] : k.max_size)
      sizes[name] = name == "f" ? max : 1 + static_cast<int64_t>(rng() % static_cast<uint64_t>(max));
    for (size_t d = 0; d < per_shape; ++d) {
      Instance c;
      c.shape = sh;
      Tensors dense;
      for (const auto& in : k.inputs) {
        auto& dims = c.dims[in.name];
        for (const auto& s : in.sizes) dims.push_back(sizes.at(s));
        c.data[in.name] = testgen::random_values(product(dims), in.type, rng);
        dense.emplace(in.name, from_dense(in.name, dims, c.data[in.name], default_format(dims.size()),
                                          fill_of(in.type), in.type));
      }
      for (const auto& [name, t] : dense) c.all_fill.push_back(holds_only_fill(t));
      TensorMetas metas = metas_of(dense);
      CinStmtPtr bound = bind_kernel(kernel, metas, k.params);
      c.want = oracle_eval(bound, metas, dense_arrays(dense), k.params);
      out.push_back(std::move(c));
    }
    std::stable_sort(out.end() - static_cast<std::ptrdiff_t>(per_shape), out.end(),
                     [](const Instance& a, const Instance& b) { return a.all_fill < b.all_fill; });
  }
  return out;
}

size_t check_assignment(const KernelDecl& k, const Assignment& a, const std::vector<Instance>& cases,
                        double rtol, std::string* first_failure) {
  CinStmtPtr kernel = parse_kernel(k.text);
  CompileOptions opts;
  opts.protocols = a.protocols;
  size_t failures = 0;
  auto fail = [&](size_t n, const std::string& why) {
    failures += n;
    if (first_failure->empty()) *first_failure = k.name + " {" + a.label() + "} " + why;
  };
  std::optional<CompiledKernel> compiled;
  for (size_t c = 0; c < cases.size(); ++c) {
    const Instance& inst = cases[c];
    Tensors inputs;
    for (const auto& in : k.inputs)
      inputs.emplace(in.name, from_dense(in.name, inst.dims.at(in.name), inst.data.at(in.name),
                                         a.formats.at(in.name), fill_of(in.type), in.type));
    try {
      bool stale = !compiled;
      for (const auto& [name, t] : inputs)
        if (!stale && !meta_mismatch(compiled->metas.at(name), t.meta).empty()) stale = true;
      if (stale) compiled = compile_kernel(kernel, metas_of(inputs), k.params, opts);
      RunResult r = run_kernel(*compiled, inputs, k.params);
      auto bad = compare_outputs(r.outputs, inst.want, rtol);
      if (!bad.empty())
        fail(1, "instance " + std::to_string(c) + ": " + bad.front().tensor + "[" +
                    std::to_string(bad.front().offset) + "] got " + to_string(bad.front().got) + " want " +
                    to_string(bad.front().want));
    } catch (const std::exception& e) {
      compiled.reset();
      fail(1, "instance " + std::to_string(c) + ": " + e.what());
    }
  }
  return failures;
}

std::vector<KernelReport> run(size_t shapes, size_t per_shape, size_t pool_shapes, double rtol,
                              unsigned threads) {
  pool_shapes = std::max(pool_shapes, shapes);
  std::vector<KernelReport> reports;
  for (const auto& k : kernels()) {
    auto start = std::chrono::steady_clock::now();
    KernelReport rep;
    rep.kernel = k.name;
    std::vector<Assignment> as = assignments(k);
    rep.assignments = as.size();
    std::vector<Instance> pool;
    try {
      pool = instances(k, pool_shapes, per_shape, std::hash<std::string>{}(k.name));
    } catch (const std::exception& e) {
      rep.failures = 1;
      rep.first_failure = k.name + ": oracle failed: " + e.what();
      reports.push_back(rep);
      continue;
    }
    std::atomic<size_t> next{0}, failures{0};
    std::mutex mu;
    auto work = [&] {
      for (size_t job; (job = next++) < as.size();) {
        std::vector<Instance> cases;
        for (size_t sh = 0; sh < shapes; ++sh) {
          size_t from = (job * shapes + sh) % pool_shapes * per_shape;
          cases.insert(cases.end(), pool.begin() + static_cast<std::ptrdiff_t>(from),
                       pool.begin() + static_cast<std::ptrdiff_t>(from + per_shape));
        }
        std::string first;
        failures += check_assignment(k, as[job], cases, rtol, &first);
        std::lock_guard<std::mutex> g(mu);
        if (rep.first_failure.empty()) rep.first_failure = first;
      }
    };
    std::vector<std::thread> workers;
    for (unsigned t = 0; t < std::max(1u, threads); ++t) workers.emplace_back(work);
    for (auto& t : workers) t.join();
    rep.instances = as.size() * shapes * per_shape;
    rep.failures = failures;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    reports.push_back(rep);
  }
  return reports;
}

}  // namespace coiter::corpus
