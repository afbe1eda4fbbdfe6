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

#include "coiter/runtime.hpp"

#include <cmath>

namespace coiter {
namespace {

bool appends_only(const TensorMeta& m) {
  for (LevelKind k : m.format)
    if (k != LevelKind::Dense && k != LevelKind::Element) return true;
  return false;
}

// Dense outputs live in their value buffer; append-only outputs collect
// coordinates here and are packed when the run ends.
class OutputHooks : public HookHandler {
 public:
  explicit OutputHooks(const TensorMetas& metas) : metas_(metas) {}

  void on_init(const std::string& tensor, Buffers& buffers) override {
    const TensorMeta& m = metas_.at(tensor);
    if (appends_only(m)) {
      entries_[tensor].clear();
      last_.erase(tensor);
    }
    else buffers[m.value_buffer()].assign(product(m.dims), m.fill);
  }

  void on_finalize(const std::string&, Buffers&) override {}

  void on_append(const std::string& tensor, int64_t coord, UpdateOp op, const Value& v,
                 Buffers&) override {
    const TensorMeta& m = metas_.at(tensor);
    if (coord < 0 || static_cast<size_t>(coord) >= product(m.dims))
      throw ExecError("append to " + tensor + " at " + std::to_string(coord) + " is out of bounds");
    auto last = last_.find(tensor);
    if (last != last_.end() && coord < last->second)
      throw ExecError("non-ascending write to append-only output " + tensor);
    last_[tensor] = coord;
    auto& e = entries_[tensor];
    auto it = e.find(coord);
    Value old = it == e.end() ? m.fill : it->second;
    e[coord] = apply_update(op, old, v);
  }

  std::vector<Value> dense(const std::string& tensor, const Buffers& buffers) const {
    const TensorMeta& m = metas_.at(tensor);
    if (!appends_only(m)) {
      auto it = buffers.find(m.value_buffer());
      if (it == buffers.end()) return std::vector<Value>(product(m.dims), m.fill);
      return it->second;
    }
    std::vector<Value> out(product(m.dims), m.fill);
    auto it = entries_.find(tensor);
    if (it != entries_.end())
      for (const auto& [c, v] : it->second) out[static_cast<size_t>(c)] = v;
    return out;
  }

 private:
  const TensorMetas& metas_;
  std::map<std::string, std::map<int64_t, Value>> entries_;
  std::map<std::string, int64_t> last_;
};

}  // namespace

TensorMetas metas_of(const Tensors& tensors) {
  TensorMetas out;
  for (const auto& [name, t] : tensors) {
    out[name] = t.meta;
    out[name].name = name;
  }
  return out;
}

DenseArrays dense_arrays(const Tensors& tensors) {
  DenseArrays out;
  for (const auto& [name, t] : tensors) out[name] = DenseArray{t.dims(), to_dense(t)};
  return out;
}

std::string meta_mismatch(const TensorMeta& compiled, const TensorMeta& given) {
  auto dims = [](const std::vector<int64_t>& d) {
    std::string s;
    for (size_t k = 0; k < d.size(); ++k) s += (k ? "x" : "") + std::to_string(d[k]);
    return s;
  };
  if (compiled.dims != given.dims) return "dims " + dims(given.dims) + ", compiled for " + dims(compiled.dims);
  if (format_to_string(compiled.format) != format_to_string(given.format))
    return "format " + format_to_string(given.format) + ", compiled for " + format_to_string(compiled.format);
  if (!(compiled.fill == given.fill)) return "fill " + to_string(given.fill) + ", compiled for " + to_string(compiled.fill);
  if (compiled.type != given.type) return "a different element type";
  if (compiled.all_fill != given.all_fill)
    return given.all_fill ? "only fill values, compiled for stored data" : "stored data, compiled as all fill";
  return "";
}

RunResult run_kernel(const CompiledKernel& k, const Tensors& inputs, const Params& params,
                     bool trace) {
  Buffers buffers;
  for (const auto& name : k.inputs) {
    auto it = inputs.find(name);
    if (it == inputs.end()) throw ExecError("no tensor bound to " + name);
    std::string bad = meta_mismatch(k.metas.at(name), it->second.meta);
    if (!bad.empty()) throw ExecError("tensor " + name + " has " + bad);
    for (auto& [b, data] : tensor_buffers(it->second)) buffers[b] = std::move(data);
  }
  std::map<std::string, Value> vars;
  for (const auto& [name, v] : params) vars["$" + name] = v;
  OutputHooks hooks(k.metas);
  RunResult r;
  r.exec = interpret(k.program, buffers, vars, &hooks, trace);
  for (const auto& name : k.outputs) {
    const TensorMeta& m = k.metas.at(name);
    std::vector<Value> data = hooks.dense(name, buffers);
    for (auto& v : data)
      if (!v.is_missing()) v = coerce_to(m.type, v);
    r.outputs.emplace(name, from_dense(name, m.dims, data, m.format, m.fill, m.type));
  }
  return r;
}

std::vector<Mismatch> compare_outputs(const Tensors& got, const DenseArrays& want, double rtol) {
  std::vector<Mismatch> out;
  for (const auto& [name, w] : want) {
    auto it = got.find(name);
    if (it == got.end()) {
      out.push_back({name, 0, kMissing, kMissing});
      continue;
    }
    std::vector<Value> g = to_dense(it->second);
    if (g.size() != w.data.size()) {
      out.push_back({name, 0, Value(static_cast<int64_t>(g.size())),
                     Value(static_cast<int64_t>(w.data.size()))});
      continue;
    }
    for (size_t k = 0; k < g.size(); ++k)
      if (!values_close(g[k], w.data[k], rtol)) out.push_back({name, k, g[k], w.data[k]});
  }
  return out;
}

CheckResult check_kernel(const CinStmtPtr& kernel, const Tensors& inputs, const Params& params,
                         const CompileOptions& opts, double rtol) {
  CheckResult c;
  CompiledKernel k = compile_kernel(kernel, metas_of(inputs), params, opts);
  c.run = run_kernel(k, inputs, params);
  DenseArrays want = oracle_eval(k.bound, k.metas, dense_arrays(inputs), params);
  c.mismatches = compare_outputs(c.run.outputs, want, rtol);
  c.ok = c.mismatches.empty();
  return c;
}

}  // namespace coiter
