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

#include "coiter/job.hpp"

#include <algorithm>
#include <functional>
#include <json.hpp>
#include <random>
#include <sstream>

namespace coiter {
namespace {

using json = nlohmann::json;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::pair<std::string, std::string> key_value(const std::string& s, const std::string& what) {
  auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw SpecError("expected key=value in " + what + ": " + s);
  return {s.substr(0, eq), s.substr(eq + 1)};
}

int64_t to_int(const std::string& s, const std::string& what) {
  try {
    size_t used = 0;
    int64_t v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SpecError("bad integer for " + what + ": " + s);
  }
}

ElemType infer_type(const std::vector<Value>& data) {
  bool any_float = false, all_bool = !data.empty();
  for (const auto& v : data) {
    any_float = any_float || v.is_float();
    all_bool = all_bool && v.is_bool();
  }
  return any_float ? ElemType::Float : all_bool ? ElemType::Bool : ElemType::Int;
}

Value from_json(const json& j) {
  if (j.is_null()) return kMissing;
  if (j.is_boolean()) return Value(j.get<bool>());
  if (j.is_number_integer()) return Value(j.get<int64_t>());
  if (j.is_number()) return Value(j.get<double>());
  throw SpecError("unsupported value in data: " + j.dump());
}

json to_json(const Value& v) {
  if (v.is_missing()) return nullptr;
  if (v.is_bool()) return v.as_bool();
  if (v.is_int()) return v.as_int();
  return v.as_double();
}

void flatten(const json& j, size_t depth, std::vector<int64_t>& dims, std::vector<Value>& out) {
  if (!j.is_array()) {
    if (depth != dims.size()) throw SpecError("data array is not rectangular");
    out.push_back(from_json(j));
    return;
  }
  if (depth == dims.size()) dims.push_back(static_cast<int64_t>(j.size()));
  else if (dims[depth] != static_cast<int64_t>(j.size()))
    throw SpecError("data array is not rectangular");
  for (const auto& x : j) flatten(x, depth + 1, dims, out);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<int64_t> parse_dims(const std::string& text) {
  std::vector<int64_t> dims;
  if (text.empty()) return dims;
  std::string t = text;
  for (auto& c : t)
    if (c == ',') c = 'x';
  for (const auto& p : split(t, 'x')) {
    int64_t d = to_int(p, "dims");
    if (d < 1) throw SpecError("dimension must be positive: " + p);
    dims.push_back(d);
  }
  return dims;
}

RandomSpec parse_random_spec(const std::string& body) {
  RandomSpec r;
  bool have_dims = false;
  // dims may use commas too, so keys are split on ",key=".
  std::vector<std::string> parts;
  std::string cur;
  for (size_t k = 0; k < body.size(); ++k) {
    if (body[k] == ',') {
      auto next = body.find_first_of(",=", k + 1);
      if (next != std::string::npos && body[next] == '=') {
        parts.push_back(cur);
        cur.clear();
        continue;
      }
    }
    cur += body[k];
  }
  if (!cur.empty()) parts.push_back(cur);
  for (const auto& p : parts) {
    auto [k, v] = key_value(p, "random spec");
    if (k == "dims") {
      r.dims = parse_dims(v);
      have_dims = true;
    } else if (k == "density") {
      try {
        r.density = std::stod(v);
      } catch (const std::exception&) {
        throw SpecError("bad density: " + v);
      }
      if (r.density < 0 || r.density > 1) throw SpecError("density must lie in [0, 1]: " + v);
    } else if (k == "dist") {
      if (v != "uniform01" && v != "int" && v != "bool" && v != "ones")
        throw SpecError("unknown dist " + v + " (uniform01, int, bool, ones)");
      r.dist = v;
    } else if (k == "seed") {
      r.seed = static_cast<uint64_t>(to_int(v, "seed"));
    } else {
      throw SpecError("unknown random spec key " + k);
    }
  }
  if (!have_dims) throw SpecError("random spec needs dims=");
  return r;
}

TensorSpec parse_tensor_spec(const std::string& text) {
  auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw SpecError("expected NAME=SPEC, got " + text);
  TensorSpec s;
  s.name = text.substr(0, eq);
  auto parts = split(text.substr(eq + 1), ';');
  s.source = parts[0];
  if (s.source.empty()) throw SpecError("empty source for tensor " + s.name);
  for (size_t k = 1; k < parts.size(); ++k) {
    auto [key, v] = key_value(parts[k], "tensor " + s.name);
    if (key == "format") {
      try {
        s.format = parse_format(v);
      } catch (const std::exception& e) {
        throw SpecError("tensor " + s.name + ": " + e.what());
      }
    } else if (key == "fill") {
      s.fill = parse_value(v);
      if (!s.fill) throw SpecError("bad fill value " + v);
    } else if (key == "type") {
      s.type = elem_type_from_name(v);
      if (!s.type) throw SpecError("unknown element type " + v);
    } else {
      throw SpecError("unknown tensor option " + key);
    }
  }
  return s;
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<Value> random_data(const RandomSpec& r, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  size_t n = product(r.dims);
  Value zero = r.dist == "bool" ? Value(false) : r.dist == "int" ? Value(int64_t{0}) : Value(0.0);
  std::vector<Value> out(n, zero);
  for (auto& v : out) {
    if (u(rng) >= r.density) continue;
    if (r.dist == "uniform01") v = Value(1.0 - u(rng));
    else if (r.dist == "int") v = Value(static_cast<int64_t>(1 + rng() % 9));
    else if (r.dist == "bool") v = Value(true);
    else v = Value(1.0);
  }
  return out;
}

FormatSpec default_format(size_t rank) {
  FormatSpec f(rank, LevelKind::Dense);
  f.push_back(LevelKind::Element);
  return f;
}

Tensor make_tensor(const TensorSpec& spec, uint64_t trial_seed) {
  std::vector<int64_t> dims;
  std::vector<Value> data;
  std::optional<ElemType> type = spec.type;
  const std::string& src = spec.source;
  if (src.rfind("random:", 0) == 0) {
    RandomSpec r = parse_random_spec(src.substr(7));
    uint64_t seed = r.seed.value_or(0);
    if (trial_seed) seed = mix_seed(seed, trial_seed);
    dims = r.dims;
    data = random_data(r, seed);
    if (!type) type = r.dist == "bool" ? ElemType::Bool : r.dist == "int" ? ElemType::Int
                                                                         : ElemType::Float;
  } else if (src.rfind("zeros:", 0) == 0) {
    auto [k, v] = key_value(src.substr(6), "zeros spec");
    if (k != "dims") throw SpecError("zeros spec takes dims=");
    dims = parse_dims(v);
    if (!type) type = ElemType::Float;
    data.assign(product(dims), spec.fill.value_or(zero_of(*type)));
  } else if (src.rfind("data:", 0) == 0) {
    json j;
    try {
      j = json::parse(src.substr(5));
    } catch (const std::exception& e) {
      throw SpecError("tensor " + spec.name + ": bad data literal: " + e.what());
    }
    flatten(j, 0, dims, data);
    if (!type) type = infer_type(data);
  } else if (ends_with(src, ".mtx")) {
    MatrixMarketData m = read_matrix_market(src);
    if (!type) type = m.type;
    dims = m.dims;
    data = assemble_dense(m, spec.fill.value_or(zero_of(*type)));
  } else {
    DenseText d = read_dense_text(src);
    dims = d.dims;
    data = d.data;
    if (!type) type = infer_type(data);
  }
  Value fill = spec.fill.value_or(zero_of(*type));
  FormatSpec format = spec.format.value_or(default_format(dims.size()));
  for (auto& v : data)
    if (!v.is_missing()) v = coerce_to(*type, v);
  return from_dense(spec.name, dims, data, format, fill, *type);
}

std::pair<std::string, Value> parse_param(const std::string& text) {
  auto [k, v] = key_value(text, "param");
  auto val = parse_value(v);
  if (!val) throw SpecError("bad value for parameter " + k + ": " + v);
  return {k, *val};
}

std::pair<std::string, Protocol> parse_protocol_binding(const std::string& text) {
  auto [k, v] = key_value(text, "protocol");
  if (k.find('.') == std::string::npos) throw SpecError("expected TENSOR.INDEX=PROTOCOL, got " + text);
  auto p = protocol_from_name(v);
  if (!p) throw SpecError("unknown protocol " + v);
  return {k, *p};
}

ProtocolAxes protocol_axes(const CinStmtPtr& kernel, const TensorMetas& metas,
                          const CompileOptions& fixed) {
  std::map<std::string, std::vector<Protocol>> axes;
  std::function<void(const CinExprPtr&)> walk = [&](const CinExprPtr& e) {
    if (!e) return;
    for (const auto& a : e->args) walk(a);
    if (e->kind != ExprKind::Access) return;
    auto it = metas.find(e->name);
    for (size_t l = 0; l < e->slots.size(); ++l) {
      const auto& sl = e->slots[l];
      walk(sl.index);
      if (it == metas.end() || sl.proto || sl.index->kind != ExprKind::Index) continue;
      std::string key = e->name + "." + sl.index->name;
      if (fixed.protocols.count(key)) continue;
      std::vector<Protocol> ok;
      for (Protocol p : {Protocol::Walk, Protocol::Gallop, Protocol::Follow, Protocol::FollowZeroCheck}) {
        auto seen = axes.find(key);
        if (seen != axes.end() && std::find(seen->second.begin(), seen->second.end(), p) == seen->second.end())
          continue;
        try {
          check_protocol(it->second, it->second.level_of_mode(l), p);
          ok.push_back(p);
        } catch (const UnfurlError&) {
        }
      }
      axes[key] = ok;
    }
  };
  std::function<void(const CinStmtPtr&)> stmts = [&](const CinStmtPtr& s) {
    if (!s) return;
    walk(s->rhs);
    walk(s->cond);
    stmts(s->body);
    stmts(s->consumer);
    stmts(s->producer);
    for (const auto& q : s->parts) stmts(q);
  };
  stmts(kernel);
  ProtocolAxes out;
  for (auto& [k, v] : axes)
    if (v.size() > 1) out.emplace_back(k, v);
  return out;
}

std::string replay_json(const Replay& r) {
  json j;
  j["kernel"] = r.kernel;
  j["params"] = json::object();
  for (const auto& [k, v] : r.params) j["params"][k] = to_json(v);
  j["protocols"] = json::object();
  for (const auto& [k, p] : r.protocols) j["protocols"][k] = protocol_name(p);
  j["fault_rule"] = r.fault_rule;
  j["tensors"] = json::object();
  for (const auto& [name, t] : r.tensors) {
    json tj;
    tj["dims"] = t.dims();
    tj["format"] = format_to_string(t.meta.format);
    tj["fill"] = to_json(t.fill());
    tj["type"] = elem_type_name(t.meta.type);
    json data = json::array();
    for (const auto& v : to_dense(t)) data.push_back(to_json(v));
    tj["data"] = data;
    j["tensors"][name] = tj;
  }
  return j.dump(2) + "\n";
}

Replay parse_replay(const std::string& text) {
  Replay r;
  json j;
  try {
    j = json::parse(text);
    r.kernel = j.at("kernel").get<std::string>();
    for (auto& [k, v] : j.at("params").items()) r.params[k] = from_json(v);
    for (auto& [k, v] : j.at("protocols").items()) {
      auto p = protocol_from_name(v.get<std::string>());
      if (!p) throw SpecError("unknown protocol in replay: " + v.dump());
      r.protocols[k] = *p;
    }
    r.fault_rule = j.value("fault_rule", "");
    for (auto& [name, tj] : j.at("tensors").items()) {
      std::vector<int64_t> dims = tj.at("dims").get<std::vector<int64_t>>();
      std::vector<Value> data;
      for (const auto& v : tj.at("data")) data.push_back(from_json(v));
      auto type = elem_type_from_name(tj.at("type").get<std::string>());
      if (!type) throw SpecError("unknown element type in replay");
      r.tensors.emplace(name, from_dense(name, dims, data, parse_format(tj.at("format")),
                                         from_json(tj.at("fill")), *type));
    }
  } catch (const json::exception& e) {
    throw SpecError(std::string("bad replay file: ") + e.what());
  }
  return r;
}

}  // namespace coiter
