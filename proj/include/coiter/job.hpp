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

// Tensor binding specs, random instances and replay files.
//
// A binding is NAME=SOURCE[;format=LEVELS][;fill=V][;type=T] where SOURCE is
//   random:dims=64x64,density=0.1,dist=uniform01|int|bool|ones,seed=N
//   zeros:dims=8x8
//   data:[[1,0],[0,2]]
//   a path to a MatrixMarket (.mtx) or dense text file

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coiter/lower.hpp"
#include "coiter/runtime.hpp"

namespace coiter {

class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RandomSpec {
  std::vector<int64_t> dims;
  double density = 0.1;
  std::string dist = "uniform01";
  std::optional<uint64_t> seed;
};

struct TensorSpec {
  std::string name;
  std::string source;
  std::optional<FormatSpec> format;
  std::optional<Value> fill;
  std::optional<ElemType> type;

  bool is_random() const { return source.rfind("random:", 0) == 0; }
};

/// Parses NAME=SOURCE[;key=value...].
TensorSpec parse_tensor_spec(const std::string& text);
RandomSpec parse_random_spec(const std::string& body);
/// Parses "64x64" (also "64,64" and "64").
std::vector<int64_t> parse_dims(const std::string& text);

/// Builds the tensor. `trial_seed` perturbs random sources so that trial t of
/// a check draws fresh data while staying reproducible.
Tensor make_tensor(const TensorSpec& spec, uint64_t trial_seed = 0);

/// Row-major data drawn as a random source would draw it.
std::vector<Value> random_data(const RandomSpec& r, uint64_t seed);

/// Default format: dense for every mode, then element.
FormatSpec default_format(size_t rank);

uint64_t mix_seed(uint64_t a, uint64_t b);

/// Protocol choices per unannotated TENSOR.INDEX use, keeping only keys with
/// more than one admissible protocol. A key used on several levels gets the
/// choices admissible on all of them.
using ProtocolAxes = std::vector<std::pair<std::string, std::vector<Protocol>>>;
ProtocolAxes protocol_axes(const CinStmtPtr& kernel, const TensorMetas& metas,
                           const CompileOptions& fixed = {});

/// Everything needed to rerun one instance.
struct Replay {
  std::string kernel;
  Params params;
  std::map<std::string, Protocol> protocols;
  Tensors tensors;
  std::string fault_rule;
};

std::string replay_json(const Replay& r);
Replay parse_replay(const std::string& text);

/// Parses k=v with v an integer, float, bool or missing.
std::pair<std::string, Value> parse_param(const std::string& text);
/// Parses TENSOR.INDEX=PROTOCOL.
std::pair<std::string, Protocol> parse_protocol_binding(const std::string& text);

}  // namespace coiter
