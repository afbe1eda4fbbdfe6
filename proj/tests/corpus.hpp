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

// The oracle corpus: kernels, their admissible format and protocol
// assignments, and a parallel runner that checks random instances of each.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "coiter/job.hpp"

namespace coiter::corpus {

struct InputDecl {
  std::string name;
  std::vector<std::string> sizes;  // one size variable per mode
  ElemType type = ElemType::Float;
  bool dense_only = false;
};

struct KernelDecl {
  std::string name;
  std::string text;
  std::map<std::string, int64_t> max_size;  // sizes are drawn from 1..max
  std::vector<InputDecl> inputs;
  Params params;
};

const std::vector<KernelDecl>& kernels();

struct Assignment {
  std::map<std::string, FormatSpec> formats;
  std::map<std::string, Protocol> protocols;
  std::string label() const;
};

/// Every format choice per input crossed with every admissible protocol
/// choice for the resulting metadata.
std::vector<Assignment> assignments(const KernelDecl& k);

/// A pool of instances shared by the assignments of a kernel: `shapes` size
/// draws with `per_shape` data draws each, plus the dense oracle's result for
/// each. Draws of one shape are ordered by which inputs are entirely fill.
struct Instance {
  size_t shape = 0;
  std::map<std::string, std::vector<int64_t>> dims;
  std::map<std::string, std::vector<Value>> data;
  std::vector<bool> all_fill;
  DenseArrays want;
};
std::vector<Instance> instances(const KernelDecl& k, size_t shapes, size_t per_shape, uint64_t seed);

/// Compiles the kernel under the assignment, again whenever input metadata
/// changes, and checks every instance against its oracle result. Returns the number of failing
/// instances and sets `first_failure`.
size_t check_assignment(const KernelDecl& k, const Assignment& a, const std::vector<Instance>& cases,
                        double rtol, std::string* first_failure);

struct KernelReport {
  std::string kernel;
  size_t assignments = 0;
  size_t instances = 0;
  size_t failures = 0;
  std::string first_failure;
  double seconds = 0;
};

/// Checks every assignment of every kernel on `shapes` x `per_shape`
/// instances. Assignment n takes shapes n*shapes, n*shapes+1, ... (mod the
/// pool) from a pool of `pool_shapes`.
std::vector<KernelReport> run(size_t shapes, size_t per_shape, size_t pool_shapes, double rtol,
                              unsigned threads);

}  // namespace coiter::corpus
