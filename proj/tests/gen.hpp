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

// Random generators shared by the unit tests and the acceptance suite.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "coiter/looplet.hpp"
#include "coiter/runtime.hpp"

namespace coiter::testgen {

/// Random looplet trees with constant extents: runs, spikes, lookups,
/// pipelines, shifts, switches and simplify markers, depth at most 4.
class TreeGen {
 public:
  explicit TreeGen(uint64_t seed) : rng_(seed) {}
  LoopletPtr gen(int64_t lo, int64_t hi, int depth = 0);
  int64_t below(int64_t n);

 private:
  std::mt19937_64 rng_;
  double small();
};

/// How a random vector is filled.
enum class DataShape { AllFill, Sparse, Dense, Runs };

/// Row-major data of `n` elements of type `t` with the given shape. Int data
/// lies in 1..9, floats in (0, 1], bools are true; unfilled slots get the zero
/// of the type.
std::vector<Value> random_values(size_t n, ElemType t, DataShape shape, double density,
                                 std::mt19937_64& rng);

/// Shape and density drawn from a fixed menu, then the data.
std::vector<Value> random_values(size_t n, ElemType t, std::mt19937_64& rng);

/// A small random kernel over A[5], B[5], M[5,5] (int data) writing C and D.
/// Loops use `1:$n`, constant or offset extents; bodies mix arithmetic,
/// coalesce over permit, sieves, where-temporaries and every update op.
struct RandomKernel {
  std::string text;
  Tensors inputs;
  Params params;
};
RandomKernel random_kernel(uint64_t seed);

}  // namespace coiter::testgen
