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

// Deterministic interpreter for the target IR with operation counters.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "coiter/target_ir.hpp"
#include "coiter/value.hpp"

namespace coiter {

class ExecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Buffers = std::map<std::string, std::vector<Value>>;

struct ExecCounters {
  uint64_t loop_iterations = 0;   // For and While iterations together
  uint64_t while_iterations = 0;
  uint64_t buffer_reads = 0;
  uint64_t buffer_writes = 0;     // Write statements and Append hooks
  uint64_t multiplies = 0;        // binary multiplications, including *= updates
  uint64_t adds = 0;              // binary additions and subtractions, including += updates
  uint64_t compares = 0;          // comparisons and min/max reductions
  uint64_t searches = 0;
  std::map<std::string, uint64_t> reads_by_buffer;
  std::map<std::string, uint64_t> writes_by_buffer;
};

std::string counters_json(const ExecCounters& c, int indent = -1);

/// Output writer callbacks. Init and Finalize bracket a result's lifetime;
/// Append receives a linear 0-based coordinate.
class HookHandler {
 public:
  virtual ~HookHandler() = default;
  virtual void on_init(const std::string& tensor, Buffers& buffers) = 0;
  virtual void on_finalize(const std::string& tensor, Buffers& buffers) = 0;
  virtual void on_append(const std::string& tensor, int64_t coord, UpdateOp op, const Value& v,
                         Buffers& buffers) = 0;
};

struct ExecResult {
  ExecCounters counters;
  /// One entry per executed arithmetic or buffer event when tracing is on,
  /// e.g. "mul", "add", "read A_val", "write C_val".
  std::vector<std::string> trace;
};

/// Runs `prog`. Buffers are mutated in place. Params bind free variables.
ExecResult interpret(const TStmt& prog, Buffers& buffers,
                     const std::map<std::string, Value>& params = {},
                     HookHandler* hooks = nullptr, bool trace = false);

/// Stateful interpreter whose variables persist across run/eval calls. Used
/// by the looplet materializer to drive seek and next code step by step.
class Interpreter {
 public:
  explicit Interpreter(Buffers& buffers, HookHandler* hooks = nullptr, bool trace = false);
  ~Interpreter();
  Interpreter(const Interpreter&) = delete;
  Interpreter& operator=(const Interpreter&) = delete;

  void set(const std::string& name, const Value& v);
  Value get(const std::string& name);
  void run(const TStmt& s);
  Value eval(const TExpr& e);
  ExecResult result();

 private:
  class Machine;
  std::unique_ptr<Machine> m_;
};

/// First position q in [lo, hi) with buf[q] >= key, else hi.
int64_t search_first_not_less(const std::vector<Value>& buf, int64_t lo, int64_t hi,
                              const Value& key);

}  // namespace coiter
