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

// Term rewriting over CIN. Rules are plain data in a RuleSet so callers can
// add domain rules or swap one out.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "coiter/analysis.hpp"
#include "coiter/cin.hpp"

namespace coiter {

struct RewriteContext {
  const TensorMetas* metas = nullptr;
  bool may_be_missing(const CinExprPtr& e) const { return coiter::may_be_missing(e, metas); }
};

/// A rule returns its rewrite of the node, or null when it does not apply.
struct Rule {
  std::string name;
  std::function<CinExprPtr(const CinExprPtr&, const RewriteContext&)> on_expr;
  std::function<CinStmtPtr(const CinStmtPtr&, const RewriteContext&)> on_stmt;
};

class RuleSet {
 public:
  /// constant folding, loop/where pass elision, + and * algebra, subtraction
  /// and negation normalization, sieve resolution, and/or, missing and
  /// coalesce, idempotent and additive loop-invariant updates.
  static RuleSet standard();

  void add(Rule r) { rules_.push_back(std::move(r)); }
  /// Replaces the rule called `name`; returns false when there is none.
  bool replace(const std::string& name, Rule r);
  bool remove(const std::string& name);
  const std::vector<Rule>& rules() const { return rules_; }
  std::vector<std::string> names() const;

 private:
  std::vector<Rule> rules_;
};

/// Standard rules with one of them swapped for a wrong version. Used as a
/// negative control for the oracle check.
RuleSet faulty_rules(const std::string& which);

struct SimplifyOptions {
  const TensorMetas* metas = nullptr;
  /// Nonzero: try rules in a pseudo-random order per node.
  uint64_t shuffle_seed = 0;
  /// Upper bound on rule firings; exceeding it is an internal error.
  size_t max_steps = 1'000'000;
};

struct SimplifyStats {
  size_t steps = 0;
  std::map<std::string, size_t> fired;
};

/// Innermost-first, left-to-right, repeated to a fixpoint.
CinStmtPtr simplify(const CinStmtPtr& s, const RuleSet& rules, const SimplifyOptions& opts = {},
                    SimplifyStats* stats = nullptr);
CinExprPtr simplify(const CinExprPtr& e, const RuleSet& rules, const SimplifyOptions& opts = {},
                    SimplifyStats* stats = nullptr);

/// Convenience overloads using RuleSet::standard().
CinStmtPtr simplify(const CinStmtPtr& s, const SimplifyOptions& opts = {});
CinExprPtr simplify(const CinExprPtr& e, const SimplifyOptions& opts = {});

}  // namespace coiter
