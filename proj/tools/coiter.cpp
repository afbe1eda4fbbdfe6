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

// coiter: compile, run, check and bench structured-array kernels.
//
//   coiter compile --kernel dot.cin --tensor 'A=random:dims=11;format=sparselist,element' ...
//   coiter check --kernel dot.cin --tensor ... --trials 100 --seed 7

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "coiter/job.hpp"

using namespace coiter;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kMismatch = 1, kCompile = 2, kRuntime = 3 };

struct Job {
  std::string kernel_path;
  std::string kernel_text;
  std::vector<std::string> tensors;
  std::vector<std::string> params;
  std::vector<std::string> protocols;
  bool dump_ir = false;
  bool dump_stages = false;
  bool dump_simplified = false;
  uint64_t seed = 0;
  int trials = 100;
  std::string out;
  bool json_out = false;
  double rtol = 1e-12;
  std::string replay_in;
  std::string replay_out = "coiter-replay.json";
  std::string fault_rule;
};

struct Prepared {
  CinStmtPtr kernel;
  std::string text;
  std::vector<TensorSpec> specs;
  Params params;
  CompileOptions opts;
  RuleSet faulty;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json value_json(const Value& v) {
  if (v.is_missing()) return nullptr;
  if (v.is_bool()) return v.as_bool();
  if (v.is_int()) return v.as_int();
  return v.as_double();
}

void emit(const Job& job, const std::string& text) {
  if (job.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(job.out);
  if (!f) throw SpecError("cannot write " + job.out);
  f << text;
}

Prepared prepare(const Job& job) {
  Prepared p;
  if (!job.kernel_text.empty()) p.text = job.kernel_text;
  else if (!job.kernel_path.empty()) p.text = read_file(job.kernel_path);
  else throw SpecError("give a kernel with --kernel FILE or -e TEXT");
  p.kernel = parse_kernel(p.text);
  for (const auto& t : job.tensors) p.specs.push_back(parse_tensor_spec(t));
  for (const auto& s : job.params) p.params.insert(parse_param(s));
  for (const auto& s : job.protocols) p.opts.protocols.insert(parse_protocol_binding(s));
  if (!job.fault_rule.empty()) {
    p.faulty = faulty_rules(job.fault_rule);
    p.opts.rules = &p.faulty;
  }
  return p;
}

Tensors make_all(const Prepared& p, uint64_t trial_seed) {
  Tensors t;
  for (const auto& s : p.specs) t.emplace(s.name, make_tensor(s, trial_seed));
  return t;
}

std::string ir_report(const Job& job, const CompiledKernel& k) {
  std::string s;
  if (job.dump_simplified) s += "# simplified\n" + print(k.simplified) + "\n";
  if (job.dump_stages) s += "# stages\n" + format_stages(k.stages);
  if (job.dump_ir || (!job.dump_simplified && !job.dump_stages)) s += print_ir(k.program);
  return s;
}

int cmd_compile(const Job& job) {
  Prepared p = prepare(job);
  p.opts.record_stages = job.dump_stages;
  Tensors in = make_all(p, 0);
  CompiledKernel k = compile_kernel(p.kernel, metas_of(in), p.params, p.opts);
  emit(job, ir_report(job, k));
  return kOk;
}

int cmd_run(const Job& job) {
  Prepared p = prepare(job);
  p.opts.record_stages = job.dump_stages;
  Tensors in = make_all(p, 0);
  CompiledKernel k = compile_kernel(p.kernel, metas_of(in), p.params, p.opts);
  RunResult r = run_kernel(k, in, p.params);
  std::string text;
  if (job.dump_ir || job.dump_stages || job.dump_simplified) text += ir_report(job, k);
  if (job.json_out) {
    json j;
    j["counters"] = json::parse(counters_json(r.exec.counters));
    for (const auto& [name, t] : r.outputs) {
      json data = json::array();
      for (const auto& v : to_dense(t)) data.push_back(value_json(v));
      j["outputs"][name] = {{"dims", t.dims()}, {"data", data}};
    }
    text += j.dump(2) + "\n";
  } else {
    for (const auto& [name, t] : r.outputs)
      text += "# " + name + "\n" + write_dense_text(t.dims(), to_dense(t));
    text += "# counters\n" + counters_json(r.exec.counters, 2) + "\n";
  }
  emit(job, text);
  return kOk;
}

double max_rel_error(const Tensors& got, const DenseArrays& want) {
  double worst = 0;
  for (const auto& [name, w] : want) {
    auto it = got.find(name);
    if (it == got.end()) return INFINITY;
    auto g = to_dense(it->second);
    for (size_t k = 0; k < g.size() && k < w.data.size(); ++k)
      worst = std::max(worst, relative_error(g[k], w.data[k]));
  }
  return worst;
}

struct TrialOutcome {
  bool ok = false;
  double err = 0;
  std::string error;
  std::vector<Mismatch> mismatches;
};

TrialOutcome run_trial(const CinStmtPtr& kernel, const Tensors& in, const Params& params,
                       const CompileOptions& opts, double rtol) {
  TrialOutcome o;
  CompiledKernel k = compile_kernel(kernel, metas_of(in), params, opts);
  DenseArrays want = oracle_eval(k.bound, k.metas, dense_arrays(in), params);
  try {
    RunResult r = run_kernel(k, in, params);
    o.mismatches = compare_outputs(r.outputs, want, rtol);
    o.err = max_rel_error(r.outputs, want);
    o.ok = o.mismatches.empty();
  } catch (const std::exception& e) {
    o.error = e.what();
  }
  return o;
}

int report_failure(const Job& job, const Replay& rep, const TrialOutcome& o, int trial) {
  std::cout << "trial " << trial << ": FAIL";
  if (!o.error.empty()) std::cout << " (" << o.error << ")";
  std::cout << "\n";
  for (size_t k = 0; k < o.mismatches.size() && k < 5; ++k) {
    const auto& m = o.mismatches[k];
    std::cout << "  " << m.tensor << " at offset " << m.offset << ": got " << to_string(m.got)
              << ", want " << to_string(m.want) << "\n";
  }
  std::ofstream f(job.replay_out);
  f << replay_json(rep);
  std::cout << "replay written to " << job.replay_out << "\n";
  return kMismatch;
}

int cmd_check(const Job& job) {
  if (!job.replay_in.empty()) {
    Replay rep = parse_replay(read_file(job.replay_in));
    CompileOptions opts;
    opts.protocols = rep.protocols;
    RuleSet faulty;
    std::string fault = job.fault_rule.empty() ? rep.fault_rule : job.fault_rule;
    if (!fault.empty()) {
      faulty = faulty_rules(fault);
      opts.rules = &faulty;
    }
    TrialOutcome o = run_trial(parse_kernel(rep.kernel), rep.tensors, rep.params, opts, job.rtol);
    if (!o.ok) return report_failure(job, rep, o, 0);
    std::cout << "trial 0: max_rel_err=" << o.err << "\n";
    return kOk;
  }
  Prepared p = prepare(job);
  for (int t = 0; t < job.trials; ++t) {
    Tensors in = make_all(p, mix_seed(job.seed, static_cast<uint64_t>(t)));
    TrialOutcome o = run_trial(p.kernel, in, p.params, p.opts, job.rtol);
    if (!o.ok) {
      Replay rep{p.text, p.params, p.opts.protocols, in, job.fault_rule};
      return report_failure(job, rep, o, t);
    }
    std::cout << "trial " << t << ": max_rel_err=" << o.err << "\n";
  }
  std::cout << "all " << job.trials << " trials agree with the oracle\n";
  return kOk;
}


int cmd_bench(const Job& job) {
  Prepared p = prepare(job);
  Tensors in = make_all(p, job.seed ? mix_seed(job.seed, 0) : 0);
  TensorMetas metas = metas_of(in);
  auto axes = protocol_axes(p.kernel, metas, p.opts);
  size_t combos = 1;
  for (const auto& a : axes) combos *= a.second.size();
  if (combos > 64) combos = 64;
  json results = json::array();
  std::vector<size_t> pick(axes.size(), 0);
  for (size_t n = 0; n < combos; ++n) {
    CompileOptions opts = p.opts;
    for (size_t k = 0; k < axes.size(); ++k) opts.protocols[axes[k].first] = axes[k].second[pick[k]];
    json entry;
    for (const auto& [key, proto] : opts.protocols) entry["protocols"][key] = protocol_name(proto);
    try {
      CompiledKernel k = compile_kernel(p.kernel, metas, p.params, opts);
      RunResult r;
      auto t0 = std::chrono::steady_clock::now();
      int runs = std::max(1, job.trials);
      for (int t = 0; t < runs; ++t) r = run_kernel(k, in, p.params);
      auto t1 = std::chrono::steady_clock::now();
      entry["counters"] = json::parse(counters_json(r.exec.counters));
      entry["wall_ms_per_run"] =
          std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(runs);
    } catch (const CompileError& e) {
      entry["error"] = e.what();
    }
    results.push_back(entry);
    for (size_t k = axes.size(); k-- > 0;) {
      if (++pick[k] < axes[k].second.size()) break;
      pick[k] = 0;
    }
  }
  emit(job, json{{"variants", results}}.dump(2) + "\n");
  return kOk;
}

void add_job_options(CLI::App* cmd, Job& job) {
  cmd->add_option("--kernel", job.kernel_path, "Kernel file");
  cmd->add_option("-e,--expr", job.kernel_text, "Kernel text");
  cmd->add_option("--tensor", job.tensors, "NAME=SOURCE[;format=..][;fill=..][;type=..]");
  cmd->add_option("--param", job.params, "Scalar parameter k=v");
  cmd->add_option("--protocol", job.protocols, "TENSOR.INDEX=walk|gallop|follow|followzero");
  cmd->add_flag("--dump-ir", job.dump_ir, "Print the target IR");
  cmd->add_flag("--dump-stages", job.dump_stages, "Print the CIN at every lowering pass");
  cmd->add_flag("--dump-simplified", job.dump_simplified, "Print the simplified CIN");
  cmd->add_option("--seed", job.seed, "Seed for random tensors");
  cmd->add_option("--trials", job.trials, "Random instances (check) or runs (bench)");
  cmd->add_option("--out", job.out, "Write output here instead of stdout");
  cmd->add_flag("--json", job.json_out, "JSON output");
  cmd->add_option("--fault-rule", job.fault_rule)->group("");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured-array kernel compiler"};
  app.require_subcommand(1);
  Job job;
  auto* compile = app.add_subcommand("compile", "Lower a kernel and print its IR");
  auto* run = app.add_subcommand("run", "Compile and execute a kernel");
  auto* check = app.add_subcommand("check", "Compare against the dense oracle on random instances");
  auto* bench = app.add_subcommand("bench", "Operation counters per protocol assignment");
  for (auto* c : {compile, run, check, bench}) add_job_options(c, job);
  check->add_option("--rtol", job.rtol, "Relative tolerance for float outputs");
  check->add_option("--replay", job.replay_in, "Rerun a replay file");
  check->add_option("--replay-out", job.replay_out, "Where to write the failing instance");
  CLI11_PARSE(app, argc, argv);
  try {
    if (*compile) return cmd_compile(job);
    if (*run) return cmd_run(job);
    if (*check) return cmd_check(job);
    if (*bench) return cmd_bench(job);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kCompile;
  } catch (const CompileError& e) {
    std::cerr << "compile error: " << e.what() << "\n";
    return kCompile;
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCompile;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kCompile;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
