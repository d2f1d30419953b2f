// Copyright 2026 The mvusim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "doctest.h"
#include "mvusim/codegen.hpp"
#include "mvusim/error.hpp"
#include "mvusim/machine.hpp"
#include "mvusim/oracle.hpp"
#include "mvusim/perf.hpp"
#include "test_util.hpp"

using namespace mvusim;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Mismatch;  // callers expect a different code
}

}  // namespace

TEST_CASE("simulator matches the oracle in both modes") {
  for (const char* name : {"verify/conv_pad.json", "verify/conv_pool_relu.json", "verify/mlp3.json",
                           "verify/conv_flatten_gemv.json"}) {
    CAPTURE(name);
    const ModelIR m = load_model(testutil::model_path(name));
    const Tensor in = random_input(m, 21);
    const Tensor want = oracle_infer(m, in).back();
    const SimulationResult a = simulate(compile(m, Mode::Pipelined), in);
    const SimulationResult b = simulate(compile(m, Mode::Distributed), in);
    CHECK(a.output == want);
    CHECK(b.output == want);
  }
}

TEST_CASE("serial and parallel kernels agree cycle for cycle") {
  const ModelIR m = load_model(testutil::model_path("verify/distributed.json"));
  const CompiledProgram p = compile(m, Mode::Distributed);
  const Tensor in = random_input(m, 4);
  const SimulationResult a = simulate(p, in, nullptr, KernelKind::Serial);
  const SimulationResult b = simulate(p, in, nullptr, KernelKind::Parallel);
  CHECK(a.output == b.output);
  CHECK(a.machine_cycles == b.machine_cycles);
  CHECK(a.mvp_cycles == b.mvp_cycles);
}

TEST_CASE("simulation is deterministic") {
  const ModelIR m = load_model(testutil::model_path("verify/chain10.json"));
  const CompiledProgram p = compile(m, Mode::Pipelined);
  const Tensor in = random_input(m, 9);
  const SimulationResult a = simulate(p, in), b = simulate(p, in);
  CHECK(a.output == b.output);
  CHECK(a.machine_cycles == b.machine_cycles);
}

TEST_CASE("resnet9 interior cycles equal the estimate per layer") {
  const ModelIR m = load_model(testutil::model_path("resnet9.json"));
  const Tensor in = random_input(m, 1);
  const SimulationResult r = simulate(compile(m, Mode::Pipelined), in);
  const CycleReport est = estimate_model(m, 250e6);
  REQUIRE(r.layers.size() == est.per_layer.size());
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < r.layers.size(); ++i) {
    CHECK(r.layers[i].interior == est.per_layer[i].cycles);
    total += r.layers[i].interior;
  }
  CHECK(total == 194688);
  CHECK(r.output == oracle_infer(m, in).back());
}

TEST_CASE("a job that differs from the schedule is a mismatch") {
  const ModelIR m = load_model(testutil::model_path("verify/conv.json"));
  CompiledProgram p = compile(m, Mode::Pipelined);
  p.schedule[1].job.dest_base += 1;
  CHECK(code_of([&] { simulate(p, random_input(m, 1)); }) == ErrorCode::Mismatch);
}

TEST_CASE("running out of cycles is a deadlock") {
  const ModelIR m = load_model(testutil::model_path("verify/conv.json"));
  const CompiledProgram p = compile(m, Mode::Pipelined);
  CHECK(code_of([&] { simulate(p, random_input(m, 1), nullptr, KernelKind::Parallel, 50); }) == ErrorCode::Deadlock);
}

TEST_CASE("input must match the program") {
  const ModelIR m = load_model(testutil::model_path("gemv64.json"));
  const CompiledProgram p = compile(m, Mode::Pipelined);
  Tensor in = random_input(m, 1);
  in.shape = {1, 1, 1, 64};
  CHECK_THROWS_AS(simulate(p, in), Error);
}

TEST_CASE("job log records every scheduled job") {
  const ModelIR m = load_model(testutil::model_path("verify/mlp3.json"));
  const CompiledProgram p = compile(m, Mode::Pipelined);
  Machine machine;
  std::array<std::vector<JobDescriptor>, kMvuCount> jobs;
  for (const ScheduledJob& j : p.schedule) jobs[static_cast<std::size_t>(j.mvu)].push_back(j.job);
  // Submitting by hand in schedule order drives the same checks simulate() uses.
  machine.expect_jobs(jobs);
  JobDescriptor wrong = p.schedule[0].job;
  wrong.countdown += 1;
  CHECK(code_of([&] { machine.submit_job(p.schedule[0].mvu, wrong); }) == ErrorCode::Mismatch);
}
