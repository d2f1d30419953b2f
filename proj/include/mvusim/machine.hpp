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

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <functional>
#include <optional>
#include <queue>
#include <vector>

#include "mvusim/codegen.hpp"
#include "mvusim/mvu.hpp"
#include "mvusim/pito.hpp"
#include "mvusim/tensor.hpp"

namespace mvusim {

struct JobRecord {
  int mvu = 0;
  JobDescriptor job;
  std::uint64_t submitted = 0;
  std::uint64_t start = 0;
  std::uint64_t mvp_end = 0;  // first cycle after the last MVP cycle
  std::uint64_t done = 0;     // cycle the last output word was written
  std::uint64_t mvp_cycles = 0;
};

// Eight MVUs, the interconnect and the controller, advanced one clock at a
// time. Each MVU has a one-deep pending slot behind the running job; a job
// starts the cycle after the previous one leaves the MVP. Its output words
// enter the interconnect as QuantSer emits them, and the job counts as
// done once the MVP has finished and every word has been written.
class Machine : public MvuControl {
 public:
  explicit Machine(const MvuConfig& config = {}, KernelKind kernel = KernelKind::Parallel);

  MvuMemories& mvu(int i) { return mvus_.at(static_cast<std::size_t>(i)).mem; }
  const MvuMemories& mvu(int i) const { return mvus_.at(static_cast<std::size_t>(i)).mem; }
  Pito& controller() { return pito_; }

  bool submit_job(int mvu, const JobDescriptor& job) override;
  std::uint32_t busy(int mvu) const override;
  std::uint32_t last_job_cycles(int mvu) const override;
  std::uint32_t jobs_done(int mvu) const override;

  void step();
  bool quiescent() const;
  // Runs until every hart halted and the MVUs and interconnect drained.
  // Throws Deadlock after max_cycles.
  std::uint64_t run(std::uint64_t max_cycles);

  std::uint64_t cycle() const { return cycle_; }
  const std::vector<JobRecord>& job_log() const { return log_; }

  // Every submitted job must equal the next entry for its MVU (Mismatch).
  void expect_jobs(std::array<std::vector<JobDescriptor>, kMvuCount> jobs);

 private:
  struct InFlight {
    std::size_t record = 0;
    std::size_t words_left = 0;
  };
  struct Unit {
    MvuMemories mem;
    std::optional<JobDescriptor> pending;
    std::uint64_t pending_since = 0;
    std::uint64_t mvp_free_at = 0;  // first cycle the MVP can start a new job
    std::deque<InFlight> in_flight;
    std::uint32_t last_cycles = 0;
    std::uint32_t done = 0;
  };
  struct Word {
    std::uint64_t ready = 0;
    std::uint64_t order = 0;
    InterconnectPacket packet;
    std::size_t record = 0;
    bool operator>(const Word& o) const { return ready != o.ready ? ready > o.ready : order > o.order; }
  };

  void start_jobs();
  void move_interconnect();
  void retire_jobs();

  KernelKind kernel_;
  std::array<Unit, kMvuCount> mvus_;
  Pito pito_;
  std::priority_queue<Word, std::vector<Word>, std::greater<>> waiting_;  // not yet emitted
  std::vector<Word> queued_;  // emitted, awaiting a write port
  std::uint64_t word_order_ = 0;
  std::array<std::vector<JobDescriptor>, kMvuCount> expected_;
  bool check_expected_ = false;
  std::vector<JobRecord> log_;
  std::uint64_t cycle_ = 0;
};

struct LayerCycles {
  std::string name;
  std::uint64_t interior = 0;  // MVP cycles of rows with a fully unpadded receptive field
  std::uint64_t edge = 0;
  std::uint64_t jobs = 0;
};

struct SimulationResult {
  Tensor output;
  std::vector<LayerCycles> layers;
  std::uint64_t machine_cycles = 0;
  std::uint64_t mvp_cycles = 0;  // all MVP cycles, interior and edge
};

// Loads the program and input, runs to completion and gathers the output.
// Every job the controller issues is checked against the compiled schedule
// (Mismatch on any difference).
SimulationResult simulate(const CompiledProgram& program, const Tensor& input, std::ostream* trace = nullptr,
                          KernelKind kernel = KernelKind::Parallel, std::uint64_t max_cycles = 200'000'000);

}  // namespace mvusim
