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

#include "mvusim/machine.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "mvusim/assembler.hpp"
#include "mvusim/bitserial.hpp"
#include "mvusim/error.hpp"

namespace mvusim {

Machine::Machine(const MvuConfig& config, KernelKind kernel) : kernel_(kernel), pito_(this) {
  for (Unit& u : mvus_) u.mem = MvuMemories(config);
}

void Machine::expect_jobs(std::array<std::vector<JobDescriptor>, kMvuCount> jobs) {
  expected_ = std::move(jobs);
  check_expected_ = true;
}

bool Machine::submit_job(int mvu, const JobDescriptor& job) {
  Unit& u = mvus_.at(static_cast<std::size_t>(mvu));
  if (u.pending) return false;
  if (check_expected_) {
    const auto& exp = expected_[static_cast<std::size_t>(mvu)];
    const std::size_t n = static_cast<std::size_t>(std::count_if(log_.begin(), log_.end(), [&](const JobRecord& r) { return r.mvu == mvu; }));
    if (n >= exp.size() || !(exp[n] == job)) {
      fail(ErrorCode::Mismatch, "MVU " + std::to_string(mvu) + " job " + std::to_string(n) +
                                    " differs from the compiled schedule");
    }
  }
  u.pending = job;
  u.pending_since = cycle_;
  JobRecord rec;
  rec.mvu = mvu;
  rec.job = job;
  rec.submitted = cycle_;
  log_.push_back(rec);
  return true;
}

std::uint32_t Machine::busy(int mvu) const {
  const Unit& u = mvus_.at(static_cast<std::size_t>(mvu));
  std::uint32_t v = 0;
  if (cycle_ < u.mvp_free_at || !u.in_flight.empty()) v |= 1u;
  if (u.pending) v |= 2u;
  return v;
}

std::uint32_t Machine::last_job_cycles(int mvu) const { return mvus_.at(static_cast<std::size_t>(mvu)).last_cycles; }
std::uint32_t Machine::jobs_done(int mvu) const { return mvus_.at(static_cast<std::size_t>(mvu)).done; }

void Machine::start_jobs() {
  for (int m = 0; m < kMvuCount; ++m) {
    Unit& u = mvus_[static_cast<std::size_t>(m)];
    if (!u.pending || u.pending_since >= cycle_ || cycle_ < u.mvp_free_at) continue;
    const JobDescriptor job = *u.pending;
    u.pending.reset();
    // The submitted record is the most recent one of this MVU without a start.
    std::size_t rec = log_.size();
    for (std::size_t i = log_.size(); i-- > 0;) {
      if (log_[i].mvu == m) {
        rec = i;
        break;
      }
    }
    const MvpResult mvp = run_mvp_job(u.mem, job, kernel_);
    const std::vector<OutputWord> words = run_pipeline(u.mem, job, mvp);
    JobRecord& r = log_[rec];
    r.start = cycle_;
    r.mvp_cycles = mvp.cycles;
    r.mvp_end = cycle_ + mvp.cycles;
    u.mvp_free_at = r.mvp_end;
    for (const OutputWord& w : words) {
      waiting_.push(Word{cycle_ + w.ready_offset, word_order_++,
                         InterconnectPacket{m, w.dest_mask, w.address, w.word}, rec});
    }
    u.in_flight.push_back(InFlight{rec, words.size()});
  }
}

void Machine::move_interconnect() {
  while (!waiting_.empty() && waiting_.top().ready <= cycle_) {
    queued_.push_back(waiting_.top());
    waiting_.pop();
  }
  if (queued_.empty()) return;
  std::vector<InterconnectPacket> packets;
  packets.reserve(queued_.size());
  for (const Word& w : queued_) packets.push_back(w.packet);
  const ArbitrationResult r = interconnect_cycle(packets, {});
  for (int d = 0; d < kMvuCount; ++d) {
    const auto& applied = r.applied[static_cast<std::size_t>(d)];
    if (!applied) continue;
    auto& ram = mvus_[static_cast<std::size_t>(d)].mem.activation;
    if (applied->address >= ram.size()) {
      fail(ErrorCode::AddressOutOfRange, "write to activation address " + std::to_string(applied->address) +
                                             " of MVU " + std::to_string(d));
    }
    ram[applied->address] = applied->word;
  }
  std::vector<Word> still;
  for (std::size_t i = 0; i < queued_.size(); ++i) {
    if (r.remaining[i] == 0) {
      const std::size_t rec = queued_[i].record;
      for (InFlight& f : mvus_[static_cast<std::size_t>(log_[rec].mvu)].in_flight) {
        if (f.record == rec) {
          --f.words_left;
          break;
        }
      }
    } else {
      Word w = queued_[i];
      w.packet.dest_mask = r.remaining[i];
      still.push_back(w);
    }
  }
  queued_ = std::move(still);
}

void Machine::retire_jobs() {
  for (int m = 0; m < kMvuCount; ++m) {
    Unit& u = mvus_[static_cast<std::size_t>(m)];
    while (!u.in_flight.empty()) {
      const InFlight& f = u.in_flight.front();
      JobRecord& r = log_[f.record];
      if (f.words_left != 0 || r.mvp_end > cycle_ + 1) break;
      r.done = cycle_;
      u.last_cycles = static_cast<std::uint32_t>(r.mvp_cycles);
      ++u.done;
      pito_.deliver_interrupt(m);
      u.in_flight.pop_front();
    }
  }
}

void Machine::step() {
  pito_.step();
  start_jobs();
  move_interconnect();
  retire_jobs();
  ++cycle_;
}

bool Machine::quiescent() const {
  for (const Unit& u : mvus_)
    if (u.pending || !u.in_flight.empty()) return false;
  return waiting_.empty() && queued_.empty();
}

std::uint64_t Machine::run(std::uint64_t max_cycles) {
  while (!(pito_.all_halted() && quiescent())) {
    if (cycle_ >= max_cycles) {
      fail(ErrorCode::Deadlock, "machine still running after " + std::to_string(max_cycles) + " cycles");
    }
    step();
  }
  return cycle_;
}

// ---- whole-program simulation -------------------------------------------------

namespace {

template <typename T>
void load_image(std::vector<T>& ram, const std::vector<T>& image, int mvu, const char* what) {
  if (image.size() > ram.size()) {
    fail(ErrorCode::RamOverflow, std::string(what) + " image of MVU " + std::to_string(mvu) + " exceeds the RAM");
  }
  std::copy(image.begin(), image.end(), ram.begin());
}

}  // namespace

SimulationResult simulate(const CompiledProgram& prog, const Tensor& input, std::ostream* trace, KernelKind kernel,
                          std::uint64_t max_cycles) {
  if (prog.layers.empty()) fail(ErrorCode::SchemaError, "compiled program has no layers");
  const ActBuffer& in = prog.layers.front().input;
  if (input.shape != prog.input_shape) fail(ErrorCode::ShapeMismatch, "input shape differs from the compiled model");
  if (input.precision != in.precision) fail(ErrorCode::PrecisionMismatch, "input precision differs from the compiled model");
  check_range(input);

  Machine m(prog.config, kernel);
  for (int i = 0; i < kMvuCount; ++i) {
    const auto k = static_cast<std::size_t>(i);
    load_image(m.mvu(i).weight, prog.weights[k], i, "weight");
    load_image(m.mvu(i).scaler, prog.scalers[k], i, "scaler");
    load_image(m.mvu(i).bias, prog.biases[k], i, "bias");
  }

  // Host DMA of the input map, channel block by channel block.
  const int channels = static_cast<int>(input.values.size() / (static_cast<std::size_t>(in.height) * in.width));
  std::vector<std::int64_t> block(kLanes);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      for (int b = 0; b < in.blocks; ++b) {
        std::fill(block.begin(), block.end(), 0);
        for (int l = 0; l < kLanes && b * kLanes + l < channels; ++l) {
          block[static_cast<std::size_t>(l)] =
              input.values[(static_cast<std::size_t>(y) * in.width + x) * channels + b * kLanes + l];
        }
        const BitTransposedTensor t = transpose(block, in.precision);
        const std::uint32_t addr = in.address(y, x, b);
        for (int mv = 0; mv < kMvuCount; ++mv) {
          if (!(prog.input_mask & (1u << mv))) continue;
          auto& ram = m.mvu(mv).activation;
          if (addr + t.planes.size() > ram.size()) fail(ErrorCode::RamOverflow, "input does not fit activation RAM");
          std::copy(t.planes.begin(), t.planes.end(), ram.begin() + addr);
        }
      }
    }
  }

  const AssembledProgram asmp = assemble(prog.assembly);
  m.controller().load_instructions(asmp.instructions);
  m.controller().load_data(asmp.data);
  m.controller().set_trace(trace);

  std::array<std::vector<JobDescriptor>, kMvuCount> expected;
  std::array<std::vector<const ScheduledJob*>, kMvuCount> by_mvu;
  std::uint64_t budget = 1'000'000;
  for (const ScheduledJob& s : prog.schedule) {
    expected[static_cast<std::size_t>(s.mvu)].push_back(s.job);
    by_mvu[static_cast<std::size_t>(s.mvu)].push_back(&s);
    budget += 8ull * s.job.countdown + 4000;
  }
  budget += 20000ull * prog.layers.size();
  m.expect_jobs(expected);
  m.run(max_cycles ? max_cycles : budget);

  SimulationResult res;
  res.machine_cycles = m.cycle();
  res.layers.resize(prog.layers.size());
  for (std::size_t i = 0; i < prog.layers.size(); ++i) res.layers[i].name = prog.layers[i].name;
  std::array<std::size_t, kMvuCount> seen{};
  for (const JobRecord& r : m.job_log()) {
    const auto k = static_cast<std::size_t>(r.mvu);
    const ScheduledJob* s = by_mvu[k].at(seen[k]++);
    if (r.mvp_cycles != s->interior_cycles + s->edge_cycles) {
      fail(ErrorCode::Mismatch, "MVU " + std::to_string(r.mvu) + " job ran " + std::to_string(r.mvp_cycles) +
                                    " MVP cycles, schedule says " + std::to_string(s->interior_cycles + s->edge_cycles));
    }
    LayerCycles& lc = res.layers[static_cast<std::size_t>(s->layer)];
    // The interior share follows the job's row split; the MVP count itself is measured.
    lc.interior += s->interior_cycles;
    lc.edge += r.mvp_cycles - s->interior_cycles;
    ++lc.jobs;
    res.mvp_cycles += r.mvp_cycles;
  }
  for (int i = 0; i < kMvuCount; ++i) {
    if (seen[static_cast<std::size_t>(i)] != by_mvu[static_cast<std::size_t>(i)].size()) {
      fail(ErrorCode::Mismatch, "MVU " + std::to_string(i) + " ran " + std::to_string(seen[static_cast<std::size_t>(i)]) +
                                    " jobs, schedule has " + std::to_string(by_mvu[static_cast<std::size_t>(i)].size()));
    }
  }

  // Gather the output map.
  const ActBuffer& out = prog.output;
  res.output.shape = prog.output_shape;
  res.output.precision = out.precision;
  res.output.values.resize(static_cast<std::size_t>(out.height) * out.width * prog.output_channels);
  for (int y = 0; y < out.height; ++y) {
    const auto& ram = m.mvu(prog.output_row_mvu.at(static_cast<std::size_t>(y))).activation;
    for (int x = 0; x < out.width; ++x) {
      for (int b = 0; b < out.blocks; ++b) {
        BitTransposedTensor t;
        t.shape = {static_cast<std::size_t>(kLanes)};
        t.precision = out.precision;
        const std::uint32_t addr = out.address(y, x, b);
        t.planes.assign(ram.begin() + addr, ram.begin() + addr + out.precision.bits);
        const std::vector<std::int64_t> vals = untranspose(t);
        for (int l = 0; l < kLanes && b * kLanes + l < prog.output_channels; ++l) {
          res.output.values[(static_cast<std::size_t>(y) * out.width + x) * prog.output_channels + b * kLanes + l] =
              vals[static_cast<std::size_t>(l)];
        }
      }
    }
  }
  return res;
}

}  // namespace mvusim
