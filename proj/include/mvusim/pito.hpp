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
#include <iosfwd>
#include <span>
#include <vector>

#include "mvusim/job.hpp"
#include "mvusim/rv32i.hpp"

namespace mvusim {

inline constexpr int kHarts = 8;
inline constexpr std::size_t kInstrRamBytes = 8192;
inline constexpr std::size_t kDataRamBytes = 8192;
inline constexpr std::uint32_t kHartRegionBytes = kInstrRamBytes / kHarts;  // 1 KiB per hart
inline constexpr std::size_t kHartRegionInstrs = kHartRegionBytes / 4;

// The controller's view of the MVU array.
class MvuControl {
 public:
  virtual ~MvuControl() = default;
  // Returns false when the MVU cannot accept another job yet; the
  // issuing instruction then retries on the hart's next turn.
  virtual bool submit_job(int mvu, const JobDescriptor& job) = 0;
  virtual std::uint32_t busy(int mvu) const = 0;
  virtual std::uint32_t last_job_cycles(int mvu) const = 0;
  virtual std::uint32_t jobs_done(int mvu) const = 0;
};

struct HartState {
  std::uint32_t pc = 0;
  std::array<std::uint32_t, 32> regs{};
  int hart_id = 0;
  bool halted = false;
  std::uint64_t retired = 0;

  std::uint32_t mstatus = 0;
  std::uint32_t mie = 0;
  std::uint32_t mtvec = 0;
  std::uint32_t mscratch = 0;
  std::uint32_t mepc = 0;
  std::uint32_t mcause = 0;
  bool done_pending = false;  // MVU status bit 0, mirrored in mip.MEIP
  JobDescriptor job_csrs;
};

enum class CsrOp { Read, Write, Set, Clear };

// Eight harts in strict rotation: cycle c executes hart c mod 8. Harvard
// layout: instruction fetches use the shared 8 KiB instruction RAM, loads
// and stores the shared 8 KiB data RAM (both byte-addressed from 0).
class Pito {
 public:
  explicit Pito(MvuControl* mvus = nullptr);

  void reset();
  // Copies a full or partial instruction image starting at address 0.
  void load_instructions(std::span<const std::uint32_t> words);
  void load_data(std::span<const std::uint8_t> bytes, std::uint32_t address = 0);

  // Advances one clock.
  void step();
  void run(std::uint64_t cycles);

  std::uint64_t cycle() const { return cycle_; }
  bool all_halted() const;

  HartState& hart(int id) { return harts_.at(static_cast<std::size_t>(id)); }
  const HartState& hart(int id) const { return harts_.at(static_cast<std::size_t>(id)); }

  std::uint32_t load_word(std::uint32_t address) const;
  void store_word(std::uint32_t address, std::uint32_t value);
  std::span<const std::uint8_t> data_ram() const { return dmem_; }
  std::span<const std::uint32_t> instruction_ram() const { return imem_; }

  // Returns the old value. Throws UnknownCsr.
  std::uint32_t csr_access(int hart, std::uint16_t address, CsrOp op, std::uint32_t value);

  // MVU `mvu` finished a job: set the pending bit of hart `mvu`.
  void deliver_interrupt(int mvu);

  // One line per executed cycle: cycle hart pc disassembly [writes].
  void set_trace(std::ostream* out) { trace_ = out; }

 private:
  bool execute(HartState& h, const Instr& in, std::string* writes);
  std::uint32_t load(std::uint32_t addr, int bytes, bool sign) const;
  void store(std::uint32_t addr, int bytes, std::uint32_t value);
  bool try_csr(HartState& h, std::uint16_t address, CsrOp op, std::uint32_t value,
               std::uint32_t& old, bool& stall);

  MvuControl* mvus_;
  std::array<HartState, kHarts> harts_;
  std::vector<std::uint32_t> imem_;
  std::vector<std::uint8_t> dmem_;
  std::uint64_t cycle_ = 0;
  std::ostream* trace_ = nullptr;
};

}  // namespace mvusim
