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
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mvusim/job.hpp"
#include "mvusim/mvp_kernels.hpp"

namespace mvusim {

// RAM depths. Scaler and bias RAMs are addressed in rows of 64 lanes.
struct MvuConfig {
  std::size_t activation_words = std::size_t{1} << 15;
  std::size_t weight_rows = 2048;
  std::size_t scaler_rows = 1024;
  std::size_t bias_rows = 1024;

  friend bool operator==(const MvuConfig&, const MvuConfig&) = default;
};

struct MvuMemories {
  explicit MvuMemories(const MvuConfig& config = {});

  MvuConfig config;
  std::vector<std::uint64_t> activation;  // one 64-lane plane word per address
  std::vector<std::uint64_t> weight;      // weight_rows * 64 words
  std::vector<std::uint16_t> scaler;      // scaler_rows * 64
  std::vector<std::int32_t> bias;         // bias_rows * 64
};

struct MvpResult {
  std::vector<LaneVector> tiles;
  std::uint64_t cycles = 0;
};

// Builds the MVP address streams from the activation/weight AGUs and checks
// that every bit plane touched stays inside the RAMs.
MvpPlan plan_mvp_job(const MvuMemories& mem, const JobDescriptor& job);

MvpResult run_mvp_job(const MvuMemories& mem, const JobDescriptor& job,
                      KernelKind kernel = KernelKind::Parallel);

inline constexpr int kMvpOutputBits = 27;
inline constexpr int kQuantInputBits = 32;

// v * scale + bias on the 27x16 multiplier. Throws MvpOverflow when v does
// not fit 27 signed bits.
std::int64_t scaler_apply(std::int64_t v, std::uint16_t scale, std::int32_t bias);

// Comparator with an internal register, reset per window to 0 (relu) or to
// the most negative value.
std::vector<std::int64_t> pool_relu(std::span<const std::int64_t> stream, std::size_t window,
                                    bool relu);

// Bits msb .. msb-bits+1 of v, MSB first.
std::vector<std::uint8_t> quantser(std::int32_t v, int msb_position, int out_bits);

// Serializes 64 lanes into `out_bits` plane words (MSB plane first).
std::vector<std::uint64_t> quantser_pack(std::span<const std::int64_t> lanes, int msb_position,
                                         int out_bits);

struct OutputWord {
  std::uint32_t address = 0;
  std::uint8_t dest_mask = 0;
  std::uint64_t word = 0;
  std::uint64_t ready_offset = 0;  // cycles after the job's first MVP cycle
};

// Runs the MVP followed by Scaler -> Pool/ReLU -> QuantSer and returns the
// serialized write stream in emission order.
std::vector<OutputWord> run_pipeline(const MvuMemories& mem, const JobDescriptor& job,
                                     const MvpResult& mvp);

// ---- interconnect -------------------------------------------------------

struct InterconnectPacket {
  int source = 0;
  std::uint8_t dest_mask = 0;
  std::uint32_t dest_address = 0;
  std::uint64_t word = 0;

  friend bool operator==(const InterconnectPacket&, const InterconnectPacket&) = default;
};

struct ControllerWrite {
  int dest = 0;
  std::uint32_t address = 0;
  std::uint64_t word = 0;

  friend bool operator==(const ControllerWrite&, const ControllerWrite&) = default;
};

enum class WriteOrigin { Interconnect, Controller, Local };

struct RamWrite {
  WriteOrigin origin = WriteOrigin::Local;
  int source = -1;  // -1 for controller writes
  std::uint32_t address = 0;
  std::uint64_t word = 0;

  friend bool operator==(const RamWrite&, const RamWrite&) = default;
};

struct ArbitrationResult {
  std::array<std::optional<RamWrite>, kMvuCount> applied;
  std::vector<InterconnectPacket> pending;  // masks reduced to undelivered destinations
  std::vector<ControllerWrite> controller_pending;
  std::vector<std::uint8_t> remaining;  // per input packet, destinations still owed
};

// One cycle of activation-RAM write-port arbitration. A packet whose mask
// includes its own source is a local writeback for that destination. Per
// destination: interconnect (lowest source first) > controller > local.
// Losers stay pending for the next cycle.
ArbitrationResult interconnect_cycle(std::span<const InterconnectPacket> packets,
                                     std::span<const ControllerWrite> controller_writes);

}  // namespace mvusim
