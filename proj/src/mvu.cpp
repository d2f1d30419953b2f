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

#include "mvusim/mvu.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "mvusim/error.hpp"

namespace mvusim {

MvuMemories::MvuMemories(const MvuConfig& cfg)
    : config(cfg),
      activation(cfg.activation_words, 0),
      weight(cfg.weight_rows * kWordsPerWeightRow, 0),
      scaler(cfg.scaler_rows * kLanes, 0),
      bias(cfg.bias_rows * kLanes, 0) {}

namespace {

void check_planes(std::span<const std::uint32_t> addrs, int bits, std::size_t depth,
                  const char* what) {
  for (std::uint32_t a : addrs) {
    if (static_cast<std::size_t>(a) + static_cast<std::size_t>(bits) > depth) {
      fail(ErrorCode::AddressOutOfRange, std::string(what) + " block at " + std::to_string(a) +
                                             " with " + std::to_string(bits) +
                                             " planes exceeds depth " + std::to_string(depth));
    }
  }
}

bool fits_signed(std::int64_t v, int bits) {
  const std::int64_t lim = std::int64_t{1} << (bits - 1);
  return v >= -lim && v < lim;
}

}  // namespace

MvpPlan plan_mvp_job(const MvuMemories& mem, const JobDescriptor& job) {
  const JobShape shape = validate_job(job);
  MvpPlan plan;
  plan.act = job.act_prec;
  plan.weight = job.weight_prec;
  plan.reduce_length = shape.reduce_length;
  plan.act_addr = agu_sequence(job.act_agu, mem.config.activation_words);
  plan.weight_addr = agu_sequence(job.weight_agu, mem.config.weight_rows);
  check_planes(plan.act_addr, job.act_prec.bits, mem.config.activation_words, "activation");
  check_planes(plan.weight_addr, job.weight_prec.bits, mem.config.weight_rows, "weight");
  return plan;
}

MvpResult run_mvp_job(const MvuMemories& mem, const JobDescriptor& job, KernelKind kernel) {
  const MvpPlan plan = plan_mvp_job(mem, job);
  MvpResult r;
  r.tiles = mvp_tiles(kernel, plan, mem.activation, mem.weight);
  r.cycles = job.countdown;
  return r;
}

std::int64_t scaler_apply(std::int64_t v, std::uint16_t scale, std::int32_t bias) {
  if (!fits_signed(v, kMvpOutputBits)) {
    fail(ErrorCode::MvpOverflow,
         "MVP output " + std::to_string(v) + " does not fit the 27-bit scaler operand");
  }
  return v * static_cast<std::int64_t>(scale) + static_cast<std::int64_t>(bias);
}

std::vector<std::int64_t> pool_relu(std::span<const std::int64_t> stream, std::size_t window,
                                    bool relu) {
  if (window == 0 || stream.size() % window != 0) {
    fail(ErrorCode::BadWindow, "stream of " + std::to_string(stream.size()) +
                                   " values is not a multiple of window " +
                                   std::to_string(window));
  }
  std::vector<std::int64_t> out;
  out.reserve(stream.size() / window);
  for (std::size_t i = 0; i < stream.size(); i += window) {
    std::int64_t reg = relu ? 0 : std::numeric_limits<std::int64_t>::min();
    for (std::size_t k = 0; k < window; ++k) reg = std::max(reg, stream[i + k]);
    out.push_back(reg);
  }
  return out;
}

namespace {

void check_quant_window(int msb_position, int out_bits) {
  if (msb_position < 0 || msb_position > 31 || out_bits < 1 || out_bits > msb_position + 1) {
    fail(ErrorCode::BadQuantWindow, "quantizer window msb=" + std::to_string(msb_position) +
                                        " bits=" + std::to_string(out_bits));
  }
}

}  // namespace

std::vector<std::uint8_t> quantser(std::int32_t v, int msb_position, int out_bits) {
  check_quant_window(msb_position, out_bits);
  const auto u = static_cast<std::uint32_t>(v);
  std::vector<std::uint8_t> bits;
  for (int b = msb_position; b > msb_position - out_bits; --b) {
    bits.push_back(static_cast<std::uint8_t>((u >> b) & 1u));
  }
  return bits;
}

std::vector<std::uint64_t> quantser_pack(std::span<const std::int64_t> lanes, int msb_position,
                                         int out_bits) {
  check_quant_window(msb_position, out_bits);
  if (lanes.size() != static_cast<std::size_t>(kLanes)) {
    fail(ErrorCode::LaneMismatch, "QuantSer packs exactly 64 lanes");
  }
  std::vector<std::uint64_t> words(static_cast<std::size_t>(out_bits), 0);
  for (std::size_t l = 0; l < lanes.size(); ++l) {
    if (!fits_signed(lanes[l], kQuantInputBits)) {
      fail(ErrorCode::QuantOverflow,
           "QuantSer input " + std::to_string(lanes[l]) + " exceeds 32 bits");
    }
    const auto u = static_cast<std::uint32_t>(static_cast<std::int32_t>(lanes[l]));
    for (int p = 0; p < out_bits; ++p) {
      words[static_cast<std::size_t>(p)] |= static_cast<std::uint64_t>((u >> (msb_position - p)) & 1u)
                                            << l;
    }
  }
  return words;
}

std::vector<OutputWord> run_pipeline(const MvuMemories& mem, const JobDescriptor& job,
                                     const MvpResult& mvp) {
  const JobShape shape = validate_job(job);
  if (mvp.tiles.size() != shape.mvp_tiles) {
    fail(ErrorCode::BadJob, "MVP result does not match the job's tile count");
  }

  std::vector<std::uint32_t> scale_rows;
  std::vector<std::uint32_t> bias_rows;
  if (job.scaler_enable) {
    scale_rows = agu_sequence(job.scaler_agu, mem.config.scaler_rows);
    bias_rows = agu_sequence(job.bias_agu, mem.config.bias_rows);
  }
  // The output AGU produces offsets from the destination base.
  const std::vector<std::uint32_t> out_offsets =
      agu_sequence(job.output_agu, std::numeric_limits<std::uint32_t>::max());

  const std::size_t window = job.pool_window;
  const int bits = static_cast<int>(job.quant_bits);
  const std::uint64_t tile_cycles = shape.reduce_length * shape.bit_pairs;

  std::vector<OutputWord> out;
  out.reserve(shape.output_tiles * static_cast<std::size_t>(bits));
  std::vector<std::int64_t> stream(window);
  std::array<std::int64_t, kLanes> pooled{};
  std::uint64_t emit_free = 0;  // first cycle the serializer is idle

  for (std::size_t o = 0; o < shape.output_tiles; ++o) {
    for (std::size_t v = 0; v < static_cast<std::size_t>(kLanes); ++v) {
      for (std::size_t k = 0; k < window; ++k) {
        const std::size_t t = o * window + k;
        std::int64_t x = mvp.tiles[t][v];
        if (job.scaler_enable) {
          x = scaler_apply(x, mem.scaler[scale_rows[t] * kLanes + v],
                           mem.bias[bias_rows[t] * kLanes + v]);
        }
        if (!fits_signed(x, kQuantInputBits)) {
          fail(ErrorCode::QuantOverflow, "pipeline value " + std::to_string(x) +
                                             " exceeds the 32-bit quantizer input");
        }
        stream[k] = x;
      }
      pooled[v] = pool_relu(stream, window, job.relu_enable)[0];
    }
    const std::vector<std::uint64_t> words =
        quantser_pack(pooled, static_cast<int>(job.quant_msb), bits);

    const std::uint64_t done = (o + 1) * window * tile_cycles;
    const std::uint64_t start = std::max(done, emit_free);
    const std::uint64_t addr = std::uint64_t{job.dest_base} + out_offsets[o];
    for (int p = 0; p < bits; ++p) {
      if (addr + static_cast<std::uint64_t>(p) > std::numeric_limits<std::uint32_t>::max()) {
        fail(ErrorCode::AddressOutOfRange, "output address overflows 32 bits");
      }
      out.push_back({static_cast<std::uint32_t>(addr + static_cast<std::uint64_t>(p)),
                     job.dest_mask, words[static_cast<std::size_t>(p)],
                     start + static_cast<std::uint64_t>(p)});
    }
    emit_free = start + static_cast<std::uint64_t>(bits);
  }
  return out;
}

ArbitrationResult interconnect_cycle(std::span<const InterconnectPacket> packets,
                                     std::span<const ControllerWrite> controller_writes) {
  ArbitrationResult r;
  std::vector<std::uint8_t> remaining;
  remaining.reserve(packets.size());
  for (const auto& p : packets) remaining.push_back(p.dest_mask);
  std::vector<bool> controller_done(controller_writes.size(), false);

  for (int d = 0; d < kMvuCount; ++d) {
    const auto bit = static_cast<std::uint8_t>(1u << d);
    // Remote traffic: lowest source index, then queue order.
    std::size_t best = packets.size();
    for (std::size_t i = 0; i < packets.size(); ++i) {
      if (packets[i].source == d || (remaining[i] & bit) == 0) continue;
      if (best == packets.size() || packets[i].source < packets[best].source) best = i;
    }
    if (best != packets.size()) {
      const auto& p = packets[best];
      r.applied[static_cast<std::size_t>(d)] =
          RamWrite{WriteOrigin::Interconnect, p.source, p.dest_address, p.word};
      remaining[best] &= static_cast<std::uint8_t>(~bit);
      continue;
    }
    bool taken = false;
    for (std::size_t i = 0; i < controller_writes.size(); ++i) {
      if (controller_writes[i].dest != d) continue;
      const auto& w = controller_writes[i];
      r.applied[static_cast<std::size_t>(d)] =
          RamWrite{WriteOrigin::Controller, -1, w.address, w.word};
      controller_done[i] = true;
      taken = true;
      break;
    }
    if (taken) continue;
    for (std::size_t i = 0; i < packets.size(); ++i) {
      if (packets[i].source != d || (remaining[i] & bit) == 0) continue;
      const auto& p = packets[i];
      r.applied[static_cast<std::size_t>(d)] =
          RamWrite{WriteOrigin::Local, p.source, p.dest_address, p.word};
      remaining[i] &= static_cast<std::uint8_t>(~bit);
      break;
    }
  }

  for (std::size_t i = 0; i < packets.size(); ++i) {
    if (remaining[i] != 0) {
      InterconnectPacket p = packets[i];
      p.dest_mask = remaining[i];
      r.pending.push_back(p);
    }
  }
  for (std::size_t i = 0; i < controller_writes.size(); ++i) {
    if (!controller_done[i]) r.controller_pending.push_back(controller_writes[i]);
  }
  r.remaining = std::move(remaining);
  return r;
}

}  // namespace mvusim
