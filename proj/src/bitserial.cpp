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

#include "mvusim/bitserial.hpp"

#include <string>

#include "mvusim/error.hpp"

namespace mvusim {

Precision Precision::make(int bits, bool is_signed) {
  if (bits < 1 || bits > kMaxBits) {
    fail(ErrorCode::OutOfRange, "precision bits must be in 1..16, got " + std::to_string(bits));
  }
  return Precision{bits, is_signed};
}

BitTransposedTensor transpose(std::span<const std::int64_t> elements, Precision precision,
                              std::size_t block_width) {
  Precision::make(precision.bits, precision.is_signed);
  if (block_width == 0 || block_width > static_cast<std::size_t>(kLanes)) {
    fail(ErrorCode::MalformedTensor, "block width must be in 1..64");
  }
  if (elements.size() % block_width != 0) {
    fail(ErrorCode::MalformedTensor, "element count " + std::to_string(elements.size()) +
                                         " is not a multiple of block width " +
                                         std::to_string(block_width));
  }

  BitTransposedTensor out;
  out.shape = {elements.size()};
  out.precision = precision;
  out.block_width = block_width;
  const std::size_t blocks = elements.size() / block_width;
  const auto bits = static_cast<std::size_t>(precision.bits);
  out.planes.assign(blocks * bits, 0);

  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t l = 0; l < block_width; ++l) {
      const std::int64_t v = elements[b * block_width + l];
      if (!precision.contains(v)) {
        fail(ErrorCode::OutOfRange, "element " + std::to_string(v) + " does not fit " +
                                        std::to_string(precision.bits) +
                                        (precision.is_signed ? "-bit signed" : "-bit unsigned"));
      }
      const auto pattern = static_cast<std::uint64_t>(v);
      for (std::size_t p = 0; p < bits; ++p) {
        const std::size_t bit_pos = bits - 1 - p;
        out.planes[b * bits + p] |= ((pattern >> bit_pos) & 1u) << l;
      }
    }
  }
  return out;
}

std::vector<std::int64_t> untranspose(const BitTransposedTensor& tensor) {
  const int bits = tensor.precision.bits;
  if (bits < 1 || bits > kMaxBits) {
    fail(ErrorCode::MalformedTensor, "invalid precision in tensor");
  }
  if (tensor.block_width == 0 || tensor.block_width > static_cast<std::size_t>(kLanes) ||
      tensor.planes.size() % static_cast<std::size_t>(bits) != 0) {
    fail(ErrorCode::MalformedTensor, "plane count " + std::to_string(tensor.planes.size()) +
                                         " is not a multiple of precision " +
                                         std::to_string(bits));
  }

  const std::size_t blocks = tensor.block_count();
  std::vector<std::int64_t> out(blocks * tensor.block_width);
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto planes = tensor.block(b);
    for (std::size_t l = 0; l < tensor.block_width; ++l) {
      std::uint64_t pattern = 0;
      for (int p = 0; p < bits; ++p) {
        pattern = (pattern << 1) | ((planes[static_cast<std::size_t>(p)] >> l) & 1u);
      }
      std::int64_t v = static_cast<std::int64_t>(pattern);
      if (tensor.precision.is_signed && ((pattern >> (bits - 1)) & 1u)) {
        v -= std::int64_t{1} << bits;
      }
      out[b * tensor.block_width + l] = v;
    }
  }
  return out;
}

BitSchedule bit_combination_schedule(int act_bits, int weight_bits) {
  BitSchedule groups;
  for (int magnitude = act_bits + weight_bits; magnitude >= 2; --magnitude) {
    std::vector<BitPair> group;
    for (int j = act_bits; j >= 1; --j) {
      const int k = magnitude - j;
      if (k >= 1 && k <= weight_bits) group.push_back({j, k});
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

void ShiftAccumulator::add(std::int64_t term) {
  constexpr std::int64_t limit = std::int64_t{1} << (kWidth - 1);
  value_ += term;
  if (value_ >= limit || value_ < -limit) {
    fail(ErrorCode::MvpOverflow, "accumulator exceeded 48-bit range");
  }
}

void ShiftAccumulator::shift() {
  constexpr std::int64_t limit = std::int64_t{1} << (kWidth - 2);
  if (value_ >= limit || value_ < -limit) {
    fail(ErrorCode::MvpOverflow, "accumulator shift exceeded 48-bit range");
  }
  value_ *= 2;
  ++shifts_;
}

std::int64_t bitserial_dot(std::span<const std::uint64_t> act_planes,
                           std::span<const std::uint64_t> weight_planes, Precision act,
                           Precision weight) {
  if (act_planes.size() != static_cast<std::size_t>(act.bits) ||
      weight_planes.size() != static_cast<std::size_t>(weight.bits)) {
    fail(ErrorCode::MalformedTensor, "plane count does not match precision");
  }
  ShiftAccumulator acc;
  const BitSchedule schedule = bit_combination_schedule(act.bits, weight.bits);
  for (std::size_t g = 0; g < schedule.size(); ++g) {
    if (g != 0) acc.shift();
    for (const BitPair& pair : schedule[g]) {
      const auto x = act_planes[static_cast<std::size_t>(act.bits - pair.act_bit)];
      const auto w = weight_planes[static_cast<std::size_t>(weight.bits - pair.weight_bit)];
      const int term = adder_tree_sum(x, w);
      acc.add(negated_pair(pair, act, weight) ? -term : term);
    }
  }
  return acc.value();
}

std::int64_t bitserial_dot(const BitTransposedTensor& act_block,
                           const BitTransposedTensor& weight_block) {
  if (act_block.block_width != static_cast<std::size_t>(kLanes) ||
      weight_block.block_width != static_cast<std::size_t>(kLanes)) {
    fail(ErrorCode::LaneMismatch, "bit-serial dot product needs 64-lane blocks");
  }
  if (act_block.block_count() != 1 || weight_block.block_count() != 1) {
    fail(ErrorCode::MalformedTensor, "expected exactly one block per operand");
  }
  return bitserial_dot(act_block.block(0), weight_block.block(0), act_block.precision,
                       weight_block.precision);
}

}  // namespace mvusim
