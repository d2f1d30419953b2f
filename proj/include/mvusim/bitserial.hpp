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

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mvusim {

inline constexpr int kLanes = 64;
inline constexpr int kMaxBits = 16;

// Fixed-point operand format: 1..16 bits, unsigned or 2's complement.
struct Precision {
  int bits = 1;
  bool is_signed = false;

  // Throws OutOfRange when bits is outside 1..16.
  static Precision make(int bits, bool is_signed);

  std::int64_t min() const { return is_signed ? -(std::int64_t{1} << (bits - 1)) : 0; }
  std::int64_t max() const {
    return is_signed ? (std::int64_t{1} << (bits - 1)) - 1 : (std::int64_t{1} << bits) - 1;
  }
  bool contains(std::int64_t v) const { return v >= min() && v <= max(); }

  friend bool operator==(const Precision&, const Precision&) = default;
};

// Blocks of `block_width` elements, each block stored as `precision.bits`
// words. Word 0 of a block holds the MSB plane; bit l of a word belongs to
// element l of the block.
struct BitTransposedTensor {
  std::vector<std::size_t> shape;
  Precision precision;
  std::size_t block_width = kLanes;
  std::vector<std::uint64_t> planes;

  std::size_t block_count() const {
    return precision.bits == 0 ? 0 : planes.size() / static_cast<std::size_t>(precision.bits);
  }
  std::span<const std::uint64_t> block(std::size_t index) const {
    return std::span<const std::uint64_t>(planes).subspan(
        index * static_cast<std::size_t>(precision.bits), static_cast<std::size_t>(precision.bits));
  }
};

BitTransposedTensor transpose(std::span<const std::int64_t> elements, Precision precision,
                              std::size_t block_width = kLanes);

std::vector<std::int64_t> untranspose(const BitTransposedTensor& tensor);

// Bit positions are 1-based: 1 is the LSB, `bits` the MSB (sign bit when signed).
struct BitPair {
  int act_bit = 1;
  int weight_bit = 1;
  friend bool operator==(const BitPair&, const BitPair&) = default;
};

using BitSchedule = std::vector<std::vector<BitPair>>;

// Groups of (j, k) with equal magnitude j + k, from b_a + b_w down to 2.
BitSchedule bit_combination_schedule(int act_bits, int weight_bits);

// One VVP cycle: 64 one-bit products reduced by the adder tree.
inline int adder_tree_sum(std::uint64_t act_lanes, std::uint64_t weight_lanes) {
  return std::popcount(act_lanes & weight_lanes);
}

// True when the partial product of bit pair (j, k) carries negative weight
// under 2's complement (exactly one operand contributes its sign bit).
inline bool negated_pair(const BitPair& pair, Precision act, Precision weight) {
  const bool act_sign = act.is_signed && pair.act_bit == act.bits;
  const bool weight_sign = weight.is_signed && pair.weight_bit == weight.bits;
  return act_sign != weight_sign;
}

// Shift-accumulator of one VVP. Only shifts by one bit, between magnitude
// groups.
class ShiftAccumulator {
 public:
  static constexpr int kWidth = 48;

  void add(std::int64_t term);
  void shift();
  void clear() {
    value_ = 0;
    shifts_ = 0;
  }

  std::int64_t value() const { return value_; }
  int shift_count() const { return shifts_; }

 private:
  std::int64_t value_ = 0;
  int shifts_ = 0;
};

// Bit-serial dot product of one 64-lane block pair. Planes are MSB-first.
std::int64_t bitserial_dot(std::span<const std::uint64_t> act_planes,
                           std::span<const std::uint64_t> weight_planes, Precision act,
                           Precision weight);

std::int64_t bitserial_dot(const BitTransposedTensor& act_block,
                           const BitTransposedTensor& weight_block);

}  // namespace mvusim
