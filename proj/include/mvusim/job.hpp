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
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mvusim/bitserial.hpp"

namespace mvusim {

inline constexpr int kAguLevels = 5;
inline constexpr int kMvuCount = 8;

// Up to five nested loops. Level 0 is innermost; a count of 0 marks the
// level (and every level above it) inactive. When a level advances, its
// jump is added to the address; the levels below it restart without
// moving the address.
struct AguConfig {
  std::array<std::uint32_t, kAguLevels> counts{};
  std::array<std::int32_t, kAguLevels> jumps{};
  std::uint32_t base = 0;

  int active_levels() const;
  std::uint64_t length() const;

  friend bool operator==(const AguConfig&, const AguConfig&) = default;
};

// Word addresses visited by the loop nest, innermost first.
// Throws AddressOutOfRange if any address falls outside [0, depth).
std::vector<std::uint32_t> agu_sequence(const AguConfig& cfg, std::size_t depth);

// Converts the natural description of a loop nest (address = base +
// sum(i_l * stride_l)) into count/jump form.
AguConfig agu_from_strides(std::uint32_t base, std::span<const std::uint32_t> counts,
                           std::span<const std::int64_t> strides);

struct JobDescriptor {
  Precision act_prec;
  Precision weight_prec;
  AguConfig act_agu;
  AguConfig weight_agu;
  AguConfig scaler_agu;
  AguConfig bias_agu;
  AguConfig output_agu;
  std::uint32_t countdown = 0;
  // Innermost activation/weight loop levels summed into one output tile.
  std::uint32_t reduce_depth = 1;
  bool scaler_enable = false;
  bool relu_enable = false;
  // Consecutive MVP outputs folded by the pool/relu comparator; 1 disables pooling.
  std::uint32_t pool_window = 1;
  std::uint32_t quant_msb = 0;
  std::uint32_t quant_bits = 1;
  std::uint8_t dest_mask = 1;
  std::uint32_t dest_base = 0;

  friend bool operator==(const JobDescriptor&, const JobDescriptor&) = default;
};

// Shape of a job derived from its descriptor.
struct JobShape {
  std::uint64_t reduce_length = 0;  // AGU steps per output tile
  std::uint64_t mvp_tiles = 0;      // outputs leaving the MVP
  std::uint64_t output_tiles = 0;   // outputs after pooling
  std::uint64_t bit_pairs = 0;      // b_a * b_w
};

// Checks every descriptor invariant that does not depend on RAM contents.
// Throws BadJob / BadQuantWindow / PrecisionMismatch.
JobShape validate_job(const JobDescriptor& job);

void to_json(nlohmann::json& j, const AguConfig& cfg);
void from_json(const nlohmann::json& j, AguConfig& cfg);
void to_json(nlohmann::json& j, const JobDescriptor& job);
void from_json(const nlohmann::json& j, JobDescriptor& job);

}  // namespace mvusim
