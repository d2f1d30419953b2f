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

#include "mvusim/bitserial.hpp"

namespace mvusim {

using LaneVector = std::array<std::int64_t, kLanes>;

// Address streams for one MVP job. Entry t*reduce_length + r is reduction
// step r of output tile t; activation addresses point at the MSB plane
// word of a 64-element block, weight addresses at the MSB plane row of a
// 64x64 tile.
struct MvpPlan {
  Precision act;
  Precision weight;
  std::size_t reduce_length = 1;
  std::vector<std::uint32_t> act_addr;
  std::vector<std::uint32_t> weight_addr;

  std::size_t tiles() const { return reduce_length == 0 ? 0 : act_addr.size() / reduce_length; }
};

// Weight RAM row r occupies words [r*64, r*64+64); word v feeds VVP v.
inline constexpr std::size_t kWordsPerWeightRow = kLanes;

enum class KernelKind { Serial, Parallel };

// Reference: every VVP walks the bit-combination schedule lane by lane with
// one-bit products, exactly as the hardware sequences it.
std::vector<LaneVector> mvp_tiles_serial(const MvpPlan& plan,
                                         std::span<const std::uint64_t> act_ram,
                                         std::span<const std::uint64_t> weight_ram);

// Same schedule with popcount adder trees, OpenMP-parallel over output tiles.
std::vector<LaneVector> mvp_tiles_parallel(const MvpPlan& plan,
                                           std::span<const std::uint64_t> act_ram,
                                           std::span<const std::uint64_t> weight_ram);

inline std::vector<LaneVector> mvp_tiles(KernelKind kind, const MvpPlan& plan,
                                         std::span<const std::uint64_t> act_ram,
                                         std::span<const std::uint64_t> weight_ram) {
  return kind == KernelKind::Serial ? mvp_tiles_serial(plan, act_ram, weight_ram)
                                    : mvp_tiles_parallel(plan, act_ram, weight_ram);
}

}  // namespace mvusim
