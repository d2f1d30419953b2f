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

#include "mvusim/mvp_kernels.hpp"

namespace mvusim {

std::vector<LaneVector> mvp_tiles_serial(const MvpPlan& plan,
                                         std::span<const std::uint64_t> act_ram,
                                         std::span<const std::uint64_t> weight_ram) {
  const BitSchedule schedule = bit_combination_schedule(plan.act.bits, plan.weight.bits);
  const std::size_t tiles = plan.tiles();
  std::vector<LaneVector> out(tiles);

  for (std::size_t t = 0; t < tiles; ++t) {
    for (std::size_t vvp = 0; vvp < static_cast<std::size_t>(kLanes); ++vvp) {
      ShiftAccumulator acc;
      for (std::size_t g = 0; g < schedule.size(); ++g) {
        if (g != 0) acc.shift();
        for (const BitPair& pair : schedule[g]) {
          const bool negate = negated_pair(pair, plan.act, plan.weight);
          for (std::size_t r = 0; r < plan.reduce_length; ++r) {
            const std::size_t step = t * plan.reduce_length + r;
            const std::uint64_t x =
                act_ram[plan.act_addr[step] + static_cast<std::size_t>(plan.act.bits - pair.act_bit)];
            const std::size_t row =
                plan.weight_addr[step] + static_cast<std::size_t>(plan.weight.bits - pair.weight_bit);
            const std::uint64_t w = weight_ram[row * kWordsPerWeightRow + vvp];
            std::int64_t sum = 0;
            for (int l = 0; l < kLanes; ++l) {
              const std::int64_t onebitprod = static_cast<std::int64_t>((x >> l) & (w >> l) & 1u);
              sum += onebitprod;
            }
            acc.add(negate ? -sum : sum);
          }
        }
      }
      out[t][vvp] = acc.value();
    }
  }
  return out;
}

}  // namespace mvusim
