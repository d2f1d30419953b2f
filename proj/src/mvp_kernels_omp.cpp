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

#include <bit>
#include <exception>

#include "mvusim/error.hpp"
#include "mvusim/mvp_kernels.hpp"

namespace mvusim {

namespace {

struct PairStep {
  std::size_t act_offset;
  std::size_t weight_offset;
  bool negate;
  bool shift_before;
};

}  // namespace

std::vector<LaneVector> mvp_tiles_parallel(const MvpPlan& plan,
                                           std::span<const std::uint64_t> act_ram,
                                           std::span<const std::uint64_t> weight_ram) {
  // Flatten the schedule once; shift_before marks the first pair of every
  // magnitude group after the first.
  std::vector<PairStep> steps;
  const BitSchedule schedule = bit_combination_schedule(plan.act.bits, plan.weight.bits);
  for (std::size_t g = 0; g < schedule.size(); ++g) {
    bool first = true;
    for (const BitPair& pair : schedule[g]) {
      steps.push_back({static_cast<std::size_t>(plan.act.bits - pair.act_bit),
                       static_cast<std::size_t>(plan.weight.bits - pair.weight_bit),
                       negated_pair(pair, plan.act, plan.weight), first && g != 0});
      first = false;
    }
  }

  const auto tiles = static_cast<std::ptrdiff_t>(plan.tiles());
  std::vector<LaneVector> out(static_cast<std::size_t>(tiles));
  std::exception_ptr error;

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < tiles; ++t) {
    try {
      std::array<ShiftAccumulator, kLanes> acc{};
      const std::size_t first_step = static_cast<std::size_t>(t) * plan.reduce_length;
      for (const PairStep& ps : steps) {
        if (ps.shift_before) {
          for (auto& a : acc) a.shift();
        }
        for (std::size_t r = 0; r < plan.reduce_length; ++r) {
          const std::size_t step = first_step + r;
          const std::uint64_t x = act_ram[plan.act_addr[step] + ps.act_offset];
          const std::uint64_t* row =
              &weight_ram[(plan.weight_addr[step] + ps.weight_offset) * kWordsPerWeightRow];
          for (std::size_t v = 0; v < static_cast<std::size_t>(kLanes); ++v) {
            const int term = adder_tree_sum(x, row[v]);
            acc[v].add(ps.negate ? -term : term);
          }
        }
      }
      for (std::size_t v = 0; v < static_cast<std::size_t>(kLanes); ++v) {
        out[static_cast<std::size_t>(t)][v] = acc[v].value();
      }
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace mvusim
