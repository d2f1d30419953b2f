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

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mvusim/ir.hpp"

namespace mvusim {

struct LayerCycleEntry {
  std::string name;
  std::uint64_t cycles = 0;       // interior rows (the calibrated figure)
  std::uint64_t edge_cycles = 0;  // padded edge rows; 0 from the estimator
};

struct CycleReport {
  std::string model;
  std::vector<LayerCycleEntry> per_layer;
  std::uint64_t total_cycles = 0;
  double clock_hz = 250e6;
  std::uint64_t fps_single = 0;     // clock / total
  std::uint64_t fps_pipelined = 0;  // clock / sum over laps of the slowest stage
};

// b_a*b_w * F_H*F_W * ceil(C_i/64)*ceil(C_o/64) * W * R, where W and R are
// the computed output columns and the computed rows whose receptive field
// lies inside the unpadded input. Throws UnsupportedOp for non-conv layers.
std::uint64_t estimate_conv_cycles(const LayerIR& layer);

// Same law for every layer kind through its convolution view.
std::uint64_t estimate_layer_cycles(const LayerIR& layer);

CycleReport make_report(std::string model, std::vector<LayerCycleEntry> layers, double clock_hz);
CycleReport estimate_model(const ModelIR& model, double clock_hz);

// floor(base_fps / (b_a*b_w)).
std::uint64_t fps_scaling_check(std::uint64_t base_fps, int b_a, int b_w);

nlohmann::json report_to_json(const CycleReport& report);
// Aligned table; the last line is "Total: N".
std::string report_table(const CycleReport& report);

}  // namespace mvusim
