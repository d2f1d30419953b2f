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

#include "mvusim/perf.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mvusim/error.hpp"
#include "mvusim/pito.hpp"

namespace mvusim {

std::uint64_t estimate_layer_cycles(const LayerIR& layer) {
  const ConvView v = conv_view(layer);
  const auto blocks = [](int c) { return static_cast<std::uint64_t>((c + 63) / 64); };
  std::uint64_t rows = 0;
  for (int r = 0; r < v.out_h * v.pool; ++r) {
    const int top = r * v.stride - v.pad;
    if (top >= 0 && top + v.kh <= v.in_h) ++rows;
  }
  return static_cast<std::uint64_t>(v.act.bits) * static_cast<std::uint64_t>(v.weight.bits) *
         static_cast<std::uint64_t>(v.kh) * static_cast<std::uint64_t>(v.kw) * blocks(v.in_c) * blocks(v.out_c) *
         static_cast<std::uint64_t>(v.out_w * v.pool) * rows;
}

std::uint64_t estimate_conv_cycles(const LayerIR& layer) {
  if (layer.kind != LayerKind::Conv2d) {
    fail(ErrorCode::UnsupportedOp, layer.name + ": " + std::string(to_string(layer.kind)) + " is not a convolution");
  }
  return estimate_layer_cycles(layer);
}

CycleReport make_report(std::string model, std::vector<LayerCycleEntry> layers, double clock_hz) {
  CycleReport r;
  r.model = std::move(model);
  r.per_layer = std::move(layers);
  r.clock_hz = clock_hz;
  std::uint64_t lap_sum = 0;
  for (std::size_t i = 0; i < r.per_layer.size(); ++i) {
    r.total_cycles += r.per_layer[i].cycles;
  }
  for (std::size_t lap = 0; lap < r.per_layer.size(); lap += kHarts) {
    std::uint64_t worst = 0;
    for (std::size_t i = lap; i < std::min(r.per_layer.size(), lap + kHarts); ++i) worst = std::max(worst, r.per_layer[i].cycles);
    lap_sum += worst;
  }
  const auto clock = static_cast<std::uint64_t>(std::llround(clock_hz));
  r.fps_single = r.total_cycles ? clock / r.total_cycles : 0;
  r.fps_pipelined = lap_sum ? clock / lap_sum : 0;
  return r;
}

CycleReport estimate_model(const ModelIR& model, double clock_hz) {
  std::vector<LayerCycleEntry> layers;
  for (const LayerIR& l : model.layers) layers.push_back({l.name, estimate_layer_cycles(l), 0});
  return make_report(model.name, std::move(layers), clock_hz);
}

std::uint64_t fps_scaling_check(std::uint64_t base_fps, int b_a, int b_w) {
  if (b_a < 1 || b_w < 1) fail(ErrorCode::OutOfRange, "precisions must be positive");
  return base_fps / (static_cast<std::uint64_t>(b_a) * static_cast<std::uint64_t>(b_w));
}

nlohmann::json report_to_json(const CycleReport& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : r.per_layer) layers.push_back({{"name", l.name}, {"cycles", l.cycles}, {"edge_cycles", l.edge_cycles}});
  return {{"model", r.model},
          {"clock_hz", r.clock_hz},
          {"per_layer", layers},
          {"total_cycles", r.total_cycles},
          {"fps_single", r.fps_single},
          {"fps_pipelined", r.fps_pipelined}};
}

std::string report_table(const CycleReport& r) {
  std::size_t w = 5;
  for (const auto& l : r.per_layer) w = std::max(w, l.name.size());
  const bool edges = std::any_of(r.per_layer.begin(), r.per_layer.end(), [](const auto& l) { return l.edge_cycles != 0; });
  std::ostringstream o;
  o << r.model << " @ " << r.clock_hz / 1e6 << " MHz: " << r.fps_single << " FPS single, " << r.fps_pipelined
    << " FPS pipelined\n";
  o << std::left << std::setw(static_cast<int>(w)) << "Layer" << "  " << std::right << std::setw(12) << "Cycles";
  if (edges) o << "  " << std::setw(12) << "Edge cycles";
  o << '\n';
  for (const auto& l : r.per_layer) {
    o << std::left << std::setw(static_cast<int>(w)) << l.name << "  " << std::right << std::setw(12) << l.cycles;
    if (edges) o << "  " << std::setw(12) << l.edge_cycles;
    o << '\n';
  }
  o << "Total: " << r.total_cycles << '\n';
  return o.str();
}

}  // namespace mvusim
