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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvusim/ir.hpp"
#include "mvusim/job.hpp"
#include "mvusim/mvu.hpp"

namespace mvusim {

enum class Mode { Pipelined, Distributed };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);  // throws SchemaError

// 64x64 tiling of a layer's weights. Channel counts are rounded up to
// whole blocks; the padding is zero.
struct TilePlan {
  int in_c = 1, out_c = 1, kh = 1, kw = 1;
  int in_blocks = 1;  // C_b
  int out_sets = 1;   // C_os
  int weight_bits = 1;

  std::size_t rows() const;
  // Weight RAM row (relative to the layer base) of one plane, in
  // C_os, F_H, F_W, C_b, plane order.
  std::size_t row_index(int out_set, int fh, int fw, int block, int plane) const;
};

// Throws UnsupportedShape for layers that cannot be lowered.
TilePlan tile_and_pad(const LayerIR& layer);

// Bit-transposed weight image: rows() rows of 64 words. Word v of a row
// feeds VVP v (output channel out_set*64+v); bit l is input channel
// block*64+l. Throws OutOfRange.
std::vector<std::uint64_t> export_weights(const LayerIR& layer, const TilePlan& plan);

// Inverse of export_weights. Returns weights in the layer's IR order;
// for maxpool/relu (no IR weights) the [out_c][kh][kw][in_c] identity.
std::vector<std::int64_t> import_weights(std::span<const std::uint64_t> image, const LayerIR& layer,
                                         const TilePlan& plan);

// NHWC activation buffer with physical zero padding. Channel block b of
// pixel (y, x) starts at address(y, x, b) and spans precision.bits words.
struct ActBuffer {
  std::uint32_t base = 0;
  int height = 1, width = 1, pad = 0, blocks = 1;
  Precision precision;

  int padded_width() const { return width + 2 * pad; }
  std::uint64_t words() const;
  // y, x in unpadded coordinates (-pad .. height+pad-1).
  std::uint32_t address(int y, int x, int block) const;

  friend bool operator==(const ActBuffer&, const ActBuffer&) = default;
};

// One MVU job and the rows it covers.
struct JobUnit {
  JobDescriptor job;
  int row = 0;            // output row (after pooling)
  int out_set = -1;       // pooled jobs cover one channel set; -1 = all
  int conv_row_begin = 0; // conv rows computed, before pooling
  int conv_row_end = 0;
  std::uint64_t interior_cycles = 0;  // MVP cycles of rows whose receptive field is unpadded
  std::uint64_t edge_cycles = 0;
};

struct LayerPlacement {
  ActBuffer input;
  ActBuffer dest;  // consumer's input buffer (or the model output buffer)
  std::uint32_t weight_base = 0;
  std::uint32_t sb_base = 0;  // scaler and bias row
};

// Row jobs for one layer. Destination masks are left at 1; compile()
// routes them.
std::vector<JobUnit> lower_layer(const LayerIR& layer, const LayerPlacement& place);

struct ScheduledJob {
  int layer = 0;
  int mvu = 0;
  int seq = 0;  // position in that MVU's job stream
  int row = 0;
  std::uint32_t need = 0;       // producer jobs_done required before issue
  JobDescriptor job;
  std::uint64_t interior_cycles = 0;
  std::uint64_t edge_cycles = 0;
};

struct LayerPlan {
  std::string name;
  LayerKind kind = LayerKind::Conv2d;
  int lap = 0;
  std::uint8_t mvu_mask = 0;
  ActBuffer input;
  std::uint32_t weight_base = 0;
  std::uint32_t weight_rows = 0;
  std::uint32_t sb_base = 0;
  int out_sets = 1;
};

struct CompiledProgram {
  Mode mode = Mode::Pipelined;
  std::string model_name;
  double clock_mhz = 250.0;
  MvuConfig config;
  int laps = 1;
  std::array<std::vector<std::uint64_t>, kMvuCount> weights;  // used rows x 64 words
  std::array<std::vector<std::uint16_t>, kMvuCount> scalers;  // used rows x 64
  std::array<std::vector<std::int32_t>, kMvuCount> biases;
  std::vector<LayerPlan> layers;
  std::vector<int> input_shape;
  std::uint8_t input_mask = 1;  // MVUs preloaded with the input tensor
  std::vector<int> output_shape;
  int output_channels = 1;
  ActBuffer output;
  std::vector<int> output_row_mvu;  // where each output row ends up
  std::string assembly;
  std::vector<ScheduledJob> schedule;
};

// Throws the IR validation errors, UnsupportedShape, RamOverflow and
// ProgramTooLarge.
CompiledProgram compile(const ModelIR& model, Mode mode, const MvuConfig& config = {});

// Directory form: weights_mvu<i>.bin, scaler_mvu<i>.bin, bias_mvu<i>.bin,
// program.asm, schedule.json, manifest.json.
void write_program(const CompiledProgram& program, const std::filesystem::path& dir);
CompiledProgram read_program(const std::filesystem::path& dir);

}  // namespace mvusim
