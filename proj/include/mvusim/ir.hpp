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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mvusim/bitserial.hpp"

namespace mvusim {

enum class LayerKind { Conv2d, Gemm, Gemv, MaxPool, Relu };

std::string_view to_string(LayerKind kind);

struct LayerIR {
  std::string name;
  LayerKind kind = LayerKind::Conv2d;
  std::vector<int> input_shape;   // conv/pool/relu: [1,H,W,C]; gemm: [M,K]; gemv: [K] or [1,H,W,C]
  std::vector<int> output_shape;  // conv/pool/relu: [1,H,W,C]; gemm: [M,N]; gemv: [N]
  std::vector<int> kernel;        // conv: [C_o,C_i,F_H,F_W]; gemm/gemv: [N,K]
  int stride = 1;
  int padding = 0;
  int pool = 1;  // max-pool window (and stride); 1 = none
  bool relu = false;
  Precision prec_a;
  Precision prec_w;
  Precision prec_out;
  // conv: [C_o][C_i][F_H][F_W]; gemm/gemv: [N][K] with K in NHWC order.
  std::vector<std::int64_t> weights;
  std::optional<std::uint64_t> weight_seed;  // weights were drawn from this seed
  std::vector<std::uint16_t> scale;          // one per output channel
  std::vector<std::int32_t> bias;
  int quant_msb = 0;
  bool quant_auto = true;
};

struct ModelIR {
  std::string name;
  double clock_mhz = 250.0;
  std::vector<LayerIR> layers;
};

inline constexpr int kModelIrVersion = 1;

// Throws SchemaError, UnsupportedOp, UnsupportedShape, ShapeMismatch,
// PrecisionMismatch, OutOfRange, IoError. `base_dir` resolves
// {"file": ...} weight references.
ModelIR parse_model(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ModelIR load_model(const std::filesystem::path& path);

// Weights are always written inline.
nlohmann::json model_to_json(const ModelIR& model);

// Scale/bias operands are rounded to nearest, ties to even.
std::uint16_t quantize_scale(double v);
std::int32_t quantize_bias(double v);

// Checks shapes, precisions and the layer chain.
void validate_model(const ModelIR& model);

// Overrides weight/activation widths of every layer (signedness kept, except
// that 1-bit operands are unsigned), redraws seeded weights and re-derives
// automatic quantizer windows.
ModelIR with_precision(const ModelIR& model, int weight_bits, int act_bits);

// Every supported layer executes as a convolution over an NHWC map.
struct ConvView {
  int in_h = 1, in_w = 1, in_c = 1;
  int out_c = 1;
  int kh = 1, kw = 1, stride = 1, pad = 0;
  int conv_h = 1, conv_w = 1;  // before pooling
  int pool = 1;
  int out_h = 1, out_w = 1;    // after pooling
  bool relu = false;
  Precision act, weight, out;
  int quant_msb = 0;
  std::vector<std::int64_t> weights;  // [out_c][kh][kw][in_c]
  std::vector<std::uint16_t> scale;
  std::vector<std::int32_t> bias;
};

ConvView conv_view(const LayerIR& layer);

// Reduction length of one output element (C_i * F_H * F_W).
std::int64_t reduction_length(const LayerIR& layer);

}  // namespace mvusim
