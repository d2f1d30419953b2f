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

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "mvusim/ir.hpp"

namespace testutil {

inline std::filesystem::path model_path(const std::string& name) {
  return std::filesystem::path(MVUSIM_MODELS_DIR) / name;
}

inline nlohmann::json prec(int bits, bool is_signed) { return {{"bits", bits}, {"signed", is_signed}}; }

// Single conv layer, seeded weights.
inline nlohmann::json conv_json(int h, int w, int ci, int co, int k, int stride, int pad, int bits = 2,
                                int pool = 1, bool relu = false) {
  const int oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
  return {{"name", "c"},
          {"kind", "conv2d"},
          {"input_shape", {1, h, w, ci}},
          {"output_shape", {1, oh / pool, ow / pool, co}},
          {"kernel", {co, ci, k, k}},
          {"stride", stride},
          {"padding", pad},
          {"pool", pool},
          {"relu", relu},
          {"prec_a", prec(bits, false)},
          {"prec_w", prec(bits, true)},
          {"prec_out", prec(bits, false)},
          {"weights", {{"seed", 7}}},
          {"quant_msb", "auto"}};
}

inline nlohmann::json model_json(const nlohmann::json& layers) {
  return {{"version", 1}, {"name", "t"}, {"clock_mhz", 250}, {"layers", layers}};
}

inline mvusim::ModelIR single(const nlohmann::json& layer) {
  return mvusim::parse_model(model_json(nlohmann::json::array({layer})));
}

}  // namespace testutil
