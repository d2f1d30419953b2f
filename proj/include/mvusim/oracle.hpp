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
#include <vector>

#include "mvusim/ir.hpp"
#include "mvusim/tensor.hpp"

namespace mvusim {

// Integer reference for a whole model, computed straight from the IR with
// no bit-serial arithmetic. Returns the output of every layer. Raises the
// same overflow errors the hardware would (MvpOverflow, QuantOverflow).
std::vector<Tensor> oracle_infer(const ModelIR& model, const Tensor& input);

// Requantizes one pipeline value: bits msb..msb-bits+1 read back in `out`.
std::int64_t oracle_quantize(std::int64_t v, int msb, Precision out);

// Uniform random input for the first layer.
Tensor random_input(const ModelIR& model, std::uint64_t seed);

// Places every automatic quantizer window ("quant_msb": "auto") by running
// the model on four random inputs: the lowest window holding 99% of a
// layer's values (or, when that window yields almost a single level, the
// highest lower window giving at least one bit of spread), or for 1-bit
// outputs the highest bit that is close to balanced on every input. Layers are placed in order, each seeing the
// previous layer's quantized output.
void calibrate_windows(ModelIR& model, std::uint64_t seed = 0x5eed);

}  // namespace mvusim
