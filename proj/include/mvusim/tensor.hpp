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
#include <vector>

#include "mvusim/bitserial.hpp"

namespace mvusim {

// Dense integer tensor in row-major order of `shape` (NHWC for feature maps).
struct Tensor {
  std::vector<int> shape;
  Precision precision;
  std::vector<std::int64_t> values;

  std::size_t size() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Throws OutOfRange when a value does not fit the precision.
void check_range(const Tensor& t);

// <path> holds little-endian int32 values, <path>.json the shape and
// precision: {"shape": [...], "bits": b, "signed": s, "dtype": "int32"}.
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace mvusim
