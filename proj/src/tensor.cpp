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

#include "mvusim/tensor.hpp"

#include <fstream>
#include <functional>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mvusim/error.hpp"

namespace mvusim {

std::size_t Tensor::size() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

void check_range(const Tensor& t) {
  if (t.values.size() != t.size()) {
    fail(ErrorCode::MalformedTensor, "tensor holds " + std::to_string(t.values.size()) +
                                         " values, shape needs " + std::to_string(t.size()));
  }
  for (std::int64_t v : t.values) {
    if (!t.precision.contains(v)) {
      fail(ErrorCode::OutOfRange, "value " + std::to_string(v) + " outside " +
                                      std::to_string(t.precision.bits) + "-bit " +
                                      (t.precision.is_signed ? "signed" : "unsigned") + " range");
    }
  }
}

namespace {

std::filesystem::path sidecar(const std::filesystem::path& p) {
  return std::filesystem::path(p.string() + ".json");
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  check_range(t);
  std::ofstream bin(path, std::ios::binary);
  if (!bin) fail(ErrorCode::IoError, "cannot write " + path.string());
  for (std::int64_t v : t.values) {
    const auto u = static_cast<std::uint32_t>(static_cast<std::int32_t>(v));
    const char bytes[4] = {static_cast<char>(u), static_cast<char>(u >> 8), static_cast<char>(u >> 16),
                           static_cast<char>(u >> 24)};
    bin.write(bytes, 4);
  }
  std::ofstream meta(sidecar(path));
  if (!meta) fail(ErrorCode::IoError, "cannot write " + sidecar(path).string());
  const nlohmann::json j{{"shape", t.shape},
                         {"bits", t.precision.bits},
                         {"signed", t.precision.is_signed},
                         {"dtype", "int32"}};
  meta << j.dump(2) << '\n';
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream meta(sidecar(path));
  if (!meta) fail(ErrorCode::IoError, "cannot read " + sidecar(path).string());
  Tensor t;
  try {
    const auto j = nlohmann::json::parse(meta);
    t.shape = j.at("shape").get<std::vector<int>>();
    t.precision = Precision::make(j.at("bits").get<int>(), j.at("signed").get<bool>());
    if (j.contains("dtype") && j.at("dtype") != "int32") {
      fail(ErrorCode::SchemaError, "only int32 tensors are supported");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SchemaError, sidecar(path).string() + ": " + e.what());
  }
  std::ifstream bin(path, std::ios::binary);
  if (!bin) fail(ErrorCode::IoError, "cannot read " + path.string());
  const std::size_t n = t.size();
  t.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char b[4];
    if (!bin.read(reinterpret_cast<char*>(b), 4)) {
      fail(ErrorCode::MalformedTensor, path.string() + " is shorter than its shape");
    }
    const std::uint32_t u = b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t{b[3]} << 24);
    t.values[i] = static_cast<std::int32_t>(u);
  }
  if (bin.peek() != std::char_traits<char>::eof()) {
    fail(ErrorCode::MalformedTensor, path.string() + " is longer than its shape");
  }
  check_range(t);
  return t;
}

}  // namespace mvusim
