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

#include "mvusim/ir.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mvusim/error.hpp"
#include "mvusim/oracle.hpp"
#include "mvusim/rng.hpp"

namespace mvusim {

using nlohmann::json;

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Gemm: return "gemm";
    case LayerKind::Gemv: return "gemv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Relu: return "relu";
  }
  return "?";
}

namespace {

LayerKind parse_kind(const std::string& s) {
  if (s == "conv2d") return LayerKind::Conv2d;
  if (s == "gemm") return LayerKind::Gemm;
  if (s == "gemv") return LayerKind::Gemv;
  if (s == "maxpool") return LayerKind::MaxPool;
  if (s == "relu") return LayerKind::Relu;
  fail(ErrorCode::UnsupportedOp, "unsupported layer kind '" + s + "'");
}

std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

bool is_identity(LayerKind k) { return k == LayerKind::MaxPool || k == LayerKind::Relu; }

std::int64_t product(const std::vector<int>& s) {
  std::int64_t p = 1;
  for (int d : s) p *= d;
  return p;
}

int out_channels(const LayerIR& l) {
  if (is_identity(l.kind)) return l.input_shape.empty() ? 0 : l.input_shape.back();
  return l.kernel.empty() ? 0 : l.kernel[0];
}

Precision parse_precision(const json& j) {
  return Precision::make(j.at("bits").get<int>(), j.at("signed").get<bool>());
}

json precision_json(const Precision& p) { return {{"bits", p.bits}, {"signed", p.is_signed}}; }

// Signed weights of 2+ bits are drawn from [-max, max] so they are zero-mean.
std::vector<std::int64_t> draw_weights(std::uint64_t seed, std::size_t n, Precision p) {
  SplitMix64 rng(seed);
  const std::int64_t lo = p.is_signed && p.bits > 1 ? -p.max() : p.min();
  std::vector<std::int64_t> w(n);
  for (auto& v : w) v = rng.uniform(lo, p.max());
  return w;
}

std::size_t weight_count(const LayerIR& l) {
  std::size_t n = 1;
  for (int d : l.kernel) n *= static_cast<std::size_t>(std::max(d, 0));
  return l.kernel.empty() ? 0 : n;
}

template <typename T>
std::vector<T> per_channel(const json& j, const char* key, int channels, T (*quantize)(double),
                           double dflt) {
  std::vector<T> out;
  if (!j.contains(key)) {
    out.assign(static_cast<std::size_t>(channels), quantize(dflt));
  } else if (j.at(key).is_number()) {
    out.assign(static_cast<std::size_t>(channels), quantize(j.at(key).get<double>()));
  } else {
    for (const auto& v : j.at(key)) out.push_back(quantize(v.get<double>()));
    if (out.size() != static_cast<std::size_t>(channels)) {
      fail(ErrorCode::ShapeMismatch, std::string(key) + " has " + std::to_string(out.size()) +
                                         " entries for " + std::to_string(channels) + " channels");
    }
  }
  return out;
}

std::vector<std::int64_t> read_weight_file(const std::filesystem::path& p, std::size_t n) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read weight file " + p.string());
  std::vector<std::int64_t> w(n);
  for (auto& v : w) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
      fail(ErrorCode::MalformedTensor, p.string() + " holds fewer than " + std::to_string(n) + " weights");
    }
    v = static_cast<std::int32_t>(b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t{b[3]} << 24));
  }
  return w;
}

LayerIR parse_layer(const json& j, const std::filesystem::path& base_dir, std::size_t index) {
  LayerIR l;
  l.name = j.value("name", "layer" + std::to_string(index));
  l.kind = parse_kind(j.at("kind").get<std::string>());
  l.input_shape = j.at("input_shape").get<std::vector<int>>();
  l.output_shape = j.at("output_shape").get<std::vector<int>>();
  for (const auto* s : {&l.input_shape, &l.output_shape}) {
    if (s->empty() || s->size() > 4) {
      fail(ErrorCode::UnsupportedShape, l.name + ": tensors must have rank 1..4, got " + shape_str(*s));
    }
  }
  l.stride = j.value("stride", 1);
  l.padding = j.value("padding", 0);
  l.pool = j.value("pool", 1);
  l.relu = j.value("relu", l.kind == LayerKind::Relu);
  l.prec_a = parse_precision(j.at("prec_a"));
  if (is_identity(l.kind)) {
    l.prec_w = Precision::make(1, false);
    l.prec_out = j.contains("prec_out") ? parse_precision(j.at("prec_out")) : l.prec_a;
  } else {
    l.kernel = j.at("kernel").get<std::vector<int>>();
    l.prec_w = parse_precision(j.at("prec_w"));
    l.prec_out = parse_precision(j.at("prec_out"));
  }

  if (!is_identity(l.kind)) {
    const std::size_t n = weight_count(l);
    const json& w = j.at("weights");
    if (w.is_array()) {
      l.weights = w.get<std::vector<std::int64_t>>();
    } else if (w.contains("seed")) {
      l.weight_seed = w.at("seed").get<std::uint64_t>();
      l.weights = draw_weights(*l.weight_seed, n, l.prec_w);
    } else if (w.contains("file")) {
      l.weights = read_weight_file(base_dir / w.at("file").get<std::string>(), n);
    } else {
      fail(ErrorCode::SchemaError, l.name + ": weights must be an array, {\"seed\"} or {\"file\"}");
    }
  }
  const int oc = out_channels(l);
  if (is_identity(l.kind)) {
    l.scale.assign(static_cast<std::size_t>(std::max(oc, 0)), 1);
    l.bias.assign(static_cast<std::size_t>(std::max(oc, 0)), 0);
  } else {
    l.scale = per_channel<std::uint16_t>(j, "scale", oc, quantize_scale, 1.0);
    l.bias = per_channel<std::int32_t>(j, "bias", oc, quantize_bias, 0.0);
  }
  if (j.contains("quant_msb") && j.at("quant_msb").is_number_integer()) {
    l.quant_msb = j.at("quant_msb").get<int>();
    l.quant_auto = false;
  } else {
    if (j.contains("quant_msb") && j.at("quant_msb") != "auto") {
      fail(ErrorCode::SchemaError, l.name + ": quant_msb must be an integer or \"auto\"");
    }
    l.quant_auto = true;
    l.quant_msb = l.prec_out.bits - 1;  // placed by calibrate_windows
  }
  if (is_identity(l.kind)) {
    l.quant_auto = true;
    l.quant_msb = l.prec_a.bits - 1;
  }
  return l;
}

void validate_layer(const LayerIR& l) {
  auto bad_shape = [&](const std::string& msg) { fail(ErrorCode::UnsupportedShape, l.name + ": " + msg); };
  auto mismatch = [&](const std::string& msg) { fail(ErrorCode::ShapeMismatch, l.name + ": " + msg); };
  for (const auto* s : {&l.input_shape, &l.output_shape}) {
    if (s->empty() || s->size() > 4) bad_shape("tensors must have rank 1..4, got " + shape_str(*s));
    for (int d : *s)
      if (d <= 0) bad_shape("non-positive dimension in " + shape_str(*s));
  }
  if (l.stride < 1 || l.padding < 0 || l.pool < 1) bad_shape("stride/pool must be >= 1, padding >= 0");

  auto need_nhwc = [&](const std::vector<int>& s) {
    if (s.size() != 4) bad_shape("expected [1,H,W,C], got " + shape_str(s));
    if (s[0] != 1) bad_shape("batch size must be 1");
  };

  switch (l.kind) {
    case LayerKind::Conv2d: {
      need_nhwc(l.input_shape);
      need_nhwc(l.output_shape);
      if (l.kernel.size() != 4) bad_shape("conv kernel must be [C_o,C_i,F_H,F_W]");
      for (int d : l.kernel)
        if (d <= 0) bad_shape("non-positive kernel dimension");
      if (l.kernel[1] != l.input_shape[3]) mismatch("kernel C_i differs from input channels");
      const int hp = l.input_shape[1] + 2 * l.padding, wp = l.input_shape[2] + 2 * l.padding;
      if (l.kernel[2] > hp || l.kernel[3] > wp) bad_shape("kernel larger than the padded input");
      const int ch = (hp - l.kernel[2]) / l.stride + 1, cw = (wp - l.kernel[3]) / l.stride + 1;
      if (ch < l.pool || cw < l.pool) bad_shape("pool window larger than the conv output");
      const std::vector<int> want{1, ch / l.pool, cw / l.pool, l.kernel[0]};
      if (l.output_shape != want) mismatch("output shape " + shape_str(l.output_shape) + " should be " + shape_str(want));
      break;
    }
    case LayerKind::Gemm: {
      if (l.input_shape.size() != 2 || l.output_shape.size() != 2 || l.kernel.size() != 2) {
        bad_shape("gemm needs [M,K] input, [N,K] kernel, [M,N] output");
      }
      if (l.kernel[1] != l.input_shape[1] || l.output_shape != std::vector<int>{l.input_shape[0], l.kernel[0]}) {
        mismatch("gemm shapes disagree");
      }
      if (l.pool != 1 || l.stride != 1 || l.padding != 0) bad_shape("gemm takes no stride, padding or pool");
      break;
    }
    case LayerKind::Gemv: {
      if (l.kernel.size() != 2) bad_shape("gemv kernel must be [N,K]");
      if (l.input_shape.size() != 1 && l.input_shape.size() != 4) bad_shape("gemv input must be [K] or [1,H,W,C]");
      if (l.input_shape.size() == 4 && l.input_shape[0] != 1) bad_shape("batch size must be 1");
      if (l.output_shape != std::vector<int>{l.kernel[0]}) mismatch("gemv output must be [N]");
      if (product(l.input_shape) != l.kernel[1]) mismatch("gemv kernel K differs from the input size");
      if (l.pool != 1 || l.stride != 1 || l.padding != 0) bad_shape("gemv takes no stride, padding or pool");
      break;
    }
    case LayerKind::MaxPool:
    case LayerKind::Relu: {
      need_nhwc(l.input_shape);
      need_nhwc(l.output_shape);
      if (l.kind == LayerKind::Relu && l.pool != 1) bad_shape("relu takes no pool window");
      if (l.input_shape[1] < l.pool || l.input_shape[2] < l.pool) bad_shape("pool window larger than the input");
      const std::vector<int> want{1, l.input_shape[1] / l.pool, l.input_shape[2] / l.pool, l.input_shape[3]};
      if (l.output_shape != want) mismatch("output shape " + shape_str(l.output_shape) + " should be " + shape_str(want));
      if (l.prec_out != l.prec_a) fail(ErrorCode::PrecisionMismatch, l.name + ": pooling keeps the input precision");
      break;
    }
  }

  if (!is_identity(l.kind)) {
    if (l.weights.size() != weight_count(l)) {
      mismatch("expected " + std::to_string(weight_count(l)) + " weights, got " + std::to_string(l.weights.size()));
    }
    for (std::int64_t w : l.weights) {
      if (!l.prec_w.contains(w)) {
        fail(ErrorCode::OutOfRange, l.name + ": weight " + std::to_string(w) + " outside " +
                                        std::to_string(l.prec_w.bits) + "-bit range");
      }
    }
  }
  const auto oc = static_cast<std::size_t>(out_channels(l));
  if (l.scale.size() != oc || l.bias.size() != oc) mismatch("scale/bias need one entry per output channel");
  if (l.quant_msb < 0 || l.quant_msb > 31 || l.prec_out.bits > l.quant_msb + 1) {
    fail(ErrorCode::BadQuantWindow, l.name + ": quant_msb " + std::to_string(l.quant_msb) +
                                        " cannot hold " + std::to_string(l.prec_out.bits) + " output bits");
  }
}

}  // namespace

std::uint16_t quantize_scale(double v) {
  const double r = std::nearbyint(v);  // default rounding mode: nearest, ties to even
  if (!(r >= 0.0 && r <= 65535.0)) fail(ErrorCode::OutOfRange, "scale " + std::to_string(v) + " outside 16-bit unsigned range");
  return static_cast<std::uint16_t>(r);
}

std::int32_t quantize_bias(double v) {
  const double r = std::nearbyint(v);
  if (!(r >= -2147483648.0 && r <= 2147483647.0)) fail(ErrorCode::OutOfRange, "bias " + std::to_string(v) + " outside 32-bit range");
  return static_cast<std::int32_t>(r);
}

std::int64_t reduction_length(const LayerIR& l) {
  switch (l.kind) {
    case LayerKind::Conv2d: return std::int64_t{l.kernel[1]} * l.kernel[2] * l.kernel[3];
    case LayerKind::Gemm:
    case LayerKind::Gemv: return l.kernel[1];
    default: return 1;
  }
}

void validate_model(const ModelIR& m) {
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    validate_layer(m.layers[i]);
    if (i == 0) continue;
    const LayerIR& prev = m.layers[i - 1];
    const LayerIR& cur = m.layers[i];
    if (prev.output_shape != cur.input_shape) {
      fail(ErrorCode::ShapeMismatch, cur.name + ": input " + shape_str(cur.input_shape) + " does not match " +
                                         prev.name + " output " + shape_str(prev.output_shape));
    }
    if (prev.prec_out != cur.prec_a) {
      fail(ErrorCode::PrecisionMismatch, cur.name + ": activation precision differs from " + prev.name + " output");
    }
  }
  if (!(m.clock_mhz > 0)) fail(ErrorCode::SchemaError, "clock_mhz must be positive");
}

ModelIR parse_model(const json& j, const std::filesystem::path& base_dir) {
  ModelIR m;
  try {
    if (j.contains("version") && j.at("version").get<int>() != kModelIrVersion) {
      fail(ErrorCode::SchemaError, "unsupported ModelIR version");
    }
    m.name = j.value("name", "model");
    m.clock_mhz = j.value("clock_mhz", 250.0);
    const json& layers = j.at("layers");
    if (!layers.is_array()) fail(ErrorCode::SchemaError, "layers must be an array");
    for (std::size_t i = 0; i < layers.size(); ++i) m.layers.push_back(parse_layer(layers[i], base_dir, i));
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaError, e.what());
  }
  validate_model(m);
  calibrate_windows(m);
  return m;
}

ModelIR load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
  return parse_model(j, path.parent_path());
}

json model_to_json(const ModelIR& m) {
  json layers = json::array();
  for (const LayerIR& l : m.layers) {
    json o{{"name", l.name},
           {"kind", std::string(to_string(l.kind))},
           {"input_shape", l.input_shape},
           {"output_shape", l.output_shape},
           {"prec_a", precision_json(l.prec_a)},
           {"prec_out", precision_json(l.prec_out)}};
    if (l.kind == LayerKind::Conv2d) {
      o["stride"] = l.stride;
      o["padding"] = l.padding;
    }
    if (l.pool != 1 || l.kind == LayerKind::MaxPool) o["pool"] = l.pool;
    if (l.relu && l.kind != LayerKind::Relu) o["relu"] = true;
    if (!is_identity(l.kind)) {
      o["kernel"] = l.kernel;
      o["prec_w"] = precision_json(l.prec_w);
      o["weights"] = l.weights;
      o["scale"] = l.scale;
      o["bias"] = l.bias;
      o["quant_msb"] = l.quant_auto ? json("auto") : json(l.quant_msb);
    }
    layers.push_back(std::move(o));
  }
  return {{"version", kModelIrVersion}, {"name", m.name}, {"clock_mhz", m.clock_mhz}, {"layers", layers}};
}

ModelIR with_precision(const ModelIR& model, int weight_bits, int act_bits) {
  ModelIR m = model;
  // A 1-bit signed operand can only hold {-1, 0}; 1-bit widths become unsigned.
  auto make = [](int bits, bool is_signed) { return Precision::make(bits, is_signed && bits > 1); };
  for (LayerIR& l : m.layers) {
    l.prec_a = make(act_bits, l.prec_a.is_signed);
    if (is_identity(l.kind)) {
      l.prec_out = l.prec_a;
    } else {
      l.prec_w = make(weight_bits, l.prec_w.is_signed);
      l.prec_out = make(act_bits, l.prec_out.is_signed);
      if (l.weight_seed) l.weights = draw_weights(*l.weight_seed, weight_count(l), l.prec_w);
    }
    l.quant_auto = true;
    l.quant_msb = (is_identity(l.kind) ? l.prec_a.bits : l.prec_out.bits) - 1;
  }
  validate_model(m);
  calibrate_windows(m);
  return m;
}

ConvView conv_view(const LayerIR& l) {
  ConvView v;
  v.act = l.prec_a;
  v.weight = l.prec_w;
  v.out = l.prec_out;
  v.relu = l.relu;
  v.quant_msb = l.quant_msb;
  v.scale = l.scale;
  v.bias = l.bias;
  v.pool = l.pool;
  v.stride = 1;
  v.pad = 0;
  switch (l.kind) {
    case LayerKind::Conv2d:
      v.in_h = l.input_shape[1];
      v.in_w = l.input_shape[2];
      v.in_c = l.input_shape[3];
      v.out_c = l.kernel[0];
      v.kh = l.kernel[2];
      v.kw = l.kernel[3];
      v.stride = l.stride;
      v.pad = l.padding;
      break;
    case LayerKind::Gemm:
      v.in_h = 1;
      v.in_w = l.input_shape[0];
      v.in_c = l.input_shape[1];
      v.out_c = l.kernel[0];
      break;
    case LayerKind::Gemv:
      if (l.input_shape.size() == 4) {
        v.in_h = v.kh = l.input_shape[1];
        v.in_w = v.kw = l.input_shape[2];
        v.in_c = l.input_shape[3];
      } else {
        v.in_c = l.input_shape[0];
      }
      v.out_c = l.kernel[0];
      break;
    case LayerKind::MaxPool:
    case LayerKind::Relu:
      v.in_h = l.input_shape[1];
      v.in_w = l.input_shape[2];
      v.in_c = v.out_c = l.input_shape[3];
      break;
  }
  v.conv_h = (v.in_h + 2 * v.pad - v.kh) / v.stride + 1;
  v.conv_w = (v.in_w + 2 * v.pad - v.kw) / v.stride + 1;
  v.out_h = v.conv_h / v.pool;
  v.out_w = v.conv_w / v.pool;

  const auto oc = static_cast<std::size_t>(v.out_c);
  const auto ic = static_cast<std::size_t>(v.in_c);
  const auto kh = static_cast<std::size_t>(v.kh), kw = static_cast<std::size_t>(v.kw);
  v.weights.assign(oc * kh * kw * ic, 0);
  for (std::size_t o = 0; o < oc; ++o) {
    for (std::size_t y = 0; y < kh; ++y) {
      for (std::size_t x = 0; x < kw; ++x) {
        for (std::size_t c = 0; c < ic; ++c) {
          std::int64_t w = 0;
          switch (l.kind) {
            case LayerKind::Conv2d: w = l.weights[((o * ic + c) * kh + y) * kw + x]; break;
            case LayerKind::Gemm:
            case LayerKind::Gemv: w = l.weights[o * (kh * kw * ic) + (y * kw + x) * ic + c]; break;
            default: w = (o == c) ? 1 : 0; break;
          }
          v.weights[((o * kh + y) * kw + x) * ic + c] = w;
        }
      }
    }
  }
  return v;
}

}  // namespace mvusim
