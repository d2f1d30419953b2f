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

#include "mvusim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "mvusim/error.hpp"
#include "mvusim/rng.hpp"

namespace mvusim {

namespace {

bool fits(std::int64_t v, int bits) {
  const std::int64_t lim = std::int64_t{1} << (bits - 1);
  return v >= -lim && v < lim;
}

// Post-accumulation path shared by every layer kind. Unchecked values are
// used only to place quantizer windows.
std::int64_t scale_bias(const LayerIR& l, std::int64_t acc, int channel, bool checked) {
  if (checked && !fits(acc, 27)) {
    fail(ErrorCode::MvpOverflow, l.name + ": accumulator " + std::to_string(acc) + " exceeds 27 bits");
  }
  const std::int64_t v = acc * l.scale[static_cast<std::size_t>(channel)] + l.bias[static_cast<std::size_t>(channel)];
  if (checked && !fits(v, 32)) {
    fail(ErrorCode::QuantOverflow, l.name + ": scaled value " + std::to_string(v) + " exceeds 32 bits");
  }
  return v;
}

// Values entering the quantizer (after scale, bias, relu and pooling).
std::vector<std::int64_t> conv_values(const LayerIR& l, const Tensor& in, bool checked) {
  const int H = l.input_shape[1], W = l.input_shape[2], C = l.input_shape[3];
  const int CO = l.kernel[0], FH = l.kernel[2], FW = l.kernel[3];
  const int s = l.stride, pad = l.padding, P = l.pool;
  const int OH = l.output_shape[1], OW = l.output_shape[2];
  std::vector<std::int64_t> out(static_cast<std::size_t>(OH) * OW * CO);
  auto act = [&](int y, int x, int c) -> std::int64_t {
    if (y < 0 || x < 0 || y >= H || x >= W) return 0;
    return in.values[(static_cast<std::size_t>(y) * W + x) * C + c];
  };
  for (int oy = 0; oy < OH; ++oy) {
    for (int ox = 0; ox < OW; ++ox) {
      for (int o = 0; o < CO; ++o) {
        std::int64_t best = l.relu ? 0 : std::numeric_limits<std::int64_t>::min();
        for (int py = 0; py < P; ++py) {
          for (int px = 0; px < P; ++px) {
            const int cy = oy * P + py, cx = ox * P + px;
            std::int64_t acc = 0;
            for (int c = 0; c < C; ++c)
              for (int fy = 0; fy < FH; ++fy)
                for (int fx = 0; fx < FW; ++fx)
                  acc += act(cy * s + fy - pad, cx * s + fx - pad, c) *
                         l.weights[((static_cast<std::size_t>(o) * C + c) * FH + fy) * FW + fx];
            best = std::max(best, scale_bias(l, acc, o, checked));
          }
        }
        out[(static_cast<std::size_t>(oy) * OW + ox) * CO + o] = best;
      }
    }
  }
  return out;
}

// gemm rows are independent gemv products over the same weights.
std::vector<std::int64_t> matmul_values(const LayerIR& l, const Tensor& in, bool checked) {
  const int N = l.kernel[0], K = l.kernel[1];
  const int M = l.kind == LayerKind::Gemm ? l.input_shape[0] : 1;
  std::vector<std::int64_t> out(static_cast<std::size_t>(M) * N);
  for (int m = 0; m < M; ++m) {
    for (int n = 0; n < N; ++n) {
      std::int64_t acc = 0;
      for (int k = 0; k < K; ++k)
        acc += in.values[static_cast<std::size_t>(m) * K + k] * l.weights[static_cast<std::size_t>(n) * K + k];
      std::int64_t v = scale_bias(l, acc, n, checked);
      if (l.relu) v = std::max<std::int64_t>(v, 0);
      out[static_cast<std::size_t>(m) * N + n] = v;
    }
  }
  return out;
}

Tensor quantize_all(const LayerIR& l, const std::vector<std::int64_t>& values) {
  Tensor out{l.output_shape, l.prec_out, std::vector<std::int64_t>(values.size())};
  for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = oracle_quantize(values[i], l.quant_msb, l.prec_out);
  return out;
}

Tensor run_pool(const LayerIR& l, const Tensor& in) {
  const int W = l.input_shape[2], C = l.input_shape[3], P = l.pool;
  const int OH = l.output_shape[1], OW = l.output_shape[2];
  Tensor out{l.output_shape, l.prec_out, std::vector<std::int64_t>(static_cast<std::size_t>(OH) * OW * C)};
  for (int oy = 0; oy < OH; ++oy)
    for (int ox = 0; ox < OW; ++ox)
      for (int c = 0; c < C; ++c) {
        std::int64_t best = l.relu ? 0 : std::numeric_limits<std::int64_t>::min();
        for (int py = 0; py < P; ++py)
          for (int px = 0; px < P; ++px)
            best = std::max(best, in.values[(static_cast<std::size_t>(oy * P + py) * W + ox * P + px) * C + c]);
        out.values[(static_cast<std::size_t>(oy) * OW + ox) * C + c] = best;
      }
  return out;
}

}  // namespace

std::int64_t oracle_quantize(std::int64_t v, int msb, Precision out) {
  const auto u = static_cast<std::uint32_t>(static_cast<std::int32_t>(v));
  const int lsb = msb - out.bits + 1;
  const std::uint64_t mask = (std::uint64_t{1} << out.bits) - 1;
  std::int64_t q = static_cast<std::int64_t>((u >> lsb) & mask);
  if (out.is_signed && (q >> (out.bits - 1)) & 1) q -= std::int64_t{1} << out.bits;
  return q;
}

std::vector<Tensor> oracle_infer(const ModelIR& model, const Tensor& input) {
  if (model.layers.empty()) fail(ErrorCode::SchemaError, "model has no layers");
  const LayerIR& first = model.layers.front();
  if (input.shape != first.input_shape) fail(ErrorCode::ShapeMismatch, "input shape differs from the model input");
  if (input.precision != first.prec_a) fail(ErrorCode::PrecisionMismatch, "input precision differs from the model input");
  check_range(input);
  std::vector<Tensor> outs;
  const Tensor* cur = &input;
  for (const LayerIR& l : model.layers) {
    switch (l.kind) {
      case LayerKind::Conv2d: outs.push_back(quantize_all(l, conv_values(l, *cur, true))); break;
      case LayerKind::Gemm:
      case LayerKind::Gemv: outs.push_back(quantize_all(l, matmul_values(l, *cur, true))); break;
      case LayerKind::MaxPool:
      case LayerKind::Relu: outs.push_back(run_pool(l, *cur)); break;
    }
    cur = &outs.back();
  }
  return outs;
}

Tensor random_input(const ModelIR& model, std::uint64_t seed) {
  const LayerIR& first = model.layers.at(0);
  Tensor t{first.input_shape, first.prec_a, {}};
  t.values.resize(t.size());
  SplitMix64 rng(seed);
  for (auto& v : t.values) v = rng.uniform(first.prec_a.min(), first.prec_a.max());
  return t;
}

namespace {

double bit_entropy(const std::vector<std::int64_t>& values, int bit) {
  std::size_t ones = 0;
  for (auto v : values) ones += (static_cast<std::uint32_t>(static_cast<std::int32_t>(v)) >> bit) & 1;
  const double p = values.empty() ? 0 : static_cast<double>(ones) / static_cast<double>(values.size());
  return p <= 0 || p >= 1 ? 0 : -p * std::log2(p) - (1 - p) * std::log2(1 - p);
}

// The highest bit that is close to balanced for every calibration input.
int one_bit_window(const std::vector<std::vector<std::int64_t>>& runs) {
  int best = 0;
  double best_h = -1;
  for (int msb = 31; msb >= 0; --msb) {
    double h = 1;
    for (const auto& values : runs) h = std::min(h, bit_entropy(values, msb));
    if (h >= 0.8) return msb;
    if (h > best_h) {
      best = msb;
      best_h = h;
    }
  }
  return best;
}

// Lowest window that holds all but 1% of the values (only the upper side
// counts for unsigned outputs).
int wide_window(const std::vector<std::vector<std::int64_t>>& runs, Precision out) {
  std::vector<std::int64_t> mags;
  for (const auto& values : runs) {
    for (auto v : values) {
      if (out.is_signed) {
        mags.push_back(v < 0 ? -v - 1 : v);
      } else if (v > 0) {
        mags.push_back(v);
      }
    }
  }
  if (mags.empty()) return out.bits - 1;
  const std::size_t keep = std::min(mags.size() - 1, static_cast<std::size_t>(0.99 * static_cast<double>(mags.size())));
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(keep), mags.end());
  const std::int64_t top = mags[keep];
  int width = 0;  // bits needed for magnitude `top`
  while (width < 32 && (std::int64_t{1} << width) <= top) ++width;
  return std::clamp(out.is_signed ? width : width - 1, out.bits - 1, 31);
}

double window_entropy(const std::vector<std::int64_t>& values, int msb, Precision out) {
  std::map<std::int64_t, std::size_t> counts;
  for (auto v : values) ++counts[oracle_quantize(v, msb, out)];
  double h = 0;
  for (const auto& [q, n] : counts) {
    const double p = static_cast<double>(n) / static_cast<double>(values.size());
    h -= p * std::log2(p);
  }
  return h;
}

// Values far from zero relative to their spread collapse to one level in
// the 99% window; lower windows then wrap but still separate them.
int multi_bit_window(const std::vector<std::vector<std::int64_t>>& runs, Precision out) {
  const int wide = wide_window(runs, out);
  auto min_entropy = [&](int msb) {
    double h = 1e9;
    for (const auto& values : runs) h = std::min(h, window_entropy(values, msb, out));
    return h;
  };
  if (min_entropy(wide) >= 0.5) return wide;
  for (int msb = wide - 1; msb >= out.bits - 1; --msb) {
    if (min_entropy(msb) >= 1.0) return msb;
  }
  return wide;
}

}  // namespace

void calibrate_windows(ModelIR& model, std::uint64_t seed) {
  constexpr int kInputs = 4;
  const bool any_auto = std::any_of(model.layers.begin(), model.layers.end(), [](const LayerIR& l) {
    return l.quant_auto && l.kind != LayerKind::MaxPool && l.kind != LayerKind::Relu;
  });
  if (!any_auto) return;
  std::vector<Tensor> cur;
  for (int i = 0; i < kInputs; ++i) cur.push_back(random_input(model, seed + static_cast<std::uint64_t>(i)));
  for (LayerIR& l : model.layers) {
    if (l.kind == LayerKind::MaxPool || l.kind == LayerKind::Relu) {
      l.quant_msb = l.prec_a.bits - 1;
      for (auto& t : cur) t = run_pool(l, t);
      continue;
    }
    std::vector<std::vector<std::int64_t>> runs(kInputs);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < kInputs; ++i) {
      runs[static_cast<std::size_t>(i)] = l.kind == LayerKind::Conv2d ? conv_values(l, cur[static_cast<std::size_t>(i)], false)
                                                                      : matmul_values(l, cur[static_cast<std::size_t>(i)], false);
    }
    if (l.quant_auto) l.quant_msb = l.prec_out.bits == 1 ? one_bit_window(runs) : multi_bit_window(runs, l.prec_out);
    for (int i = 0; i < kInputs; ++i) cur[static_cast<std::size_t>(i)] = quantize_all(l, runs[static_cast<std::size_t>(i)]);
  }
}

}  // namespace mvusim
