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

#include "mvusim/codegen.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mvusim/assembler.hpp"
#include "mvusim/csr_map.hpp"
#include "mvusim/error.hpp"

namespace mvusim {

using nlohmann::json;

std::string_view to_string(Mode mode) {
  return mode == Mode::Pipelined ? "pipelined" : "distributed";
}

Mode parse_mode(std::string_view text) {
  if (text == "pipelined") return Mode::Pipelined;
  if (text == "distributed") return Mode::Distributed;
  fail(ErrorCode::SchemaError, "unknown mode '" + std::string(text) + "'");
}

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

std::uint8_t bit(int mvu) { return static_cast<std::uint8_t>(1u << mvu); }

bool interior_row(const ConvView& v, int r) {
  const int top = r * v.stride - v.pad;
  return top >= 0 && top + v.kh <= v.in_h;
}

// Unpadded input rows read by conv rows [r0, r1], clipped to the map.
std::pair<int, int> input_rows(const ConvView& v, int r0, int r1) {
  const int lo = std::max(0, r0 * v.stride - v.pad);
  const int hi = std::min(v.in_h - 1, r1 * v.stride + v.kh - 1 - v.pad);
  return {lo, hi};
}

std::uint32_t checked_u32(std::uint64_t v, const std::string& what) {
  if (v > UINT32_MAX) fail(ErrorCode::UnsupportedShape, what + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

// ---- tiling and weight layout ---------------------------------------------

std::size_t TilePlan::rows() const {
  return static_cast<std::size_t>(out_sets) * kh * kw * in_blocks * weight_bits;
}

std::size_t TilePlan::row_index(int out_set, int fh, int fw, int block, int plane) const {
  return ((((static_cast<std::size_t>(out_set) * kh + fh) * kw + fw) * in_blocks + block) * weight_bits) + plane;
}

TilePlan tile_and_pad(const LayerIR& layer) {
  const ConvView v = conv_view(layer);
  if (v.kh > v.in_h + 2 * v.pad || v.kw > v.in_w + 2 * v.pad) {
    fail(ErrorCode::UnsupportedShape, layer.name + ": kernel larger than the padded input");
  }
  TilePlan p;
  p.in_c = v.in_c;
  p.out_c = v.out_c;
  p.kh = v.kh;
  p.kw = v.kw;
  p.in_blocks = ceil_div(v.in_c, kLanes);
  p.out_sets = ceil_div(v.out_c, kLanes);
  p.weight_bits = v.weight.bits;
  return p;
}

std::vector<std::uint64_t> export_weights(const LayerIR& layer, const TilePlan& plan) {
  const ConvView v = conv_view(layer);
  std::vector<std::uint64_t> image(plan.rows() * kWordsPerWeightRow, 0);
  const int bits = plan.weight_bits;
  for (int o = 0; o < v.out_c; ++o) {
    for (int fh = 0; fh < v.kh; ++fh) {
      for (int fw = 0; fw < v.kw; ++fw) {
        for (int c = 0; c < v.in_c; ++c) {
          const std::int64_t w = v.weights[((static_cast<std::size_t>(o) * v.kh + fh) * v.kw + fw) * v.in_c + c];
          if (!v.weight.contains(w)) {
            fail(ErrorCode::OutOfRange, layer.name + ": weight " + std::to_string(w) + " outside " +
                                            std::to_string(bits) + "-bit range");
          }
          const auto u = static_cast<std::uint64_t>(w);
          for (int p = 0; p < bits; ++p) {
            if ((u >> (bits - 1 - p)) & 1u) {
              const std::size_t row = plan.row_index(o / kLanes, fh, fw, c / kLanes, p);
              image[row * kWordsPerWeightRow + static_cast<std::size_t>(o % kLanes)] |= std::uint64_t{1} << (c % kLanes);
            }
          }
        }
      }
    }
  }
  return image;
}

std::vector<std::int64_t> import_weights(std::span<const std::uint64_t> image, const LayerIR& layer,
                                         const TilePlan& plan) {
  if (image.size() != plan.rows() * kWordsPerWeightRow) {
    fail(ErrorCode::MalformedTensor, layer.name + ": weight image has " + std::to_string(image.size()) +
                                         " words, expected " + std::to_string(plan.rows() * kWordsPerWeightRow));
  }
  const int bits = plan.weight_bits;
  const bool sign = conv_view(layer).weight.is_signed;
  const auto kh = static_cast<std::size_t>(plan.kh), kw = static_cast<std::size_t>(plan.kw);
  const auto ic = static_cast<std::size_t>(plan.in_c);
  std::vector<std::int64_t> view(static_cast<std::size_t>(plan.out_c) * kh * kw * ic);
  for (int o = 0; o < plan.out_c; ++o) {
    for (int fh = 0; fh < plan.kh; ++fh) {
      for (int fw = 0; fw < plan.kw; ++fw) {
        for (int c = 0; c < plan.in_c; ++c) {
          std::uint64_t u = 0;
          for (int p = 0; p < bits; ++p) {
            const std::size_t row = plan.row_index(o / kLanes, fh, fw, c / kLanes, p);
            u = (u << 1) | ((image[row * kWordsPerWeightRow + static_cast<std::size_t>(o % kLanes)] >> (c % kLanes)) & 1u);
          }
          auto w = static_cast<std::int64_t>(u);
          if (sign && (u >> (bits - 1)) & 1u) w -= std::int64_t{1} << bits;
          view[((static_cast<std::size_t>(o) * kh + fh) * kw + fw) * ic + c] = w;
        }
      }
    }
  }
  if (layer.kind == LayerKind::Conv2d) {
    std::vector<std::int64_t> out(view.size());
    for (std::size_t o = 0; o < static_cast<std::size_t>(plan.out_c); ++o)
      for (std::size_t c = 0; c < ic; ++c)
        for (std::size_t y = 0; y < kh; ++y)
          for (std::size_t x = 0; x < kw; ++x)
            out[((o * ic + c) * kh + y) * kw + x] = view[((o * kh + y) * kw + x) * ic + c];
    return out;
  }
  return view;  // gemm/gemv [N][K] with K in (y, x, c) order; identity layers as-is
}

// ---- buffers ----------------------------------------------------------------

std::uint64_t ActBuffer::words() const {
  return static_cast<std::uint64_t>(height + 2 * pad) * static_cast<std::uint64_t>(padded_width()) *
         static_cast<std::uint64_t>(blocks) * static_cast<std::uint64_t>(precision.bits);
}

std::uint32_t ActBuffer::address(int y, int x, int block) const {
  const std::uint64_t pixel = static_cast<std::uint64_t>(y + pad) * static_cast<std::uint64_t>(padded_width()) +
                              static_cast<std::uint64_t>(x + pad);
  return base + static_cast<std::uint32_t>((pixel * static_cast<std::uint64_t>(blocks) + static_cast<std::uint64_t>(block)) *
                                           static_cast<std::uint64_t>(precision.bits));
}

// ---- lowering ---------------------------------------------------------------

std::vector<JobUnit> lower_layer(const LayerIR& layer, const LayerPlacement& place) {
  const ConvView v = conv_view(layer);
  const TilePlan plan = tile_and_pad(layer);
  const int cb = plan.in_blocks, cos = plan.out_sets;
  const int ba = v.act.bits, bw = v.weight.bits, bo = v.out.bits;
  if (place.input.blocks != cb || place.input.precision != v.act || place.input.pad != v.pad ||
      place.input.height != v.in_h || place.input.width != v.in_w) {
    fail(ErrorCode::ShapeMismatch, layer.name + ": input buffer does not match the layer");
  }
  if (place.dest.blocks != cos || place.dest.precision.bits != bo) {
    fail(ErrorCode::ShapeMismatch, layer.name + ": destination buffer does not match the layer output");
  }
  const std::int64_t s = v.stride, P = v.pool;
  const std::int64_t pixel = static_cast<std::int64_t>(cb) * ba;                       // one input pixel
  const std::int64_t rowstride = static_cast<std::int64_t>(place.input.padded_width()) * pixel;
  const std::int64_t wpos = static_cast<std::int64_t>(cb) * bw;                        // one kernel position
  const std::int64_t wset = static_cast<std::int64_t>(v.kh) * v.kw * wpos;               // one output set
  const std::int64_t dpixel = static_cast<std::int64_t>(place.dest.blocks) * bo;
  const std::uint32_t kwcb = static_cast<std::uint32_t>(v.kw * cb);

  JobDescriptor base;
  base.act_prec = v.act;
  base.weight_prec = v.weight;
  base.reduce_depth = 2;
  base.scaler_enable = true;
  base.relu_enable = v.relu;
  base.pool_window = static_cast<std::uint32_t>(P * P);
  base.quant_msb = static_cast<std::uint32_t>(v.quant_msb);
  base.quant_bits = static_cast<std::uint32_t>(bo);
  base.dest_mask = 1;

  std::vector<JobUnit> units;
  const std::uint64_t pairs = static_cast<std::uint64_t>(ba) * static_cast<std::uint64_t>(bw);
  auto finish = [&](JobUnit& u) {
    u.job.countdown = checked_u32(pairs * u.job.act_agu.length(), layer.name + " countdown");
    const int rows = u.conv_row_end - u.conv_row_begin;
    const std::uint64_t per_row = u.job.countdown / static_cast<std::uint64_t>(rows);
    for (int r = u.conv_row_begin; r < u.conv_row_end; ++r) {
      (interior_row(v, r) ? u.interior_cycles : u.edge_cycles) += per_row;
    }
    validate_job(u.job);
    units.push_back(u);
  };

  if (P == 1) {
    for (int y = 0; y < v.out_h; ++y) {
      JobUnit u;
      u.job = base;
      u.row = y;
      u.conv_row_begin = y;
      u.conv_row_end = y + 1;
      const std::array<std::uint32_t, 4> counts{kwcb, static_cast<std::uint32_t>(v.kh),
                                                static_cast<std::uint32_t>(cos), static_cast<std::uint32_t>(v.out_w)};
      const std::array<std::int64_t, 4> as{ba, rowstride, 0, s * pixel};
      const std::array<std::int64_t, 4> ws{bw, static_cast<std::int64_t>(v.kw) * wpos, wset, 0};
      u.job.act_agu = agu_from_strides(place.input.address(static_cast<int>(y * s) - v.pad, -v.pad, 0), counts, as);
      u.job.weight_agu = agu_from_strides(place.weight_base, counts, ws);
      const std::array<std::uint32_t, 2> oc{static_cast<std::uint32_t>(cos), static_cast<std::uint32_t>(v.out_w)};
      const std::array<std::int64_t, 2> ss{1, 0};
      u.job.scaler_agu = agu_from_strides(place.sb_base, oc, ss);
      u.job.bias_agu = u.job.scaler_agu;
      const std::array<std::int64_t, 2> os{bo, dpixel};
      u.job.output_agu = agu_from_strides(0, oc, os);
      u.job.dest_base = place.dest.address(y, 0, 0);
      finish(u);
    }
  } else {
    for (int yp = 0; yp < v.out_h; ++yp) {
      for (int set = 0; set < cos; ++set) {
        JobUnit u;
        u.job = base;
        u.row = yp;
        u.out_set = set;
        u.conv_row_begin = static_cast<int>(yp * P);
        u.conv_row_end = static_cast<int>((yp + 1) * P);
        const std::array<std::uint32_t, 5> counts{kwcb, static_cast<std::uint32_t>(v.kh), static_cast<std::uint32_t>(P),
                                                  static_cast<std::uint32_t>(P), static_cast<std::uint32_t>(v.out_w)};
        const std::array<std::int64_t, 5> as{ba, rowstride, s * pixel, s * rowstride, P * s * pixel};
        const std::array<std::int64_t, 5> ws{bw, static_cast<std::int64_t>(v.kw) * wpos, 0, 0, 0};
        u.job.act_agu = agu_from_strides(place.input.address(static_cast<int>(yp * P * s) - v.pad, -v.pad, 0), counts, as);
        u.job.weight_agu = agu_from_strides(place.weight_base + static_cast<std::uint32_t>(set * wset), counts, ws);
        const std::array<std::uint32_t, 1> sc{static_cast<std::uint32_t>(P * P * v.out_w)};
        const std::array<std::int64_t, 1> ss{0};
        u.job.scaler_agu = agu_from_strides(place.sb_base + static_cast<std::uint32_t>(set), sc, ss);
        u.job.bias_agu = u.job.scaler_agu;
        const std::array<std::uint32_t, 1> oc{static_cast<std::uint32_t>(v.out_w)};
        const std::array<std::int64_t, 1> os{dpixel};
        u.job.output_agu = agu_from_strides(0, oc, os);
        u.job.dest_base = place.dest.address(yp, 0, set);
        finish(u);
      }
    }
  }
  return units;
}

// ---- whole-model compilation ------------------------------------------------

namespace {

// CSRs rewritten for every job; the rest are programmed once per layer.
bool per_job_csr(std::uint16_t a) {
  return a == agu_csr(AguSlot::Activation, 0) || a == agu_csr(AguSlot::Weight, 0) ||
         a == agu_csr(AguSlot::Scaler, 0) || a == agu_csr(AguSlot::Bias, 0) || a == kCsrDestBase ||
         a == kCsrDestBase - 1;
}

std::vector<std::uint16_t> static_csrs() {
  std::vector<std::uint16_t> out;
  for (int i = 0; i < kMvuFieldCsrs; ++i) {
    const auto a = static_cast<std::uint16_t>(kMvuCsrBase + i);
    if (!per_job_csr(a)) out.push_back(a);
  }
  return out;
}

class Allocator {
 public:
  Allocator(std::uint64_t depth, const char* what) : depth_(depth), what_(what) {}

  // Same address in every MVU of the mask.
  std::uint32_t take(std::uint8_t mask, std::uint64_t size, const std::string& owner) {
    std::uint64_t base = 0;
    for (int m = 0; m < kMvuCount; ++m)
      if (mask & bit(m)) base = std::max(base, top_[static_cast<std::size_t>(m)]);
    if (base + size > depth_) {
      fail(ErrorCode::RamOverflow, owner + ": " + what_ + " RAM needs " + std::to_string(base + size) +
                                       " entries, depth is " + std::to_string(depth_));
    }
    for (int m = 0; m < kMvuCount; ++m)
      if (mask & bit(m)) top_[static_cast<std::size_t>(m)] = base + size;
    return static_cast<std::uint32_t>(base);
  }

 private:
  std::uint64_t depth_;
  std::string what_;
  std::array<std::uint64_t, kMvuCount> top_{};
};

struct HartLayer {
  int layer = 0;
  std::vector<const ScheduledJob*> jobs;
  std::uint32_t producer_addr = 0;
  std::uint32_t done_target = 0;
  std::uint32_t barrier = 0;
};

std::string generate_assembly(const CompiledProgram& prog, const std::vector<std::vector<HartLayer>>& per_hart,
                              const std::vector<JobDescriptor>& layer_cfg) {
  const std::vector<std::uint16_t> statics = static_csrs();
  std::ostringstream a;
  a << "# " << prog.model_name << " (" << to_string(prog.mode) << ", " << prog.layers.size() << " layers)\n";
  a << "# data RAM: hart h publishes jobs_done at 8h and layers_done at 8h+4\n";
  for (int h = 0; h < kMvuCount; ++h) {
    const std::string p = "h" + std::to_string(h) + "_";
    a << "\n.hart " << h << "\n"
      << "    la s0, " << p << "layers\n"
      << "    lw s1, 0(s0)\n"
      << "    addi s0, s0, 4\n"
      << "    li s11, " << 8 * h << "\n"
      << p << "layer:\n"
      << "    beqz s1, " << p << "finish\n"
      << "    lw t0, 20(s0)\n"
      << "    beqz t0, " << p << "config\n"
      << "    li t1, 4\n"
      << "    li t2, 68\n"
      << p << "barrier:\n"
      << "    lw t3, 0(t1)\n"
      << "    bltu t3, t0, " << p << "barrier\n"
      << "    addi t1, t1, 8\n"
      << "    bltu t1, t2, " << p << "barrier\n"
      << p << "config:\n"
      << "    lw a0, 0(s0)\n";
    for (std::size_t i = 0; i < statics.size(); ++i) {
      a << "    lw t0, " << 4 * i << "(a0)\n"
        << "    csrw " << *csr_name(statics[i]) << ", t0\n";
    }
    a << "    lw s2, 4(s0)\n"
      << "    lw s3, 8(s0)\n"
      << "    lw s4, 12(s0)\n"
      << p << "job:\n"
      << "    beqz s3, " << p << "drain\n"
      << "    lw t0, 20(s2)\n"
      << p << "wait:\n"
      << "    csrr t1, mvu_jobsdone\n"
      << "    sw t1, 0(s11)\n"
      << "    lw t2, 0(s4)\n"
      << "    bltu t2, t0, " << p << "wait\n"
      << "    lw t0, 0(s2)\n"
      << "    csrw mvu_abase, t0\n"
      << "    lw t0, 4(s2)\n"
      << "    csrw mvu_wbase, t0\n"
      << "    lw t0, 8(s2)\n"
      << "    csrw mvu_sbase, t0\n"
      << "    csrw mvu_bbase, t0\n"
      << "    lw t0, 12(s2)\n"
      << "    csrw mvu_dbase, t0\n"
      << "    lw t0, 16(s2)\n"
      << "    csrw mvu_dmask, t0\n"
      << "    csrwi mvu_command, 1\n"
      << "    csrr t1, mvu_jobsdone\n"
      << "    sw t1, 0(s11)\n"
      << "    addi s2, s2, 24\n"
      << "    addi s3, s3, -1\n"
      << "    j " << p << "job\n"
      << p << "drain:\n"
      << "    lw t0, 16(s0)\n"
      << p << "drain_wait:\n"
      << "    csrr t1, mvu_jobsdone\n"
      << "    sw t1, 0(s11)\n"
      << "    bltu t1, t0, " << p << "drain_wait\n"
      << "    lw t1, 4(s11)\n"
      << "    addi t1, t1, 1\n"
      << "    sw t1, 4(s11)\n"
      << "    addi s0, s0, 24\n"
      << "    addi s1, s1, -1\n"
      << "    j " << p << "layer\n"
      << p << "finish:\n"
      << "    ebreak\n";
  }

  a << "\n.data 64\n";
  for (int h = 0; h < kMvuCount; ++h) {
    const std::string p = "h" + std::to_string(h) + "_";
    const auto& list = per_hart[static_cast<std::size_t>(h)];
    a << p << "layers:\n    .word " << list.size() << "\n";
    for (const HartLayer& hl : list) {
      a << "    .word cfg" << hl.layer << ", ";
      if (hl.jobs.empty()) a << "0";
      else a << p << "jobs" << hl.layer;
      a << ", " << hl.jobs.size() << ", " << hl.producer_addr << ", " << hl.done_target << ", " << hl.barrier << "\n";
    }
  }
  for (std::size_t l = 0; l < layer_cfg.size(); ++l) {
    a << "cfg" << l << ":  # " << prog.layers[l].name << "\n";
    for (std::size_t i = 0; i < statics.size(); ++i) {
      a << (i % 8 == 0 ? "    .word " : ", ") << get_job_field(layer_cfg[l], statics[i]);
      if (i % 8 == 7 || i + 1 == statics.size()) a << "\n";
    }
  }
  for (int h = 0; h < kMvuCount; ++h) {
    for (const HartLayer& hl : per_hart[static_cast<std::size_t>(h)]) {
      if (hl.jobs.empty()) continue;
      a << "h" << h << "_jobs" << hl.layer << ":\n";
      for (const ScheduledJob* j : hl.jobs) {
        a << "    .word " << j->job.act_agu.base << ", " << j->job.weight_agu.base << ", " << j->job.scaler_agu.base
          << ", " << j->job.dest_base << ", " << static_cast<int>(j->job.dest_mask) << ", " << j->need << "\n";
      }
    }
  }
  return a.str();
}

}  // namespace

CompiledProgram compile(const ModelIR& model, Mode mode, const MvuConfig& config) {
  validate_model(model);
  if (model.layers.empty()) fail(ErrorCode::SchemaError, "model has no layers");
  const int L = static_cast<int>(model.layers.size());

  CompiledProgram prog;
  prog.mode = mode;
  prog.model_name = model.name;
  prog.clock_mhz = model.clock_mhz;
  prog.config = config;
  prog.laps = mode == Mode::Pipelined ? ceil_div(L, kMvuCount) : 1;

  std::vector<ConvView> views;
  std::vector<TilePlan> plans;
  for (const LayerIR& l : model.layers) {
    views.push_back(conv_view(l));
    plans.push_back(tile_and_pad(l));
  }
  auto mask_of = [&](int i) -> std::uint8_t { return mode == Mode::Pipelined ? bit(i % kMvuCount) : 0xFF; };

  Allocator act(config.activation_words, "activation");
  Allocator wgt(config.weight_rows, "weight");
  Allocator sb(std::min(config.scaler_rows, config.bias_rows), "scaler/bias");

  for (int i = 0; i < L; ++i) {
    const LayerIR& l = model.layers[static_cast<std::size_t>(i)];
    const ConvView& v = views[static_cast<std::size_t>(i)];
    const TilePlan& t = plans[static_cast<std::size_t>(i)];
    LayerPlan lp;
    lp.name = l.name;
    lp.kind = l.kind;
    lp.lap = mode == Mode::Pipelined ? i / kMvuCount : 0;
    lp.mvu_mask = mask_of(i);
    lp.input = ActBuffer{0, v.in_h, v.in_w, v.pad, t.in_blocks, v.act};
    lp.input.base = act.take(lp.mvu_mask, lp.input.words(), l.name);
    lp.weight_rows = static_cast<std::uint32_t>(t.rows());
    lp.weight_base = wgt.take(lp.mvu_mask, t.rows(), l.name);
    lp.sb_base = sb.take(lp.mvu_mask, static_cast<std::uint64_t>(t.out_sets), l.name);
    lp.out_sets = t.out_sets;

    const std::vector<std::uint64_t> image = export_weights(l, t);
    for (int m = 0; m < kMvuCount; ++m) {
      if (!(lp.mvu_mask & bit(m))) continue;
      auto& w = prog.weights[static_cast<std::size_t>(m)];
      w.resize(std::max<std::size_t>(w.size(), (lp.weight_base + t.rows()) * kWordsPerWeightRow), 0);
      std::copy(image.begin(), image.end(), w.begin() + static_cast<std::ptrdiff_t>(lp.weight_base * kWordsPerWeightRow));
      auto& sc = prog.scalers[static_cast<std::size_t>(m)];
      auto& bi = prog.biases[static_cast<std::size_t>(m)];
      const std::size_t end = (lp.sb_base + static_cast<std::size_t>(t.out_sets)) * kLanes;
      sc.resize(std::max(sc.size(), end), 0);
      bi.resize(std::max(bi.size(), end), 0);
      for (int o = 0; o < v.out_c; ++o) {
        sc[lp.sb_base * kLanes + static_cast<std::size_t>(o)] = v.scale[static_cast<std::size_t>(o)];
        bi[lp.sb_base * kLanes + static_cast<std::size_t>(o)] = v.bias[static_cast<std::size_t>(o)];
      }
    }
    prog.layers.push_back(lp);
  }

  const ConvView& last = views.back();
  prog.input_shape = model.layers.front().input_shape;
  prog.input_mask = mask_of(0);
  prog.output_shape = model.layers.back().output_shape;
  prog.output_channels = last.out_c;
  const std::uint8_t out_mask = mask_of(L - 1);
  prog.output = ActBuffer{0, last.out_h, last.out_w, 0, plans.back().out_sets, last.out};
  prog.output.base = act.take(out_mask, prog.output.words(), "output");

  // Row ownership: balanced contiguous split in distributed mode.
  auto owner = [&](int layer, int row) {
    if (mode == Mode::Pipelined) return layer % kMvuCount;
    const int rows = views[static_cast<std::size_t>(layer)].out_h;
    const int q = rows / kMvuCount, r = rows % kMvuCount;
    for (int h = 0; h < kMvuCount; ++h) {
      const int start = h * q + std::min(h, r);
      const int len = q + (h < r ? 1 : 0);
      if (row >= start && row < start + len) return h;
    }
    return kMvuCount - 1;
  };
  // Input rows each hart needs for a layer (distributed halo routing).
  auto needed_rows = [&](int layer, int hart) -> std::pair<int, int> {
    const ConvView& v = views[static_cast<std::size_t>(layer)];
    int r0 = -1, r1 = -1;
    for (int y = 0; y < v.out_h; ++y) {
      if (owner(layer, y) != hart) continue;
      if (r0 < 0) r0 = y;
      r1 = y;
    }
    if (r0 < 0) return {1, 0};
    return input_rows(v, r0 * v.pool, r1 * v.pool + v.pool - 1);
  };

  std::array<int, kMvuCount> seq{};
  std::vector<std::array<int, kMvuCount>> jobs_before(static_cast<std::size_t>(L));  // per layer, per MVU
  std::vector<std::vector<JobUnit>> units(static_cast<std::size_t>(L));
  for (int i = 0; i < L; ++i) {
    const LayerPlan& lp = prog.layers[static_cast<std::size_t>(i)];
    LayerPlacement place;
    place.input = lp.input;
    place.dest = i + 1 < L ? prog.layers[static_cast<std::size_t>(i + 1)].input : prog.output;
    place.weight_base = lp.weight_base;
    place.sb_base = lp.sb_base;
    units[static_cast<std::size_t>(i)] = lower_layer(model.layers[static_cast<std::size_t>(i)], place);
  }

  for (int i = 0; i < L; ++i) {
    jobs_before[static_cast<std::size_t>(i)] = seq;
    const ConvView& v = views[static_cast<std::size_t>(i)];
    for (JobUnit& u : units[static_cast<std::size_t>(i)]) {
      ScheduledJob sj;
      sj.layer = i;
      sj.row = u.row;
      sj.mvu = owner(i, u.row);
      sj.seq = seq[static_cast<std::size_t>(sj.mvu)]++;
      sj.job = u.job;
      sj.interior_cycles = u.interior_cycles;
      sj.edge_cycles = u.edge_cycles;
      if (i == L - 1) {
        sj.job.dest_mask = bit(sj.mvu);
      } else if (mode == Mode::Pipelined) {
        sj.job.dest_mask = bit((i + 1) % kMvuCount);
      } else {
        std::uint8_t mask = 0;
        for (int h = 0; h < kMvuCount; ++h) {
          const auto [lo, hi] = needed_rows(i + 1, h);
          if (u.row >= lo && u.row <= hi) mask |= bit(h);
        }
        sj.job.dest_mask = mask ? mask : bit(sj.mvu);
      }
      if (mode == Mode::Pipelined && i > 0) {
        const auto [lo, hi] = input_rows(v, u.conv_row_begin, u.conv_row_end - 1);
        if (hi >= lo) {
          const int prev = i - 1;
          const int per_row = views[static_cast<std::size_t>(prev)].pool > 1 ? plans[static_cast<std::size_t>(prev)].out_sets : 1;
          sj.need = static_cast<std::uint32_t>(jobs_before[static_cast<std::size_t>(prev)][static_cast<std::size_t>(prev % kMvuCount)] +
                                               (hi + 1) * per_row);
        }
      }
      prog.schedule.push_back(sj);
    }
  }

  prog.output_row_mvu.resize(static_cast<std::size_t>(last.out_h));
  for (int y = 0; y < last.out_h; ++y) prog.output_row_mvu[static_cast<std::size_t>(y)] = owner(L - 1, y);

  // Per-hart layer lists for the controller program.
  std::vector<std::vector<HartLayer>> per_hart(kMvuCount);
  std::array<std::uint32_t, kMvuCount> done{};
  for (int i = 0; i < L; ++i) {
    for (int h = 0; h < kMvuCount; ++h) {
      if (!(prog.layers[static_cast<std::size_t>(i)].mvu_mask & bit(h))) continue;
      HartLayer hl;
      hl.layer = i;
      for (const ScheduledJob& sj : prog.schedule)
        if (sj.layer == i && sj.mvu == h) hl.jobs.push_back(&sj);
      done[static_cast<std::size_t>(h)] += static_cast<std::uint32_t>(hl.jobs.size());
      hl.done_target = done[static_cast<std::size_t>(h)];
      hl.producer_addr = static_cast<std::uint32_t>(8 * h);
      if (mode == Mode::Pipelined && i > 0) hl.producer_addr = static_cast<std::uint32_t>(8 * ((i - 1) % kMvuCount));
      hl.barrier = mode == Mode::Distributed ? static_cast<std::uint32_t>(i) : 0;
      per_hart[static_cast<std::size_t>(h)].push_back(std::move(hl));
    }
  }
  std::vector<JobDescriptor> layer_cfg;
  for (int i = 0; i < L; ++i) layer_cfg.push_back(units[static_cast<std::size_t>(i)].front().job);
  prog.assembly = generate_assembly(prog, per_hart, layer_cfg);
  assemble(prog.assembly);  // size and encoding checks
  return prog;
}

// ---- directory form -----------------------------------------------------------

namespace {

template <typename T>
void write_binary(const std::filesystem::path& p, const std::vector<T>& values) {
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + p.string());
  for (T v : values) {
    auto u = static_cast<std::make_unsigned_t<T>>(v);
    for (std::size_t b = 0; b < sizeof(T); ++b) out.put(static_cast<char>((u >> (8 * b)) & 0xFF));
  }
  if (!out) fail(ErrorCode::IoError, "write failed for " + p.string());
}

template <typename T>
std::vector<T> read_binary(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + p.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % sizeof(T) != 0) fail(ErrorCode::MalformedTensor, p.string() + " is truncated");
  std::vector<T> out(bytes.size() / sizeof(T));
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::make_unsigned_t<T> u = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b)
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes[i * sizeof(T) + b])) << (8 * b);
    out[i] = static_cast<T>(u);
  }
  return out;
}

json buffer_json(const ActBuffer& b) {
  return {{"base", b.base}, {"height", b.height}, {"width", b.width}, {"pad", b.pad}, {"blocks", b.blocks},
          {"bits", b.precision.bits}, {"signed", b.precision.is_signed}};
}

ActBuffer buffer_from(const json& j) {
  ActBuffer b;
  b.base = j.at("base").get<std::uint32_t>();
  b.height = j.at("height").get<int>();
  b.width = j.at("width").get<int>();
  b.pad = j.at("pad").get<int>();
  b.blocks = j.at("blocks").get<int>();
  b.precision = Precision::make(j.at("bits").get<int>(), j.at("signed").get<bool>());
  return b;
}

LayerKind kind_from(const std::string& s) {
  for (LayerKind k : {LayerKind::Conv2d, LayerKind::Gemm, LayerKind::Gemv, LayerKind::MaxPool, LayerKind::Relu})
    if (to_string(k) == s) return k;
  fail(ErrorCode::SchemaError, "unknown layer kind '" + s + "'");
}

}  // namespace

void write_program(const CompiledProgram& prog, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  for (int m = 0; m < kMvuCount; ++m) {
    const auto i = static_cast<std::size_t>(m);
    write_binary(dir / ("weights_mvu" + std::to_string(m) + ".bin"), prog.weights[i]);
    write_binary(dir / ("scaler_mvu" + std::to_string(m) + ".bin"), prog.scalers[i]);
    write_binary(dir / ("bias_mvu" + std::to_string(m) + ".bin"), prog.biases[i]);
  }
  {
    std::ofstream out(dir / "program.asm");
    if (!out) fail(ErrorCode::IoError, "cannot write program.asm");
    out << prog.assembly;
  }

  json sched = json::array();
  for (const ScheduledJob& s : prog.schedule) {
    sched.push_back({{"layer", s.layer}, {"mvu", s.mvu}, {"seq", s.seq}, {"row", s.row}, {"need", s.need},
                     {"interior_cycles", s.interior_cycles}, {"edge_cycles", s.edge_cycles}, {"job", s.job}});
  }
  json layers = json::array();
  for (const LayerPlan& l : prog.layers) {
    layers.push_back({{"name", l.name}, {"kind", std::string(to_string(l.kind))}, {"lap", l.lap},
                      {"mvu_mask", l.mvu_mask}, {"input", buffer_json(l.input)}, {"weight_base", l.weight_base},
                      {"weight_rows", l.weight_rows}, {"sb_base", l.sb_base}, {"out_sets", l.out_sets}});
  }
  json manifest{{"format", "mvusim-program"},
                {"version", 1},
                {"model", prog.model_name},
                {"mode", std::string(to_string(prog.mode))},
                {"clock_mhz", prog.clock_mhz},
                {"laps", prog.laps},
                {"ram", {{"activation_words", prog.config.activation_words},
                         {"weight_rows", prog.config.weight_rows},
                         {"scaler_rows", prog.config.scaler_rows},
                         {"bias_rows", prog.config.bias_rows}}},
                {"layers", layers},
                {"input", {{"shape", prog.input_shape}, {"mvu_mask", prog.input_mask}}},
                {"output", {{"shape", prog.output_shape}, {"channels", prog.output_channels},
                            {"buffer", buffer_json(prog.output)}, {"row_mvu", prog.output_row_mvu}}}};
  std::ofstream(dir / "schedule.json") << sched.dump(1) << '\n';
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

CompiledProgram read_program(const std::filesystem::path& dir) {
  auto read_json = [&](const char* name) {
    std::ifstream in(dir / name);
    if (!in) fail(ErrorCode::IoError, "cannot read " + (dir / name).string());
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorCode::SchemaError, std::string(name) + ": " + e.what());
    }
  };
  CompiledProgram prog;
  try {
    const json m = read_json("manifest.json");
    if (m.value("format", "") != "mvusim-program") fail(ErrorCode::SchemaError, "not a compiled program directory");
    prog.model_name = m.at("model").get<std::string>();
    prog.mode = parse_mode(m.at("mode").get<std::string>());
    prog.clock_mhz = m.at("clock_mhz").get<double>();
    prog.laps = m.at("laps").get<int>();
    const json& ram = m.at("ram");
    prog.config.activation_words = ram.at("activation_words").get<std::size_t>();
    prog.config.weight_rows = ram.at("weight_rows").get<std::size_t>();
    prog.config.scaler_rows = ram.at("scaler_rows").get<std::size_t>();
    prog.config.bias_rows = ram.at("bias_rows").get<std::size_t>();
    for (const json& l : m.at("layers")) {
      LayerPlan lp;
      lp.name = l.at("name").get<std::string>();
      lp.kind = kind_from(l.at("kind").get<std::string>());
      lp.lap = l.at("lap").get<int>();
      lp.mvu_mask = l.at("mvu_mask").get<std::uint8_t>();
      lp.input = buffer_from(l.at("input"));
      lp.weight_base = l.at("weight_base").get<std::uint32_t>();
      lp.weight_rows = l.at("weight_rows").get<std::uint32_t>();
      lp.sb_base = l.at("sb_base").get<std::uint32_t>();
      lp.out_sets = l.at("out_sets").get<int>();
      prog.layers.push_back(lp);
    }
    prog.input_shape = m.at("input").at("shape").get<std::vector<int>>();
    prog.input_mask = m.at("input").at("mvu_mask").get<std::uint8_t>();
    const json& o = m.at("output");
    prog.output_shape = o.at("shape").get<std::vector<int>>();
    prog.output_channels = o.at("channels").get<int>();
    prog.output = buffer_from(o.at("buffer"));
    prog.output_row_mvu = o.at("row_mvu").get<std::vector<int>>();

    for (const json& s : read_json("schedule.json")) {
      ScheduledJob sj;
      sj.layer = s.at("layer").get<int>();
      sj.mvu = s.at("mvu").get<int>();
      sj.seq = s.at("seq").get<int>();
      sj.row = s.at("row").get<int>();
      sj.need = s.at("need").get<std::uint32_t>();
      sj.interior_cycles = s.at("interior_cycles").get<std::uint64_t>();
      sj.edge_cycles = s.at("edge_cycles").get<std::uint64_t>();
      sj.job = s.at("job").get<JobDescriptor>();
      prog.schedule.push_back(sj);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaError, std::string("compiled program: ") + e.what());
  }
  {
    std::ifstream in(dir / "program.asm");
    if (!in) fail(ErrorCode::IoError, "cannot read program.asm");
    std::ostringstream ss;
    ss << in.rdbuf();
    prog.assembly = ss.str();
  }
  for (int m = 0; m < kMvuCount; ++m) {
    const auto i = static_cast<std::size_t>(m);
    prog.weights[i] = read_binary<std::uint64_t>(dir / ("weights_mvu" + std::to_string(m) + ".bin"));
    prog.scalers[i] = read_binary<std::uint16_t>(dir / ("scaler_mvu" + std::to_string(m) + ".bin"));
    prog.biases[i] = read_binary<std::int32_t>(dir / ("bias_mvu" + std::to_string(m) + ".bin"));
  }
  return prog;
}

}  // namespace mvusim
