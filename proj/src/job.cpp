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

#include "mvusim/job.hpp"

#include <string>

#include <nlohmann/json.hpp>

#include "mvusim/error.hpp"

namespace mvusim {

int AguConfig::active_levels() const {
  int n = 0;
  while (n < kAguLevels && counts[static_cast<std::size_t>(n)] != 0) ++n;
  return n;
}

std::uint64_t AguConfig::length() const {
  const int n = active_levels();
  if (n == 0) return 0;
  std::uint64_t len = 1;
  for (int l = 0; l < n; ++l) len *= counts[static_cast<std::size_t>(l)];
  return len;
}

std::vector<std::uint32_t> agu_sequence(const AguConfig& cfg, std::size_t depth) {
  const int levels = cfg.active_levels();
  for (int l = levels; l < kAguLevels; ++l) {
    if (cfg.counts[static_cast<std::size_t>(l)] != 0) {
      fail(ErrorCode::BadJob, "AGU loop levels must be contiguous from the innermost level");
    }
  }
  if (levels == 0) fail(ErrorCode::BadJob, "AGU needs at least one active loop");

  std::vector<std::uint32_t> out;
  out.reserve(cfg.length());
  std::array<std::uint32_t, kAguLevels> idx{};
  std::int64_t addr = cfg.base;
  const std::uint64_t total = cfg.length();
  for (std::uint64_t step = 0; step < total; ++step) {
    if (addr < 0 || static_cast<std::uint64_t>(addr) >= depth) {
      fail(ErrorCode::AddressOutOfRange,
           "AGU address " + std::to_string(addr) + " outside depth " + std::to_string(depth));
    }
    out.push_back(static_cast<std::uint32_t>(addr));
    for (int l = 0; l < levels; ++l) {
      const auto ul = static_cast<std::size_t>(l);
      if (idx[ul] + 1 < cfg.counts[ul]) {
        ++idx[ul];
        addr += cfg.jumps[ul];
        break;
      }
      idx[ul] = 0;
    }
  }
  return out;
}

AguConfig agu_from_strides(std::uint32_t base, std::span<const std::uint32_t> counts,
                           std::span<const std::int64_t> strides) {
  if (counts.size() != strides.size() || counts.empty() ||
      counts.size() > static_cast<std::size_t>(kAguLevels)) {
    fail(ErrorCode::BadJob, "loop nest needs 1..5 levels with one stride each");
  }
  AguConfig cfg;
  cfg.base = base;
  std::int64_t inner_span = 0;  // offset of the last inner address from the iteration start
  for (std::size_t l = 0; l < counts.size(); ++l) {
    if (counts[l] == 0) fail(ErrorCode::BadJob, "loop count must be positive");
    const std::int64_t jump = strides[l] - inner_span;
    if (jump < INT32_MIN || jump > INT32_MAX) fail(ErrorCode::BadJob, "AGU jump overflows 32 bits");
    cfg.counts[l] = counts[l];
    cfg.jumps[l] = static_cast<std::int32_t>(jump);
    inner_span += static_cast<std::int64_t>(counts[l] - 1) * strides[l];
  }
  return cfg;
}

JobShape validate_job(const JobDescriptor& job) {
  Precision::make(job.act_prec.bits, job.act_prec.is_signed);
  Precision::make(job.weight_prec.bits, job.weight_prec.is_signed);

  JobShape shape;
  shape.bit_pairs = static_cast<std::uint64_t>(job.act_prec.bits) *
                    static_cast<std::uint64_t>(job.weight_prec.bits);
  const std::uint64_t steps = job.act_agu.length();
  if (steps == 0 || job.weight_agu.length() != steps) {
    fail(ErrorCode::BadJob, "activation and weight AGUs must walk the same number of steps");
  }
  const int levels = job.act_agu.active_levels();
  if (job.reduce_depth < 1 || static_cast<int>(job.reduce_depth) > levels) {
    fail(ErrorCode::BadJob, "reduce depth must select 1..active levels");
  }
  std::uint64_t reduce = 1;
  for (std::uint32_t l = 0; l < job.reduce_depth; ++l) reduce *= job.act_agu.counts[l];
  shape.reduce_length = reduce;
  shape.mvp_tiles = steps / reduce;

  if (job.countdown != shape.bit_pairs * steps) {
    fail(ErrorCode::BadJob, "countdown " + std::to_string(job.countdown) +
                                " != b_a*b_w*loop product " +
                                std::to_string(shape.bit_pairs * steps));
  }

  // Consecutive reduction steps must not overlap each other's bit planes.
  auto check_stride = [](const AguConfig& agu, int bits, const char* what) {
    if (agu.counts[0] > 1) {
      const std::int64_t jump = agu.jumps[0];
      if ((jump < 0 ? -jump : jump) < bits) {
        fail(ErrorCode::PrecisionMismatch, std::string(what) + " AGU stride " +
                                               std::to_string(jump) + " overlaps " +
                                               std::to_string(bits) + " bit planes");
      }
    }
  };
  check_stride(job.act_agu, job.act_prec.bits, "activation");
  check_stride(job.weight_agu, job.weight_prec.bits, "weight");

  if (job.pool_window < 1 || shape.mvp_tiles % job.pool_window != 0) {
    fail(ErrorCode::BadWindow, "pool window does not divide the MVP output stream");
  }
  shape.output_tiles = shape.mvp_tiles / job.pool_window;

  if (job.scaler_enable) {
    if (job.scaler_agu.length() != shape.mvp_tiles || job.bias_agu.length() != shape.mvp_tiles) {
      fail(ErrorCode::BadJob, "scaler/bias AGUs must produce one address per MVP output");
    }
  }
  if (job.output_agu.length() != shape.output_tiles) {
    fail(ErrorCode::BadJob, "output AGU must produce one address per pooled output");
  }
  if (job.quant_msb > 31 || job.quant_bits < 1 || job.quant_bits > 32 ||
      job.quant_bits > job.quant_msb + 1) {
    fail(ErrorCode::BadQuantWindow, "quantizer window msb=" + std::to_string(job.quant_msb) +
                                        " bits=" + std::to_string(job.quant_bits));
  }
  if (job.dest_mask == 0) fail(ErrorCode::BadJob, "destination mask must be nonzero");
  return shape;
}

void to_json(nlohmann::json& j, const AguConfig& cfg) {
  j = nlohmann::json{{"base", cfg.base}, {"counts", cfg.counts}, {"jumps", cfg.jumps}};
}

void from_json(const nlohmann::json& j, AguConfig& cfg) {
  cfg.base = j.at("base").get<std::uint32_t>();
  cfg.counts = j.at("counts").get<std::array<std::uint32_t, kAguLevels>>();
  cfg.jumps = j.at("jumps").get<std::array<std::int32_t, kAguLevels>>();
}

namespace {

nlohmann::json precision_json(const Precision& p) {
  return {{"bits", p.bits}, {"signed", p.is_signed}};
}

Precision precision_from(const nlohmann::json& j) {
  return Precision::make(j.at("bits").get<int>(), j.at("signed").get<bool>());
}

}  // namespace

void to_json(nlohmann::json& j, const JobDescriptor& job) {
  j = nlohmann::json{{"act_prec", precision_json(job.act_prec)},
                     {"weight_prec", precision_json(job.weight_prec)},
                     {"act_agu", job.act_agu},
                     {"weight_agu", job.weight_agu},
                     {"scaler_agu", job.scaler_agu},
                     {"bias_agu", job.bias_agu},
                     {"output_agu", job.output_agu},
                     {"countdown", job.countdown},
                     {"reduce_depth", job.reduce_depth},
                     {"scaler_enable", job.scaler_enable},
                     {"relu_enable", job.relu_enable},
                     {"pool_window", job.pool_window},
                     {"quant_msb", job.quant_msb},
                     {"quant_bits", job.quant_bits},
                     {"dest_mask", job.dest_mask},
                     {"dest_base", job.dest_base}};
}

void from_json(const nlohmann::json& j, JobDescriptor& job) {
  job.act_prec = precision_from(j.at("act_prec"));
  job.weight_prec = precision_from(j.at("weight_prec"));
  job.act_agu = j.at("act_agu").get<AguConfig>();
  job.weight_agu = j.at("weight_agu").get<AguConfig>();
  job.scaler_agu = j.at("scaler_agu").get<AguConfig>();
  job.bias_agu = j.at("bias_agu").get<AguConfig>();
  job.output_agu = j.at("output_agu").get<AguConfig>();
  job.countdown = j.at("countdown").get<std::uint32_t>();
  job.reduce_depth = j.at("reduce_depth").get<std::uint32_t>();
  job.scaler_enable = j.at("scaler_enable").get<bool>();
  job.relu_enable = j.at("relu_enable").get<bool>();
  job.pool_window = j.at("pool_window").get<std::uint32_t>();
  job.quant_msb = j.at("quant_msb").get<std::uint32_t>();
  job.quant_bits = j.at("quant_bits").get<std::uint32_t>();
  job.dest_mask = j.at("dest_mask").get<std::uint8_t>();
  job.dest_base = j.at("dest_base").get<std::uint32_t>();
}

}  // namespace mvusim
