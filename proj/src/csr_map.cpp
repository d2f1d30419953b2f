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

#include "mvusim/csr_map.hpp"

#include <array>
#include <string>
#include <vector>

#include "mvusim/error.hpp"

namespace mvusim {

namespace {

constexpr std::array<CsrInfo, 10> kStandard{{
    {kCsrMstatus, "mstatus", false},
    {kCsrMie, "mie", false},
    {kCsrMtvec, "mtvec", false},
    {kCsrMscratch, "mscratch", false},
    {kCsrMepc, "mepc", false},
    {kCsrMcause, "mcause", false},
    {kCsrMip, "mip", true},
    {kCsrMcycle, "mcycle", true},
    {kCsrMinstret, "minstret", true},
    {kCsrMhartid, "mhartid", true},
}};

struct NameStore {
  std::vector<std::string> names;
  std::vector<CsrInfo> table;

  NameStore() {
    names.reserve(kMvuCsrCount);
    auto add = [&](std::string n) { names.push_back(std::move(n)); };
    add("mvu_abits");
    add("mvu_asigned");
    add("mvu_wbits");
    add("mvu_wsigned");
    for (const char* agu : {"a", "w", "s", "b", "o"}) {
      add(std::string("mvu_") + agu + "base");
      for (int l = 0; l < kAguLevels; ++l) add(std::string("mvu_") + agu + "cnt" + std::to_string(l));
      for (int l = 0; l < kAguLevels; ++l) add(std::string("mvu_") + agu + "jmp" + std::to_string(l));
    }
    for (const char* n : {"mvu_countdown", "mvu_reduce", "mvu_scaler_en", "mvu_relu_en",
                          "mvu_pool", "mvu_qmsb", "mvu_qbits", "mvu_dmask", "mvu_dbase",
                          "mvu_command", "mvu_status", "mvu_busy", "mvu_jobcycles",
                          "mvu_jobsdone", "mvu_reserved"}) {
      add(n);
    }
    table.reserve(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto addr = static_cast<std::uint16_t>(kMvuCsrBase + i);
      const bool ro = addr == kCsrBusy || addr == kCsrJobCycles || addr == kCsrJobsDone ||
                      addr == kCsrReserved;
      table.push_back({addr, names[i], ro});
    }
  }
};

const NameStore& store() {
  static const NameStore s;
  return s;
}

AguConfig& agu_ref(JobDescriptor& j, int slot) {
  switch (slot) {
    case 0: return j.act_agu;
    case 1: return j.weight_agu;
    case 2: return j.scaler_agu;
    case 3: return j.bias_agu;
    default: return j.output_agu;
  }
}

[[noreturn]] void unknown(std::uint16_t address) {
  fail(ErrorCode::UnknownCsr, "no job field at CSR " + std::to_string(address));
}

}  // namespace

std::span<const CsrInfo> standard_csrs() { return kStandard; }
std::span<const CsrInfo> mvu_csrs() { return store().table; }

std::optional<std::uint16_t> csr_address(std::string_view name) {
  for (const auto& c : kStandard)
    if (c.name == name) return c.address;
  for (const auto& c : store().table)
    if (c.name == name) return c.address;
  return std::nullopt;
}

std::optional<std::string_view> csr_name(std::uint16_t address) {
  for (const auto& c : kStandard)
    if (c.address == address) return c.name;
  if (address >= kMvuCsrBase && address < kMvuCsrBase + kMvuCsrCount) {
    return store().table[address - kMvuCsrBase].name;
  }
  return std::nullopt;
}

bool is_job_field_csr(std::uint16_t address) {
  return address >= kMvuCsrBase && address < kMvuCsrBase + kMvuFieldCsrs;
}

std::uint32_t get_job_field(const JobDescriptor& job, std::uint16_t address) {
  if (!is_job_field_csr(address)) unknown(address);
  const int i = address - kMvuCsrBase;
  switch (i) {
    case 0: return static_cast<std::uint32_t>(job.act_prec.bits);
    case 1: return job.act_prec.is_signed ? 1 : 0;
    case 2: return static_cast<std::uint32_t>(job.weight_prec.bits);
    case 3: return job.weight_prec.is_signed ? 1 : 0;
    default: break;
  }
  if (i < 4 + 5 * kCsrsPerAgu) {
    const int slot = (i - 4) / kCsrsPerAgu;
    const int off = (i - 4) % kCsrsPerAgu;
    const AguConfig& a = agu_ref(const_cast<JobDescriptor&>(job), slot);
    if (off == 0) return a.base;
    if (off <= kAguLevels) return a.counts[static_cast<std::size_t>(off - 1)];
    return static_cast<std::uint32_t>(a.jumps[static_cast<std::size_t>(off - 1 - kAguLevels)]);
  }
  switch (address) {
    case 0x83B: return job.countdown;
    case 0x83C: return job.reduce_depth;
    case 0x83D: return job.scaler_enable ? 1 : 0;
    case 0x83E: return job.relu_enable ? 1 : 0;
    case 0x83F: return job.pool_window;
    case 0x840: return job.quant_msb;
    case 0x841: return job.quant_bits;
    case 0x842: return job.dest_mask;
    case 0x843: return job.dest_base;
    default: unknown(address);
  }
}

void set_job_field(JobDescriptor& job, std::uint16_t address, std::uint32_t value) {
  if (!is_job_field_csr(address)) unknown(address);
  const int i = address - kMvuCsrBase;
  switch (i) {
    case 0: job.act_prec.bits = static_cast<int>(value); return;
    case 1: job.act_prec.is_signed = (value & 1u) != 0; return;
    case 2: job.weight_prec.bits = static_cast<int>(value); return;
    case 3: job.weight_prec.is_signed = (value & 1u) != 0; return;
    default: break;
  }
  if (i < 4 + 5 * kCsrsPerAgu) {
    const int slot = (i - 4) / kCsrsPerAgu;
    const int off = (i - 4) % kCsrsPerAgu;
    AguConfig& a = agu_ref(job, slot);
    if (off == 0) a.base = value;
    else if (off <= kAguLevels) a.counts[static_cast<std::size_t>(off - 1)] = value;
    else a.jumps[static_cast<std::size_t>(off - 1 - kAguLevels)] = static_cast<std::int32_t>(value);
    return;
  }
  switch (address) {
    case 0x83B: job.countdown = value; return;
    case 0x83C: job.reduce_depth = value; return;
    case 0x83D: job.scaler_enable = (value & 1u) != 0; return;
    case 0x83E: job.relu_enable = (value & 1u) != 0; return;
    case 0x83F: job.pool_window = value; return;
    case 0x840: job.quant_msb = value; return;
    case 0x841: job.quant_bits = value; return;
    case 0x842: job.dest_mask = static_cast<std::uint8_t>(value); return;
    case 0x843: job.dest_base = value; return;
    default: unknown(address);
  }
}

}  // namespace mvusim
