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
#include <optional>
#include <span>
#include <string_view>

#include "mvusim/job.hpp"

namespace mvusim {

// Standard machine-mode CSRs implemented by the controller.
inline constexpr std::uint16_t kCsrMstatus = 0x300;
inline constexpr std::uint16_t kCsrMie = 0x304;
inline constexpr std::uint16_t kCsrMtvec = 0x305;
inline constexpr std::uint16_t kCsrMscratch = 0x340;
inline constexpr std::uint16_t kCsrMepc = 0x341;
inline constexpr std::uint16_t kCsrMcause = 0x342;
inline constexpr std::uint16_t kCsrMip = 0x344;
inline constexpr std::uint16_t kCsrMcycle = 0xB00;
inline constexpr std::uint16_t kCsrMinstret = 0xB02;
inline constexpr std::uint16_t kCsrMhartid = 0xF14;

inline constexpr std::uint32_t kMstatusMie = 1u << 3;
inline constexpr std::uint32_t kMstatusMpie = 1u << 7;
inline constexpr std::uint32_t kMieMeie = 1u << 11;
inline constexpr std::uint32_t kMcauseMvuDone = 0x8000000Bu;

// MVU CSRs: 0x800 .. 0x849. The first 68 map one-to-one onto
// JobDescriptor fields (in declaration order: precisions, the five AGUs as
// base/count0-4/jump0-4, then countdown .. dest_base).
inline constexpr std::uint16_t kMvuCsrBase = 0x800;
inline constexpr int kMvuCsrCount = 74;
inline constexpr int kMvuFieldCsrs = 68;
inline constexpr std::uint16_t kCsrAguBase = 0x804;  // 5 AGUs x 11 CSRs
inline constexpr int kCsrsPerAgu = 11;
inline constexpr std::uint16_t kCsrCountdown = 0x83B;
inline constexpr std::uint16_t kCsrDestBase = 0x843;
inline constexpr std::uint16_t kCsrCommand = 0x844;
inline constexpr std::uint16_t kCsrStatus = 0x845;     // bit 0: job done pending, write 1 to clear
inline constexpr std::uint16_t kCsrBusy = 0x846;       // bit 0 running, bit 1 job queued
inline constexpr std::uint16_t kCsrJobCycles = 0x847;  // MVP cycles of the last finished job
inline constexpr std::uint16_t kCsrJobsDone = 0x848;   // finished jobs since reset
inline constexpr std::uint16_t kCsrReserved = 0x849;

enum class AguSlot { Activation = 0, Weight = 1, Scaler = 2, Bias = 3, Output = 4 };

inline constexpr std::uint16_t agu_csr(AguSlot agu, int offset) {
  return static_cast<std::uint16_t>(kCsrAguBase + static_cast<int>(agu) * kCsrsPerAgu + offset);
}
// offset 0 = base, 1..5 = count0..4, 6..10 = jump0..4.

struct CsrInfo {
  std::uint16_t address;
  std::string_view name;
  bool read_only;
};

std::span<const CsrInfo> standard_csrs();
std::span<const CsrInfo> mvu_csrs();

std::optional<std::uint16_t> csr_address(std::string_view name);
std::optional<std::string_view> csr_name(std::uint16_t address);

bool is_job_field_csr(std::uint16_t address);

// Raw register view of a descriptor field. Precision widths are stored
// unvalidated; validation happens when the job is started.
std::uint32_t get_job_field(const JobDescriptor& job, std::uint16_t address);
void set_job_field(JobDescriptor& job, std::uint16_t address, std::uint32_t value);

}  // namespace mvusim
