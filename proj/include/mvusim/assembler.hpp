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

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mvusim/pito.hpp"

namespace mvusim {

struct AssembledProgram {
  std::vector<std::uint32_t> instructions;  // full instruction RAM image
  std::vector<std::uint8_t> data;           // full data RAM image
  std::array<std::size_t, kHarts> hart_sizes{};  // instructions emitted per hart
  std::map<std::string, std::uint32_t> symbols;
};

// Two-pass assembler for the RV32I + Zicsr + mret subset.
//
//   .hart N          code that follows goes to hart N's 1 KiB region
//   .data [ADDR]     switch to data RAM (optionally at byte ADDR)
//   .word E, ...     32-bit words (data or code)
//   .equ NAME, E     constant
//   label:           code labels are instruction RAM byte addresses,
//                    data labels data RAM byte addresses
//
// Pseudo-instructions: li la mv not neg nop j jr ret call beqz bnez bltz
// bgez blez bgtz bgt ble bgtu bleu seqz snez csrr csrw csrs csrc csrwi
// csrsi csrci. Branch/jump targets are labels (absolute) or plain numbers
// (pc-relative offsets, as the disassembler prints them).
//
// Throws ParseError, RangeError, DuplicateLabel, UndefinedLabel,
// ProgramTooLarge.
AssembledProgram assemble(std::string_view source);

}  // namespace mvusim
