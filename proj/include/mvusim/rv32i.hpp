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
#include <string>
#include <string_view>

namespace mvusim {

enum class Op : std::uint8_t {
  LUI, AUIPC, JAL, JALR,
  BEQ, BNE, BLT, BGE, BLTU, BGEU,
  LB, LH, LW, LBU, LHU, SB, SH, SW,
  ADDI, SLTI, SLTIU, XORI, ORI, ANDI, SLLI, SRLI, SRAI,
  ADD, SUB, SLL, SLT, SLTU, XOR, SRL, SRA, OR, AND,
  FENCE, ECALL, EBREAK, MRET,
  CSRRW, CSRRS, CSRRC, CSRRWI, CSRRSI, CSRRCI,
};

inline constexpr int kOpCount = static_cast<int>(Op::CSRRCI) + 1;

// Decoded instruction. `imm` holds the sign-extended immediate (the raw
// 20-bit field for LUI/AUIPC, the shift amount for shifts, the 5-bit
// zero-extended source for CSR*I forms). `csr` is the 12-bit CSR address.
struct Instr {
  Op op = Op::ADDI;
  std::uint8_t rd = 0;
  std::uint8_t rs1 = 0;
  std::uint8_t rs2 = 0;
  std::int32_t imm = 0;
  std::uint16_t csr = 0;

  friend bool operator==(const Instr&, const Instr&) = default;
};

// Throws IllegalInstruction.
Instr decode(std::uint32_t word);

// Throws RangeError when a field does not fit its encoding.
std::uint32_t encode(const Instr& in);

std::string_view mnemonic(Op op);

// Assembler-compatible text; branch and jump targets print as pc-relative
// byte offsets, CSRs by name when known.
std::string disassemble(const Instr& in);

std::string_view abi_register_name(int reg);

}  // namespace mvusim
