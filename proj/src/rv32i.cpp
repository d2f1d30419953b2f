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

#include "mvusim/rv32i.hpp"

#include <array>
#include <cstdio>
#include <string>

#include "mvusim/csr_map.hpp"
#include "mvusim/error.hpp"

namespace mvusim {

namespace {

constexpr std::uint32_t kOpLui = 0x37, kOpAuipc = 0x17, kOpJal = 0x6F, kOpJalr = 0x67,
                        kOpBranch = 0x63, kOpLoad = 0x03, kOpStore = 0x23, kOpImm = 0x13,
                        kOpReg = 0x33, kOpFence = 0x0F, kOpSystem = 0x73;

std::int32_t sext(std::uint32_t v, int bits) {
  const std::uint32_t m = 1u << (bits - 1);
  return static_cast<std::int32_t>((v ^ m) - m);
}

std::uint32_t field(std::uint32_t w, int lo, int len) { return (w >> lo) & ((1u << len) - 1u); }

[[noreturn]] void illegal(std::uint32_t word) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "cannot decode 0x%08x", word);
  fail(ErrorCode::IllegalInstruction, buf);
}

struct Enc {
  std::uint32_t opcode;
  std::uint32_t funct3;
  std::uint32_t funct7;
};

Enc encoding_of(Op op) {
  switch (op) {
    case Op::LUI: return {kOpLui, 0, 0};
    case Op::AUIPC: return {kOpAuipc, 0, 0};
    case Op::JAL: return {kOpJal, 0, 0};
    case Op::JALR: return {kOpJalr, 0, 0};
    case Op::BEQ: return {kOpBranch, 0, 0};
    case Op::BNE: return {kOpBranch, 1, 0};
    case Op::BLT: return {kOpBranch, 4, 0};
    case Op::BGE: return {kOpBranch, 5, 0};
    case Op::BLTU: return {kOpBranch, 6, 0};
    case Op::BGEU: return {kOpBranch, 7, 0};
    case Op::LB: return {kOpLoad, 0, 0};
    case Op::LH: return {kOpLoad, 1, 0};
    case Op::LW: return {kOpLoad, 2, 0};
    case Op::LBU: return {kOpLoad, 4, 0};
    case Op::LHU: return {kOpLoad, 5, 0};
    case Op::SB: return {kOpStore, 0, 0};
    case Op::SH: return {kOpStore, 1, 0};
    case Op::SW: return {kOpStore, 2, 0};
    case Op::ADDI: return {kOpImm, 0, 0};
    case Op::SLTI: return {kOpImm, 2, 0};
    case Op::SLTIU: return {kOpImm, 3, 0};
    case Op::XORI: return {kOpImm, 4, 0};
    case Op::ORI: return {kOpImm, 6, 0};
    case Op::ANDI: return {kOpImm, 7, 0};
    case Op::SLLI: return {kOpImm, 1, 0x00};
    case Op::SRLI: return {kOpImm, 5, 0x00};
    case Op::SRAI: return {kOpImm, 5, 0x20};
    case Op::ADD: return {kOpReg, 0, 0x00};
    case Op::SUB: return {kOpReg, 0, 0x20};
    case Op::SLL: return {kOpReg, 1, 0x00};
    case Op::SLT: return {kOpReg, 2, 0x00};
    case Op::SLTU: return {kOpReg, 3, 0x00};
    case Op::XOR: return {kOpReg, 4, 0x00};
    case Op::SRL: return {kOpReg, 5, 0x00};
    case Op::SRA: return {kOpReg, 5, 0x20};
    case Op::OR: return {kOpReg, 6, 0x00};
    case Op::AND: return {kOpReg, 7, 0x00};
    case Op::FENCE: return {kOpFence, 0, 0};
    case Op::ECALL:
    case Op::EBREAK:
    case Op::MRET: return {kOpSystem, 0, 0};
    case Op::CSRRW: return {kOpSystem, 1, 0};
    case Op::CSRRS: return {kOpSystem, 2, 0};
    case Op::CSRRC: return {kOpSystem, 3, 0};
    case Op::CSRRWI: return {kOpSystem, 5, 0};
    case Op::CSRRSI: return {kOpSystem, 6, 0};
    case Op::CSRRCI: return {kOpSystem, 7, 0};
  }
  return {0, 0, 0};
}

enum class Format { R, I, S, B, U, J, Shift, Csr, CsrI, Sys, Fence };

Format format_of(Op op) {
  switch (op) {
    case Op::LUI:
    case Op::AUIPC: return Format::U;
    case Op::JAL: return Format::J;
    case Op::BEQ:
    case Op::BNE:
    case Op::BLT:
    case Op::BGE:
    case Op::BLTU:
    case Op::BGEU: return Format::B;
    case Op::SB:
    case Op::SH:
    case Op::SW: return Format::S;
    case Op::SLLI:
    case Op::SRLI:
    case Op::SRAI: return Format::Shift;
    case Op::ADD:
    case Op::SUB:
    case Op::SLL:
    case Op::SLT:
    case Op::SLTU:
    case Op::XOR:
    case Op::SRL:
    case Op::SRA:
    case Op::OR:
    case Op::AND: return Format::R;
    case Op::FENCE: return Format::Fence;
    case Op::ECALL:
    case Op::EBREAK:
    case Op::MRET: return Format::Sys;
    case Op::CSRRW:
    case Op::CSRRS:
    case Op::CSRRC: return Format::Csr;
    case Op::CSRRWI:
    case Op::CSRRSI:
    case Op::CSRRCI: return Format::CsrI;
    default: return Format::I;
  }
}

void check_range(bool ok, Op op, std::int64_t v) {
  if (!ok) {
    fail(ErrorCode::RangeError, "immediate " + std::to_string(v) + " out of range for " +
                                    std::string(mnemonic(op)));
  }
}

}  // namespace

Instr decode(std::uint32_t w) {
  Instr in;
  const std::uint32_t opcode = field(w, 0, 7);
  const std::uint32_t f3 = field(w, 12, 3);
  const std::uint32_t f7 = field(w, 25, 7);
  in.rd = static_cast<std::uint8_t>(field(w, 7, 5));
  in.rs1 = static_cast<std::uint8_t>(field(w, 15, 5));
  in.rs2 = static_cast<std::uint8_t>(field(w, 20, 5));
  const std::int32_t imm_i = sext(field(w, 20, 12), 12);

  switch (opcode) {
    case kOpLui:
    case kOpAuipc:
      in.op = opcode == kOpLui ? Op::LUI : Op::AUIPC;
      in.imm = static_cast<std::int32_t>(field(w, 12, 20));
      in.rs1 = in.rs2 = 0;
      return in;
    case kOpJal: {
      const std::uint32_t raw = (field(w, 31, 1) << 20) | (field(w, 12, 8) << 12) |
                                (field(w, 20, 1) << 11) | (field(w, 21, 10) << 1);
      in.op = Op::JAL;
      in.imm = sext(raw, 21);
      in.rs1 = in.rs2 = 0;
      return in;
    }
    case kOpJalr:
      if (f3 != 0) illegal(w);
      in.op = Op::JALR;
      in.imm = imm_i;
      in.rs2 = 0;
      return in;
    case kOpBranch: {
      static constexpr std::array<int, 8> map{0, 1, -1, -1, 2, 3, 4, 5};
      if (map[f3] < 0) illegal(w);
      static constexpr Op ops[] = {Op::BEQ, Op::BNE, Op::BLT, Op::BGE, Op::BLTU, Op::BGEU};
      const std::uint32_t raw = (field(w, 31, 1) << 12) | (field(w, 7, 1) << 11) |
                                (field(w, 25, 6) << 5) | (field(w, 8, 4) << 1);
      in.op = ops[map[f3]];
      in.imm = sext(raw, 13);
      in.rd = 0;
      return in;
    }
    case kOpLoad: {
      static constexpr std::array<int, 8> map{0, 1, 2, -1, 3, 4, -1, -1};
      if (map[f3] < 0) illegal(w);
      static constexpr Op ops[] = {Op::LB, Op::LH, Op::LW, Op::LBU, Op::LHU};
      in.op = ops[map[f3]];
      in.imm = imm_i;
      in.rs2 = 0;
      return in;
    }
    case kOpStore: {
      if (f3 > 2) illegal(w);
      static constexpr Op ops[] = {Op::SB, Op::SH, Op::SW};
      in.op = ops[f3];
      in.imm = sext((field(w, 25, 7) << 5) | field(w, 7, 5), 12);
      in.rd = 0;
      return in;
    }
    case kOpImm: {
      in.rs2 = 0;
      switch (f3) {
        case 0: in.op = Op::ADDI; break;
        case 2: in.op = Op::SLTI; break;
        case 3: in.op = Op::SLTIU; break;
        case 4: in.op = Op::XORI; break;
        case 6: in.op = Op::ORI; break;
        case 7: in.op = Op::ANDI; break;
        case 1:
          if (f7 != 0) illegal(w);
          in.op = Op::SLLI;
          in.imm = static_cast<std::int32_t>(field(w, 20, 5));
          return in;
        case 5:
          if (f7 != 0 && f7 != 0x20) illegal(w);
          in.op = f7 == 0 ? Op::SRLI : Op::SRAI;
          in.imm = static_cast<std::int32_t>(field(w, 20, 5));
          return in;
        default: illegal(w);
      }
      in.imm = imm_i;
      return in;
    }
    case kOpReg: {
      if (f7 == 0x20) {
        if (f3 == 0) in.op = Op::SUB;
        else if (f3 == 5) in.op = Op::SRA;
        else illegal(w);
      } else if (f7 == 0) {
        static constexpr Op ops[] = {Op::ADD, Op::SLL, Op::SLT, Op::SLTU,
                                     Op::XOR, Op::SRL, Op::OR,  Op::AND};
        in.op = ops[f3];
      } else {
        illegal(w);
      }
      return in;
    }
    case kOpFence:
      if (f3 != 0) illegal(w);
      in = Instr{};
      in.op = Op::FENCE;
      in.imm = static_cast<std::int32_t>(field(w, 20, 12));
      in.rd = static_cast<std::uint8_t>(field(w, 7, 5));
      in.rs1 = static_cast<std::uint8_t>(field(w, 15, 5));
      return in;
    case kOpSystem: {
      if (f3 == 0) {
        if (in.rd != 0 || in.rs1 != 0) illegal(w);
        const std::uint32_t f12 = field(w, 20, 12);
        in = Instr{};
        if (f12 == 0) in.op = Op::ECALL;
        else if (f12 == 1) in.op = Op::EBREAK;
        else if (f12 == 0x302) in.op = Op::MRET;
        else illegal(w);
        return in;
      }
      if (f3 == 4) illegal(w);
      static constexpr Op ops[] = {Op::ECALL, Op::CSRRW,  Op::CSRRS,  Op::CSRRC,
                                   Op::ECALL, Op::CSRRWI, Op::CSRRSI, Op::CSRRCI};
      in.op = ops[f3];
      in.csr = static_cast<std::uint16_t>(field(w, 20, 12));
      in.rs2 = 0;
      if (f3 >= 5) {
        in.imm = in.rs1;
        in.rs1 = 0;
      }
      return in;
    }
    default: illegal(w);
  }
}

std::uint32_t encode(const Instr& in) {
  const Enc e = encoding_of(in.op);
  if (in.rd > 31 || in.rs1 > 31 || in.rs2 > 31) fail(ErrorCode::RangeError, "register index > 31");
  const std::uint32_t rd = in.rd, rs1 = in.rs1, rs2 = in.rs2;
  const std::int64_t imm = in.imm;
  const auto u = static_cast<std::uint32_t>(in.imm);

  switch (format_of(in.op)) {
    case Format::R:
      return (e.funct7 << 25) | (rs2 << 20) | (rs1 << 15) | (e.funct3 << 12) | (rd << 7) | e.opcode;
    case Format::I:
      check_range(imm >= -2048 && imm <= 2047, in.op, imm);
      return ((u & 0xFFFu) << 20) | (rs1 << 15) | (e.funct3 << 12) | (rd << 7) | e.opcode;
    case Format::Shift:
      check_range(imm >= 0 && imm <= 31, in.op, imm);
      return (e.funct7 << 25) | (u << 20) | (rs1 << 15) | (e.funct3 << 12) | (rd << 7) | e.opcode;
    case Format::S:
      check_range(imm >= -2048 && imm <= 2047, in.op, imm);
      return (((u >> 5) & 0x7Fu) << 25) | (rs2 << 20) | (rs1 << 15) | (e.funct3 << 12) |
             ((u & 0x1Fu) << 7) | e.opcode;
    case Format::B:
      check_range(imm >= -4096 && imm <= 4094 && (imm & 1) == 0, in.op, imm);
      return (((u >> 12) & 1u) << 31) | (((u >> 5) & 0x3Fu) << 25) | (rs2 << 20) | (rs1 << 15) |
             (e.funct3 << 12) | (((u >> 1) & 0xFu) << 8) | (((u >> 11) & 1u) << 7) | e.opcode;
    case Format::U:
      check_range(imm >= 0 && imm <= 0xFFFFF, in.op, imm);
      return (u << 12) | (rd << 7) | e.opcode;
    case Format::J:
      check_range(imm >= -(1 << 20) && imm < (1 << 20) && (imm & 1) == 0, in.op, imm);
      return (((u >> 20) & 1u) << 31) | (((u >> 1) & 0x3FFu) << 21) | (((u >> 11) & 1u) << 20) |
             (((u >> 12) & 0xFFu) << 12) | (rd << 7) | e.opcode;
    case Format::Fence:
      return ((u & 0xFFFu) << 20) | (rs1 << 15) | (rd << 7) | e.opcode;
    case Format::Sys:
      if (in.op == Op::ECALL) return e.opcode;
      if (in.op == Op::EBREAK) return (1u << 20) | e.opcode;
      return (0x302u << 20) | e.opcode;
    case Format::Csr:
      if (in.csr > 0xFFF) fail(ErrorCode::RangeError, "CSR address exceeds 12 bits");
      return (std::uint32_t{in.csr} << 20) | (rs1 << 15) | (e.funct3 << 12) | (rd << 7) | e.opcode;
    case Format::CsrI:
      if (in.csr > 0xFFF) fail(ErrorCode::RangeError, "CSR address exceeds 12 bits");
      check_range(imm >= 0 && imm <= 31, in.op, imm);
      return (std::uint32_t{in.csr} << 20) | (u << 15) | (e.funct3 << 12) | (rd << 7) | e.opcode;
  }
  return 0;
}

std::string_view mnemonic(Op op) {
  static constexpr std::array<std::string_view, kOpCount> names{
      "lui",  "auipc", "jal",   "jalr",  "beq",   "bne",   "blt",    "bge",    "bltu",   "bgeu",
      "lb",   "lh",    "lw",    "lbu",   "lhu",   "sb",    "sh",     "sw",     "addi",   "slti",
      "sltiu", "xori", "ori",   "andi",  "slli",  "srli",  "srai",   "add",    "sub",    "sll",
      "slt",  "sltu",  "xor",   "srl",   "sra",   "or",    "and",    "fence",  "ecall",  "ebreak",
      "mret", "csrrw", "csrrs", "csrrc", "csrrwi", "csrrsi", "csrrci"};
  return names[static_cast<std::size_t>(op)];
}

std::string_view abi_register_name(int reg) {
  static constexpr std::array<std::string_view, 32> names{
      "zero", "ra", "sp", "gp", "tp",  "t0",  "t1", "t2", "s0", "s1", "a0",
      "a1",   "a2", "a3", "a4", "a5",  "a6",  "a7", "s2", "s3", "s4", "s5",
      "s6",   "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6"};
  return names.at(static_cast<std::size_t>(reg));
}

std::string disassemble(const Instr& in) {
  const std::string m(mnemonic(in.op));
  auto x = [](int r) { return "x" + std::to_string(r); };
  auto csr = [](std::uint16_t a) {
    if (auto n = csr_name(a)) return std::string(*n);
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%03x", a);
    return std::string(buf);
  };
  switch (format_of(in.op)) {
    case Format::R: return m + " " + x(in.rd) + ", " + x(in.rs1) + ", " + x(in.rs2);
    case Format::Shift: return m + " " + x(in.rd) + ", " + x(in.rs1) + ", " + std::to_string(in.imm);
    case Format::I:
      switch (in.op) {
        case Op::LB:
        case Op::LH:
        case Op::LW:
        case Op::LBU:
        case Op::LHU:
        case Op::JALR:
          return m + " " + x(in.rd) + ", " + std::to_string(in.imm) + "(" + x(in.rs1) + ")";
        default: return m + " " + x(in.rd) + ", " + x(in.rs1) + ", " + std::to_string(in.imm);
      }
    case Format::S: return m + " " + x(in.rs2) + ", " + std::to_string(in.imm) + "(" + x(in.rs1) + ")";
    case Format::B: return m + " " + x(in.rs1) + ", " + x(in.rs2) + ", " + std::to_string(in.imm);
    case Format::U: {
      char buf[16];
      std::snprintf(buf, sizeof buf, "0x%x", static_cast<unsigned>(in.imm));
      return m + " " + x(in.rd) + ", " + buf;
    }
    case Format::J: return m + " " + x(in.rd) + ", " + std::to_string(in.imm);
    case Format::Fence:
    case Format::Sys: return m;
    case Format::Csr: return m + " " + x(in.rd) + ", " + csr(in.csr) + ", " + x(in.rs1);
    case Format::CsrI:
      return m + " " + x(in.rd) + ", " + csr(in.csr) + ", " + std::to_string(in.imm);
  }
  return m;
}

}  // namespace mvusim
