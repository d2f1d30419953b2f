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

#include "mvusim/pito.hpp"

#include <cstdio>
#include <ostream>
#include <string>

#include "mvusim/csr_map.hpp"
#include "mvusim/error.hpp"

namespace mvusim {

namespace {

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

Pito::Pito(MvuControl* mvus) : mvus_(mvus) { reset(); }

void Pito::reset() {
  imem_.assign(kInstrRamBytes / 4, 0);
  dmem_.assign(kDataRamBytes, 0);
  cycle_ = 0;
  for (int h = 0; h < kHarts; ++h) {
    HartState s;
    s.hart_id = h;
    s.pc = static_cast<std::uint32_t>(h) * kHartRegionBytes;
    harts_[static_cast<std::size_t>(h)] = s;
  }
}

void Pito::load_instructions(std::span<const std::uint32_t> words) {
  if (words.size() > imem_.size()) {
    fail(ErrorCode::ProgramTooLarge, "instruction image exceeds 8 KiB");
  }
  std::copy(words.begin(), words.end(), imem_.begin());
}

void Pito::load_data(std::span<const std::uint8_t> bytes, std::uint32_t address) {
  if (address + bytes.size() > dmem_.size()) {
    fail(ErrorCode::AddressOutOfRange, "data image exceeds 8 KiB");
  }
  std::copy(bytes.begin(), bytes.end(), dmem_.begin() + address);
}

bool Pito::all_halted() const {
  for (const auto& h : harts_)
    if (!h.halted) return false;
  return true;
}

std::uint32_t Pito::load(std::uint32_t addr, int bytes, bool sign) const {
  if (addr % static_cast<std::uint32_t>(bytes) != 0) {
    fail(ErrorCode::MisalignedAccess, "load of " + std::to_string(bytes) + " bytes at " + hex32(addr));
  }
  if (static_cast<std::size_t>(addr) + static_cast<std::size_t>(bytes) > dmem_.size()) {
    fail(ErrorCode::AddressOutOfRange, "load at " + hex32(addr) + " outside data RAM");
  }
  std::uint32_t v = 0;
  for (int b = bytes - 1; b >= 0; --b) v = (v << 8) | dmem_[addr + static_cast<std::uint32_t>(b)];
  if (sign && bytes < 4) {
    const std::uint32_t m = 1u << (bytes * 8 - 1);
    v = (v ^ m) - m;
  }
  return v;
}

void Pito::store(std::uint32_t addr, int bytes, std::uint32_t value) {
  if (addr % static_cast<std::uint32_t>(bytes) != 0) {
    fail(ErrorCode::MisalignedAccess, "store of " + std::to_string(bytes) + " bytes at " + hex32(addr));
  }
  if (static_cast<std::size_t>(addr) + static_cast<std::size_t>(bytes) > dmem_.size()) {
    fail(ErrorCode::AddressOutOfRange, "store at " + hex32(addr) + " outside data RAM");
  }
  for (int b = 0; b < bytes; ++b) {
    dmem_[addr + static_cast<std::uint32_t>(b)] = static_cast<std::uint8_t>(value >> (8 * b));
  }
}

std::uint32_t Pito::load_word(std::uint32_t address) const { return load(address, 4, false); }
void Pito::store_word(std::uint32_t address, std::uint32_t value) { store(address, 4, value); }

bool Pito::try_csr(HartState& h, std::uint16_t address, CsrOp op, std::uint32_t value,
                   std::uint32_t& old, bool& stall) {
  stall = false;
  const bool writes = op != CsrOp::Read;
  auto apply = [&](std::uint32_t cur) {
    switch (op) {
      case CsrOp::Write: return value;
      case CsrOp::Set: return cur | value;
      case CsrOp::Clear: return cur & ~value;
      case CsrOp::Read: return cur;
    }
    return cur;
  };
  auto read_only = [&]() {
    if (writes) fail(ErrorCode::IllegalInstruction, "write to read-only CSR " + hex32(address));
  };
  const int mvu = h.hart_id;

  if (is_job_field_csr(address)) {
    old = get_job_field(h.job_csrs, address);
    if (writes) set_job_field(h.job_csrs, address, apply(old));
    return true;
  }
  switch (address) {
    case kCsrMstatus: old = h.mstatus; if (writes) h.mstatus = apply(old) & (kMstatusMie | kMstatusMpie); return true;
    case kCsrMie: old = h.mie; if (writes) h.mie = apply(old) & kMieMeie; return true;
    case kCsrMtvec: old = h.mtvec; if (writes) h.mtvec = apply(old) & ~3u; return true;
    case kCsrMscratch: old = h.mscratch; if (writes) h.mscratch = apply(old); return true;
    case kCsrMepc: old = h.mepc; if (writes) h.mepc = apply(old) & ~3u; return true;
    case kCsrMcause: old = h.mcause; if (writes) h.mcause = apply(old); return true;
    case kCsrMip: read_only(); old = h.done_pending ? kMieMeie : 0; return true;
    case kCsrMcycle: read_only(); old = static_cast<std::uint32_t>(cycle_); return true;
    case kCsrMinstret: read_only(); old = static_cast<std::uint32_t>(h.retired); return true;
    case kCsrMhartid: read_only(); old = static_cast<std::uint32_t>(h.hart_id); return true;
    case kCsrCommand:
      old = 0;
      if (writes && (apply(0) & 1u) != 0 && mvus_ != nullptr) {
        if (!mvus_->submit_job(mvu, h.job_csrs)) {
          stall = true;
          return false;
        }
      }
      return true;
    case kCsrStatus:
      old = h.done_pending ? 1u : 0u;
      // Every writing form clears the bits named in the operand.
      if (writes && (value & 1u) != 0) h.done_pending = false;
      return true;
    case kCsrBusy: read_only(); old = mvus_ ? mvus_->busy(mvu) : 0; return true;
    case kCsrJobCycles: read_only(); old = mvus_ ? mvus_->last_job_cycles(mvu) : 0; return true;
    case kCsrJobsDone: read_only(); old = mvus_ ? mvus_->jobs_done(mvu) : 0; return true;
    case kCsrReserved: read_only(); old = 0; return true;
    default: break;
  }
  fail(ErrorCode::UnknownCsr, "unknown CSR " + hex32(address));
}

std::uint32_t Pito::csr_access(int hart_id, std::uint16_t address, CsrOp op, std::uint32_t value) {
  std::uint32_t old = 0;
  bool stall = false;
  try_csr(hart(hart_id), address, op, value, old, stall);
  return old;
}

void Pito::deliver_interrupt(int mvu) { hart(mvu).done_pending = true; }

// Returns false when the instruction stalled (pc unchanged, nothing retired).
bool Pito::execute(HartState& h, const Instr& in, std::string* writes) {
  auto& x = h.regs;
  const std::uint32_t a = x[in.rs1];
  const std::uint32_t b = x[in.rs2];
  const auto imm = static_cast<std::uint32_t>(in.imm);
  std::uint32_t next = h.pc + 4;
  bool wb = false;
  std::uint32_t result = 0;

  switch (in.op) {
    case Op::LUI: result = imm << 12; wb = true; break;
    case Op::AUIPC: result = h.pc + (imm << 12); wb = true; break;
    case Op::JAL: result = h.pc + 4; wb = true; next = h.pc + imm; break;
    case Op::JALR: result = h.pc + 4; wb = true; next = (a + imm) & ~1u; break;
    case Op::BEQ: if (a == b) next = h.pc + imm; break;
    case Op::BNE: if (a != b) next = h.pc + imm; break;
    case Op::BLT: if (static_cast<std::int32_t>(a) < static_cast<std::int32_t>(b)) next = h.pc + imm; break;
    case Op::BGE: if (static_cast<std::int32_t>(a) >= static_cast<std::int32_t>(b)) next = h.pc + imm; break;
    case Op::BLTU: if (a < b) next = h.pc + imm; break;
    case Op::BGEU: if (a >= b) next = h.pc + imm; break;
    case Op::LB: result = load(a + imm, 1, true); wb = true; break;
    case Op::LH: result = load(a + imm, 2, true); wb = true; break;
    case Op::LW: result = load(a + imm, 4, false); wb = true; break;
    case Op::LBU: result = load(a + imm, 1, false); wb = true; break;
    case Op::LHU: result = load(a + imm, 2, false); wb = true; break;
    case Op::SB:
    case Op::SH:
    case Op::SW: {
      const int n = in.op == Op::SB ? 1 : in.op == Op::SH ? 2 : 4;
      store(a + imm, n, b);
      if (writes) *writes += " mem[" + hex32(a + imm) + "]=" + hex32(b);
      break;
    }
    case Op::ADDI: result = a + imm; wb = true; break;
    case Op::SLTI: result = static_cast<std::int32_t>(a) < in.imm; wb = true; break;
    case Op::SLTIU: result = a < imm; wb = true; break;
    case Op::XORI: result = a ^ imm; wb = true; break;
    case Op::ORI: result = a | imm; wb = true; break;
    case Op::ANDI: result = a & imm; wb = true; break;
    case Op::SLLI: result = a << (imm & 31u); wb = true; break;
    case Op::SRLI: result = a >> (imm & 31u); wb = true; break;
    case Op::SRAI: result = static_cast<std::uint32_t>(static_cast<std::int32_t>(a) >> (imm & 31u)); wb = true; break;
    case Op::ADD: result = a + b; wb = true; break;
    case Op::SUB: result = a - b; wb = true; break;
    case Op::SLL: result = a << (b & 31u); wb = true; break;
    case Op::SLT: result = static_cast<std::int32_t>(a) < static_cast<std::int32_t>(b); wb = true; break;
    case Op::SLTU: result = a < b; wb = true; break;
    case Op::XOR: result = a ^ b; wb = true; break;
    case Op::SRL: result = a >> (b & 31u); wb = true; break;
    case Op::SRA: result = static_cast<std::uint32_t>(static_cast<std::int32_t>(a) >> (b & 31u)); wb = true; break;
    case Op::OR: result = a | b; wb = true; break;
    case Op::AND: result = a & b; wb = true; break;
    case Op::FENCE: break;
    case Op::ECALL: fail(ErrorCode::IllegalInstruction, "ecall is not supported at " + hex32(h.pc));
    case Op::EBREAK:
      h.halted = true;
      next = h.pc;
      break;
    case Op::MRET:
      next = h.mepc;
      h.mstatus = (h.mstatus & kMstatusMpie ? kMstatusMie : 0u) | kMstatusMpie;
      break;
    case Op::CSRRW:
    case Op::CSRRS:
    case Op::CSRRC:
    case Op::CSRRWI:
    case Op::CSRRSI:
    case Op::CSRRCI: {
      const bool imm_form = in.op == Op::CSRRWI || in.op == Op::CSRRSI || in.op == Op::CSRRCI;
      const std::uint32_t src = imm_form ? imm : a;
      const bool src_zero = imm_form ? imm == 0 : in.rs1 == 0;
      CsrOp op = CsrOp::Write;
      if (in.op == Op::CSRRS || in.op == Op::CSRRSI) op = src_zero ? CsrOp::Read : CsrOp::Set;
      if (in.op == Op::CSRRC || in.op == Op::CSRRCI) op = src_zero ? CsrOp::Read : CsrOp::Clear;
      std::uint32_t old = 0;
      bool stall = false;
      if (!try_csr(h, in.csr, op, src, old, stall)) return false;
      if (writes && op != CsrOp::Read) {
        const auto n = csr_name(in.csr);
        *writes += " csr[" + (n ? std::string(*n) : hex32(in.csr)) + "]<-" + hex32(src);
      }
      result = old;
      wb = true;
      break;
    }
  }
  if (wb && in.rd != 0) {
    x[in.rd] = result;
    if (writes) *writes += " x" + std::to_string(in.rd) + "=" + hex32(result);
  }
  x[0] = 0;
  h.pc = next;
  ++h.retired;
  return true;
}

void Pito::step() {
  HartState& h = harts_[static_cast<std::size_t>(cycle_ % kHarts)];
  if (!h.halted) {
    if (h.done_pending && (h.mstatus & kMstatusMie) && (h.mie & kMieMeie)) {
      h.mepc = h.pc;
      h.mcause = kMcauseMvuDone;
      h.mstatus = kMstatusMpie;  // MPIE <- MIE (=1), MIE <- 0
      h.pc = h.mtvec;
    }
    if (h.pc % 4 != 0) fail(ErrorCode::MisalignedAccess, "instruction fetch at " + hex32(h.pc));
    if (h.pc / 4 >= imem_.size()) {
      fail(ErrorCode::AddressOutOfRange, "instruction fetch at " + hex32(h.pc) + " outside RAM");
    }
    const std::uint32_t pc = h.pc;
    Instr in;
    try {
      in = decode(imem_[pc / 4]);
    } catch (const Error& e) {
      fail(e.code(), std::string(e.what()) + " at pc " + hex32(pc) + " (hart " +
                         std::to_string(h.hart_id) + ")");
    }
    std::string writes;
    const bool retired = execute(h, in, trace_ ? &writes : nullptr);
    if (trace_) {
      *trace_ << cycle_ << ' ' << h.hart_id << ' ' << hex32(pc) << ' ' << disassemble(in)
              << (retired ? writes : std::string(" stall")) << '\n';
    }
  }
  ++cycle_;
}

void Pito::run(std::uint64_t cycles) {
  for (std::uint64_t i = 0; i < cycles; ++i) step();
}

}  // namespace mvusim
