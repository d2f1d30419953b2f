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

#include "mvusim/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <unordered_map>

#include "mvusim/csr_map.hpp"
#include "mvusim/error.hpp"
#include "mvusim/rv32i.hpp"

namespace mvusim {

namespace {

struct Stmt {
  int line = 0;
  int hart = 0;  // -1 for data
  std::uint32_t address = 0;
  std::string op;
  std::vector<std::string> args;
  int size = 0;  // in words
};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_ident(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '.'))
    return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

[[noreturn]] void parse_error(int line, const std::string& msg) {
  fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + msg);
}

std::optional<int> parse_register(std::string_view s) {
  const std::string r = lower(trim(s));
  if (r.size() >= 2 && r[0] == 'x') {
    int v = 0;
    auto [p, ec] = std::from_chars(r.data() + 1, r.data() + r.size(), v);
    if (ec == std::errc() && p == r.data() + r.size() && v >= 0 && v < 32) return v;
    return std::nullopt;
  }
  if (r == "fp") return 8;
  for (int i = 0; i < 32; ++i)
    if (abi_register_name(i) == r) return i;
  return std::nullopt;
}

class Assembler {
 public:
  AssembledProgram run(std::string_view source) {
    parse(source);
    AssembledProgram out;
    out.instructions.assign(kInstrRamBytes / 4, 0);
    out.data.assign(kDataRamBytes, 0);
    for (const Stmt& s : stmts_) emit(s, out);
    out.hart_sizes = hart_count_;
    for (const auto& [k, v] : labels_) out.symbols[k] = static_cast<std::uint32_t>(v);
    for (const auto& [k, v] : equs_) out.symbols[k] = static_cast<std::uint32_t>(v);
    return out;
  }

 private:
  std::vector<Stmt> stmts_;
  std::unordered_map<std::string, std::int64_t> labels_;
  std::unordered_map<std::string, std::int64_t> equs_;
  std::array<std::size_t, kHarts> hart_count_{};
  int hart_ = 0;  // -1 = data section
  std::uint32_t data_loc_ = 0;

  std::uint32_t location() const {
    if (hart_ < 0) return data_loc_;
    return static_cast<std::uint32_t>(hart_) * kHartRegionBytes +
           static_cast<std::uint32_t>(hart_count_[static_cast<std::size_t>(hart_)] * 4);
  }

  // Expression: term {(+|-) term}; term = number | symbol. Sets
  // `uses_label` when a label contributes (the value is then an address).
  std::optional<std::int64_t> eval(const std::string& text, int line, bool& uses_label,
                                   bool allow_unresolved) const {
    uses_label = false;
    const std::string s = trim(text);
    if (s.empty()) parse_error(line, "missing operand");
    std::int64_t total = 0;
    std::size_t i = 0;
    int sign = 1;
    bool unresolved = false;
    bool expect_term = true;
    while (i < s.size()) {
      const char c = s[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      if (expect_term && (c == '-' || c == '+')) {
        if (c == '-') sign = -sign;
        ++i;
        continue;
      }
      if (!expect_term) {
        if (c == '+') sign = 1;
        else if (c == '-') sign = -1;
        else parse_error(line, "bad expression '" + s + "'");
        ++i;
        expect_term = true;
        continue;
      }
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '.')) ++j;
      const std::string tok = s.substr(i, j - i);
      if (tok.empty()) parse_error(line, "bad expression '" + s + "'");
      std::int64_t v = 0;
      if (std::isdigit(static_cast<unsigned char>(tok[0]))) {
        int base = 10;
        std::size_t off = 0;
        if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
          base = 16;
          off = 2;
        } else if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'b' || tok[1] == 'B')) {
          base = 2;
          off = 2;
        }
        std::uint64_t u = 0;
        auto [p, ec] = std::from_chars(tok.data() + off, tok.data() + tok.size(), u, base);
        if (ec != std::errc() || p != tok.data() + tok.size()) parse_error(line, "bad number '" + tok + "'");
        v = static_cast<std::int64_t>(u);
      } else if (auto it = equs_.find(tok); it != equs_.end()) {
        v = it->second;
      } else if (auto lt = labels_.find(tok); lt != labels_.end()) {
        v = lt->second;
        uses_label = true;
      } else {
        if (!allow_unresolved) {
          fail(ErrorCode::UndefinedLabel, "line " + std::to_string(line) + ": undefined symbol '" + tok + "'");
        }
        unresolved = true;
        uses_label = true;
      }
      total += sign * v;
      sign = 1;
      expect_term = false;
      i = j;
    }
    if (expect_term) parse_error(line, "dangling operator in '" + s + "'");
    if (unresolved) return std::nullopt;
    return total;
  }

  std::int64_t value(const std::string& text, int line) const {
    bool l = false;
    return *eval(text, line, l, false);
  }

  int reg(const std::string& text, int line) const {
    auto r = parse_register(text);
    if (!r) parse_error(line, "expected register, got '" + trim(text) + "'");
    return *r;
  }

  std::uint16_t csr(const std::string& text, int line) const {
    const std::string t = lower(trim(text));
    if (auto a = csr_address(t)) return *a;
    const std::int64_t v = value(text, line);
    if (v < 0 || v > 0xFFF) fail(ErrorCode::RangeError, "line " + std::to_string(line) + ": CSR address out of range");
    return static_cast<std::uint16_t>(v);
  }

  // "imm(reg)" or "(reg)".
  std::pair<std::int64_t, int> mem_operand(const std::string& text, int line) const {
    const std::string t = trim(text);
    const auto open = t.find('(');
    const auto close = t.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open || close + 1 != t.size()) {
      parse_error(line, "expected offset(register), got '" + t + "'");
    }
    const std::string off = trim(t.substr(0, open));
    return {off.empty() ? 0 : value(off, line), reg(t.substr(open + 1, close - open - 1), line)};
  }

  static std::vector<std::string> split_args(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    out.push_back(trim(cur));
    return out;
  }

  int size_of(const Stmt& s) const {
    if (s.op == ".word") return static_cast<int>(s.args.size());
    if (s.op == "la") return 2;
    if (s.op == "li") {
      if (s.args.size() != 2) parse_error(s.line, "li takes 2 operands");
      bool l = false;
      auto v = eval(s.args[1], s.line, l, true);
      if (!v) return 2;
      return (*v >= -2048 && *v <= 2047) ? 1 : 2;
    }
    return 1;
  }

  void parse(std::string_view source) {
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= source.size()) {
      const std::size_t nl = source.find('\n', pos);
      std::string line(source.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
      pos = nl == std::string_view::npos ? source.size() + 1 : nl + 1;
      ++line_no;
      if (auto c = line.find('#'); c != std::string::npos) line.resize(c);
      if (auto c = line.find("//"); c != std::string::npos) line.resize(c);
      std::string rest = trim(line);

      // Leading labels.
      while (true) {
        const auto colon = rest.find(':');
        if (colon == std::string::npos) break;
        const std::string name = trim(rest.substr(0, colon));
        if (!is_ident(name)) break;
        if (labels_.count(name) || equs_.count(name)) {
          fail(ErrorCode::DuplicateLabel, "line " + std::to_string(line_no) + ": '" + name + "' defined twice");
        }
        labels_[name] = location();
        rest = trim(rest.substr(colon + 1));
      }
      if (rest.empty()) continue;

      std::size_t sp = 0;
      while (sp < rest.size() && !std::isspace(static_cast<unsigned char>(rest[sp]))) ++sp;
      Stmt st;
      st.line = line_no;
      st.op = lower(rest.substr(0, sp));
      st.args = split_args(rest.substr(sp));

      if (st.op == ".hart") {
        if (st.args.size() != 1) parse_error(line_no, ".hart takes one operand");
        const std::int64_t h = value(st.args[0], line_no);
        if (h < 0 || h >= kHarts) fail(ErrorCode::RangeError, "line " + std::to_string(line_no) + ": hart index out of range");
        hart_ = static_cast<int>(h);
        continue;
      }
      if (st.op == ".data") {
        hart_ = -1;
        if (!st.args.empty()) {
          const std::int64_t a = value(st.args[0], line_no);
          if (a < 0 || a % 4 != 0) parse_error(line_no, ".data address must be word aligned");
          data_loc_ = static_cast<std::uint32_t>(a);
        }
        continue;
      }
      if (st.op == ".equ" || st.op == ".set") {
        if (st.args.size() != 2 || !is_ident(st.args[0])) parse_error(line_no, ".equ NAME, value");
        if (labels_.count(st.args[0]) || equs_.count(st.args[0])) {
          fail(ErrorCode::DuplicateLabel, "line " + std::to_string(line_no) + ": '" + st.args[0] + "' defined twice");
        }
        equs_[st.args[0]] = value(st.args[1], line_no);
        continue;
      }
      if (st.op.starts_with('.') && st.op != ".word") parse_error(line_no, "unknown directive " + st.op);

      st.hart = hart_;
      st.address = location();
      st.size = size_of(st);
      if (hart_ < 0) {
        if (st.op != ".word") parse_error(line_no, "only .word is allowed in the data section");
        data_loc_ += static_cast<std::uint32_t>(st.size * 4);
        if (data_loc_ > kDataRamBytes) {
          fail(ErrorCode::ProgramTooLarge, "line " + std::to_string(line_no) + ": data exceeds 8 KiB");
        }
      } else {
        auto& n = hart_count_[static_cast<std::size_t>(hart_)];
        n += static_cast<std::size_t>(st.size);
        if (n > kHartRegionInstrs) {
          fail(ErrorCode::ProgramTooLarge, "line " + std::to_string(line_no) + ": hart " +
                                                std::to_string(hart_) + " exceeds " +
                                                std::to_string(kHartRegionInstrs) + " instructions");
        }
      }
      stmts_.push_back(std::move(st));
    }
  }

  void need(const Stmt& s, std::size_t n) const {
    if (s.args.size() != n) {
      parse_error(s.line, s.op + " takes " + std::to_string(n) + " operand" + (n == 1 ? "" : "s"));
    }
  }

  std::int32_t branch_offset(const std::string& text, const Stmt& s, std::uint32_t pc) const {
    bool uses_label = false;
    const std::int64_t v = *eval(text, s.line, uses_label, false);
    return static_cast<std::int32_t>(uses_label ? v - static_cast<std::int64_t>(pc) : v);
  }

  std::uint32_t enc(const Instr& in, const Stmt& s) const {
    try {
      return encode(in);
    } catch (const Error& e) {
      fail(e.code(), "line " + std::to_string(s.line) + ": " + e.what());
    }
  }

  static Instr mk(Op op, int rd, int rs1, int rs2, std::int64_t imm, std::uint16_t csr = 0) {
    Instr in;
    in.op = op;
    in.rd = static_cast<std::uint8_t>(rd);
    in.rs1 = static_cast<std::uint8_t>(rs1);
    in.rs2 = static_cast<std::uint8_t>(rs2);
    in.imm = static_cast<std::int32_t>(imm);
    in.csr = csr;
    return in;
  }

  std::vector<Instr> expand(const Stmt& s, std::uint32_t pc) const {
    const std::string& o = s.op;
    const auto& a = s.args;
    auto r = [&](std::size_t i) { return reg(a[i], s.line); };
    auto v = [&](std::size_t i) { return value(a[i], s.line); };

    static const std::unordered_map<std::string, Op> r_ops{
        {"add", Op::ADD}, {"sub", Op::SUB}, {"sll", Op::SLL}, {"slt", Op::SLT}, {"sltu", Op::SLTU},
        {"xor", Op::XOR}, {"srl", Op::SRL}, {"sra", Op::SRA}, {"or", Op::OR},   {"and", Op::AND}};
    static const std::unordered_map<std::string, Op> i_ops{
        {"addi", Op::ADDI}, {"slti", Op::SLTI}, {"sltiu", Op::SLTIU}, {"xori", Op::XORI},
        {"ori", Op::ORI},   {"andi", Op::ANDI}, {"slli", Op::SLLI},   {"srli", Op::SRLI},
        {"srai", Op::SRAI}};
    static const std::unordered_map<std::string, Op> load_ops{
        {"lb", Op::LB}, {"lh", Op::LH}, {"lw", Op::LW}, {"lbu", Op::LBU}, {"lhu", Op::LHU}};
    static const std::unordered_map<std::string, Op> store_ops{{"sb", Op::SB}, {"sh", Op::SH}, {"sw", Op::SW}};
    static const std::unordered_map<std::string, Op> br_ops{
        {"beq", Op::BEQ}, {"bne", Op::BNE}, {"blt", Op::BLT}, {"bge", Op::BGE}, {"bltu", Op::BLTU}, {"bgeu", Op::BGEU}};
    static const std::unordered_map<std::string, Op> csr_ops{
        {"csrrw", Op::CSRRW}, {"csrrs", Op::CSRRS}, {"csrrc", Op::CSRRC},
        {"csrrwi", Op::CSRRWI}, {"csrrsi", Op::CSRRSI}, {"csrrci", Op::CSRRCI}};

    if (auto it = r_ops.find(o); it != r_ops.end()) {
      need(s, 3);
      return {mk(it->second, r(0), r(1), r(2), 0)};
    }
    if (auto it = i_ops.find(o); it != i_ops.end()) {
      need(s, 3);
      return {mk(it->second, r(0), r(1), 0, v(2))};
    }
    if (auto it = load_ops.find(o); it != load_ops.end()) {
      need(s, 2);
      auto [off, base] = mem_operand(a[1], s.line);
      return {mk(it->second, r(0), base, 0, off)};
    }
    if (auto it = store_ops.find(o); it != store_ops.end()) {
      need(s, 2);
      auto [off, base] = mem_operand(a[1], s.line);
      return {mk(it->second, 0, base, r(0), off)};
    }
    if (auto it = br_ops.find(o); it != br_ops.end()) {
      need(s, 3);
      return {mk(it->second, 0, r(0), r(1), branch_offset(a[2], s, pc))};
    }
    if (auto it = csr_ops.find(o); it != csr_ops.end()) {
      need(s, 3);
      const bool imm_form = o.back() == 'i';
      if (imm_form) return {mk(it->second, r(0), 0, 0, v(2), csr(a[1], s.line))};
      return {mk(it->second, r(0), r(2), 0, 0, csr(a[1], s.line))};
    }
    if (o == "lui" || o == "auipc") {
      need(s, 2);
      return {mk(o == "lui" ? Op::LUI : Op::AUIPC, r(0), 0, 0, v(1))};
    }
    if (o == "jal") {
      if (a.size() == 1) return {mk(Op::JAL, 1, 0, 0, branch_offset(a[0], s, pc))};
      need(s, 2);
      return {mk(Op::JAL, r(0), 0, 0, branch_offset(a[1], s, pc))};
    }
    if (o == "jalr") {
      if (a.size() == 1) return {mk(Op::JALR, 1, r(0), 0, 0)};
      need(s, 2);
      auto [off, base] = mem_operand(a[1], s.line);
      return {mk(Op::JALR, r(0), base, 0, off)};
    }
    if (o == "ecall" || o == "ebreak" || o == "mret" || o == "fence" || o == "nop" || o == "ret") {
      if (o != "fence") need(s, 0);
      if (o == "ecall") return {mk(Op::ECALL, 0, 0, 0, 0)};
      if (o == "ebreak") return {mk(Op::EBREAK, 0, 0, 0, 0)};
      if (o == "mret") return {mk(Op::MRET, 0, 0, 0, 0)};
      if (o == "fence") return {mk(Op::FENCE, 0, 0, 0, 0)};
      if (o == "nop") return {mk(Op::ADDI, 0, 0, 0, 0)};
      return {mk(Op::JALR, 0, 1, 0, 0)};
    }
    // Pseudo-instructions.
    if (o == "li" || o == "la") {
      need(s, 2);
      const std::int64_t val = v(1);
      if (val < INT32_MIN || val > UINT32_MAX) {
        fail(ErrorCode::RangeError, "line " + std::to_string(s.line) + ": " + o + " value out of 32-bit range");
      }
      const auto x = static_cast<std::int32_t>(static_cast<std::uint32_t>(val));
      if (s.size == 1) return {mk(Op::ADDI, r(0), 0, 0, x)};
      const std::uint32_t hi = ((static_cast<std::uint32_t>(x) + 0x800u) >> 12) & 0xFFFFFu;
      const std::int32_t lo = static_cast<std::int32_t>(static_cast<std::uint32_t>(x) - (hi << 12));
      return {mk(Op::LUI, r(0), 0, 0, hi), mk(Op::ADDI, r(0), r(0), 0, lo)};
    }
    if (o == "mv") { need(s, 2); return {mk(Op::ADDI, r(0), r(1), 0, 0)}; }
    if (o == "not") { need(s, 2); return {mk(Op::XORI, r(0), r(1), 0, -1)}; }
    if (o == "neg") { need(s, 2); return {mk(Op::SUB, r(0), 0, r(1), 0)}; }
    if (o == "seqz") { need(s, 2); return {mk(Op::SLTIU, r(0), r(1), 0, 1)}; }
    if (o == "snez") { need(s, 2); return {mk(Op::SLTU, r(0), 0, r(1), 0)}; }
    if (o == "j") { need(s, 1); return {mk(Op::JAL, 0, 0, 0, branch_offset(a[0], s, pc))}; }
    if (o == "call") { need(s, 1); return {mk(Op::JAL, 1, 0, 0, branch_offset(a[0], s, pc))}; }
    if (o == "jr") { need(s, 1); return {mk(Op::JALR, 0, r(0), 0, 0)}; }
    if (o == "beqz" || o == "bnez" || o == "bltz" || o == "bgez") {
      need(s, 2);
      const Op op = o == "beqz" ? Op::BEQ : o == "bnez" ? Op::BNE : o == "bltz" ? Op::BLT : Op::BGE;
      return {mk(op, 0, r(0), 0, branch_offset(a[1], s, pc))};
    }
    if (o == "blez" || o == "bgtz") {
      need(s, 2);
      return {mk(o == "blez" ? Op::BGE : Op::BLT, 0, 0, r(0), branch_offset(a[1], s, pc))};
    }
    if (o == "bgt" || o == "ble" || o == "bgtu" || o == "bleu") {
      need(s, 3);
      const Op op = o == "bgt" ? Op::BLT : o == "ble" ? Op::BGE : o == "bgtu" ? Op::BLTU : Op::BGEU;
      return {mk(op, 0, r(1), r(0), branch_offset(a[2], s, pc))};
    }
    if (o == "csrr") { need(s, 2); return {mk(Op::CSRRS, r(0), 0, 0, 0, csr(a[1], s.line))}; }
    if (o == "csrw" || o == "csrs" || o == "csrc") {
      need(s, 2);
      const Op op = o == "csrw" ? Op::CSRRW : o == "csrs" ? Op::CSRRS : Op::CSRRC;
      return {mk(op, 0, r(1), 0, 0, csr(a[0], s.line))};
    }
    if (o == "csrwi" || o == "csrsi" || o == "csrci") {
      need(s, 2);
      const Op op = o == "csrwi" ? Op::CSRRWI : o == "csrsi" ? Op::CSRRSI : Op::CSRRCI;
      return {mk(op, 0, 0, 0, v(1), csr(a[0], s.line))};
    }
    parse_error(s.line, "unknown instruction '" + o + "'");
  }

  void emit(const Stmt& s, AssembledProgram& out) const {
    if (s.op == ".word") {
      for (std::size_t i = 0; i < s.args.size(); ++i) {
        const std::int64_t v = value(s.args[i], s.line);
        if (v < INT32_MIN || v > UINT32_MAX) {
          fail(ErrorCode::RangeError, "line " + std::to_string(s.line) + ": .word value out of range");
        }
        const auto w = static_cast<std::uint32_t>(v);
        const std::uint32_t addr = s.address + static_cast<std::uint32_t>(4 * i);
        if (s.hart < 0) {
          for (int b = 0; b < 4; ++b) out.data[addr + static_cast<std::uint32_t>(b)] = static_cast<std::uint8_t>(w >> (8 * b));
        } else {
          out.instructions[addr / 4] = w;
        }
      }
      return;
    }
    const std::vector<Instr> ins = expand(s, s.address);
    if (static_cast<int>(ins.size()) != s.size) parse_error(s.line, "internal size mismatch");
    for (std::size_t i = 0; i < ins.size(); ++i) {
      out.instructions[s.address / 4 + i] = enc(ins[i], s);
    }
  }
};

}  // namespace

AssembledProgram assemble(std::string_view source) { return Assembler{}.run(source); }

}  // namespace mvusim
