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

// Acceptance run: one line per primary criterion, tolerances pinned below.
#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvusim/bitserial.hpp"
#include "mvusim/codegen.hpp"
#include "mvusim/error.hpp"
#include "mvusim/ir.hpp"
#include "mvusim/machine.hpp"
#include "mvusim/oracle.hpp"
#include "mvusim/perf.hpp"
#include "mvusim/pito.hpp"
#include "pito_programs.hpp"
#include "ref_rv32i.hpp"

using namespace mvusim;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and sizes.
constexpr std::uint64_t kCycleTolerance = 0;
constexpr double kEstimateSeconds = 60;
constexpr double kSimulateSeconds = 600;
constexpr double kMatrixSeconds = 900;
constexpr int kBitserialCasesPerCombo = 10;  // 16*16*4 combos -> 10240 cases
constexpr int kConformancePrograms = 300;
constexpr std::uint64_t kFairnessCycles = 1'000'000;
constexpr int kRoundTrips = 1000;
constexpr int kMatrixTrials = 2;
constexpr int kMaxConstantCells = 4;

const std::vector<std::uint64_t> kResnet9Table = {34560, 34560, 17280, 32256, 16128, 27648, 13824, 18432};
constexpr std::uint64_t kResnet9Total = 194688;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::filesystem::path model(const std::string& name) { return std::filesystem::path(MVUSIM_MODELS_DIR) / name; }

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string join(const std::vector<std::uint64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::uint64_t diff(std::uint64_t a, std::uint64_t b) { return a > b ? a - b : b - a; }

Outcome resnet9_cycles() {
  auto t0 = Clock::now();
  const ModelIR m = load_model(model("resnet9.json"));
  const CycleReport est = estimate_model(m, m.clock_mhz * 1e6);
  const double est_s = seconds_since(t0);

  t0 = Clock::now();
  const Tensor in = random_input(m, 1);
  const SimulationResult sim = simulate(compile(m, Mode::Pipelined), in);
  const double sim_s = seconds_since(t0);

  std::vector<std::uint64_t> e, s;
  for (const auto& l : est.per_layer) e.push_back(l.cycles);
  for (const auto& l : sim.layers) s.push_back(l.interior);
  bool ok = e.size() == kResnet9Table.size() && s.size() == kResnet9Table.size();
  std::uint64_t sim_total = 0;
  for (std::size_t i = 0; ok && i < kResnet9Table.size(); ++i) {
    ok = diff(e[i], kResnet9Table[i]) <= kCycleTolerance && diff(s[i], kResnet9Table[i]) <= kCycleTolerance;
    sim_total += s[i];
  }
  ok = ok && diff(est.total_cycles, kResnet9Total) <= kCycleTolerance &&
       diff(sim_total, kResnet9Total) <= kCycleTolerance && est_s < kEstimateSeconds && sim_s < kSimulateSeconds;
  return {ok, "estimate {" + join(e) + "} total " + std::to_string(est.total_cycles) + "; simulate {" + join(s) +
                  "} total " + std::to_string(sim_total) + "; " + std::to_string(est_s).substr(0, 5) + " s / " +
                  std::to_string(sim_s).substr(0, 5) + " s"};
}

Outcome tile_cost_law() {
  const ModelIR base = load_model(model("gemv64.json"));
  int good = 0, bad = 0;
  std::string first_bad;
  for (int a = 1; a <= 8; ++a) {
    for (int w = 1; w <= 8; ++w) {
      const ModelIR m = with_precision(base, w, a);
      const Tensor in = random_input(m, static_cast<std::uint64_t>(a * 8 + w));
      const SimulationResult r = simulate(compile(m, Mode::Pipelined), in);
      const bool ok = diff(r.mvp_cycles, static_cast<std::uint64_t>(a * w)) <= kCycleTolerance &&
                      r.output == oracle_infer(m, in).back();
      (ok ? good : bad)++;
      if (!ok && first_bad.empty()) {
        first_bad = " first failure at " + std::to_string(a) + "/" + std::to_string(w) + ": " +
                    std::to_string(r.mvp_cycles) + " cycles";
      }
    }
  }
  return {bad == 0, std::to_string(good) + "/64 (b_a,b_w) pairs give b_a*b_w MVP cycles" + first_bad};
}

Outcome bitserial_exactness() {
  std::mt19937_64 rng(2024);
  std::uint64_t cases = 0, mismatches = 0;
  for (int ba = 1; ba <= 16; ++ba) {
    for (int bw = 1; bw <= 16; ++bw) {
      for (int s = 0; s < 4; ++s) {
        const Precision pa = Precision::make(ba, s & 1), pw = Precision::make(bw, (s & 2) != 0);
        std::uniform_int_distribution<std::int64_t> da(pa.min(), pa.max()), dw(pw.min(), pw.max());
        for (int c = 0; c < kBitserialCasesPerCombo; ++c) {
          std::vector<std::int64_t> x(kLanes), w(kLanes);
          std::int64_t want = 0;
          for (std::size_t l = 0; l < kLanes; ++l) {
            x[l] = da(rng);
            w[l] = dw(rng);
            want += x[l] * w[l];
          }
          ++cases;
          mismatches += bitserial_dot(transpose(x, pa), transpose(w, pw)) != want;
        }
      }
    }
  }
  std::uint64_t lane_cases = 0;
  for (int s = 0; s < 4; ++s) {
    const Precision pa = Precision::make(3, s & 1), pw = Precision::make(3, (s & 2) != 0);
    for (std::int64_t a = pa.min(); a <= pa.max(); ++a) {
      for (std::int64_t b = pw.min(); b <= pw.max(); ++b) {
        std::vector<std::int64_t> x(kLanes, 0), w(kLanes, 0);
        x[0] = a;
        w[0] = b;
        ++lane_cases;
        mismatches += bitserial_dot(transpose(x, pa), transpose(w, pw)) != a * b;
      }
    }
  }
  return {cases >= 10000 && mismatches == 0,
          std::to_string(cases) + " random cases (1..16 bits, 4 signedness combos) + " + std::to_string(lane_cases) +
              " exhaustive 3/3 single-lane cases, " + std::to_string(mismatches) + " mismatches"};
}

Outcome end_to_end_matrix() {
  std::vector<std::string> names = {"gemv64.json"};
  for (const auto& e : std::filesystem::directory_iterator(model("verify"))) {
    if (e.path().extension() == ".json") names.push_back("verify/" + e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  const std::vector<std::pair<int, int>> precisions = {{1, 1}, {1, 2}, {2, 2}, {4, 4}, {8, 8}};
  struct Cell {
    std::string name;
    Mode mode;
    std::pair<int, int> prec;
    bool ok = false;
    bool constant = false;
    std::string error;
  };
  std::vector<Cell> cells;
  for (const auto& n : names) {
    for (Mode mode : {Mode::Pipelined, Mode::Distributed}) {
      for (auto p : precisions) cells.push_back({n, mode, p});
    }
  }
  const auto t0 = Clock::now();
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < cells.size(); ++i) {
    Cell& c = cells[i];
    try {
      const ModelIR m = with_precision(load_model(model(c.name)), c.prec.first, c.prec.second);
      const CompiledProgram prog = compile(m, c.mode);
      std::set<std::int64_t> values;
      bool ok = true;
      for (int t = 0; t < kMatrixTrials; ++t) {
        const Tensor in = random_input(m, static_cast<std::uint64_t>(t + 1));
        const Tensor want = oracle_infer(m, in).back();
        const Tensor got = simulate(prog, in).output;
        ok = ok && want == got;
        values.insert(got.values.begin(), got.values.end());
      }
      c.ok = ok;
      c.constant = values.size() < 2;
    } catch (const Error& e) {
      c.error = std::string(to_string(e.code())) + ": " + e.what();
    }
  }
  const double secs = seconds_since(t0);
  int pass = 0, constant = 0;
  std::string failures, constants;
  for (const Cell& c : cells) {
    const std::string tag = c.name + " " + std::string(to_string(c.mode)) + " " + std::to_string(c.prec.first) + "/" +
                            std::to_string(c.prec.second);
    if (c.ok) {
      ++pass;
    } else if (failures.size() < 200) {
      failures += "; FAILED " + tag + (c.error.empty() ? "" : " (" + c.error + ")");
    }
    if (c.ok && c.constant) {
      ++constant;
      constants += (constants.empty() ? "" : ", ") + tag;
    }
  }
  const bool ok = names.size() >= 12 && pass == static_cast<int>(cells.size()) && constant <= kMaxConstantCells &&
                  secs < kMatrixSeconds;
  return {ok, std::to_string(pass) + "/" + std::to_string(cells.size()) + " cells bit-exact (" +
                  std::to_string(names.size()) + " models x 2 modes x 5 precisions x " + std::to_string(kMatrixTrials) +
                  " inputs) in " + std::to_string(static_cast<int>(secs)) + " s; constant-output cells: " +
                  std::to_string(constant) + (constants.empty() ? "" : " [" + constants + "]") + failures};
}

Outcome fps_scaling() {
  const ModelIR m = load_model(model("cnv.json"));
  const double hz = m.clock_mhz * 1e6;
  const CycleReport r11 = estimate_model(with_precision(m, 1, 1), hz);
  const CycleReport r12 = estimate_model(with_precision(m, 1, 2), hz);
  const CycleReport r22 = estimate_model(with_precision(m, 2, 2), hz);
  const bool table = fps_scaling_check(61035, 1, 2) == 30517 && fps_scaling_check(61035, 2, 2) == 15258 &&
                     fps_scaling_check(61035, 1, 1) == 61035;
  const bool ratio = r12.fps_pipelined == r11.fps_pipelined / 2 && r22.fps_pipelined == r11.fps_pipelined / 4 &&
                     r12.fps_single == r11.fps_single / 2 && r22.fps_single == r11.fps_single / 4;
  return {table && ratio, "CNV-like pipelined fps " + std::to_string(r11.fps_pipelined) + " : " +
                              std::to_string(r12.fps_pipelined) + " : " + std::to_string(r22.fps_pipelined) +
                              " (1/1 : 1/2 : 2/2); 61035 -> " + std::to_string(fps_scaling_check(61035, 1, 2)) +
                              " : " + std::to_string(fps_scaling_check(61035, 2, 2))};
}

Outcome barrel_processor() {
  using namespace pito_programs;
  std::mt19937_64 rng(33);
  int programs_ok = 0;
  std::map<std::string, std::uint64_t> coverage;
  auto category = [](Op op) -> const char* {
    switch (op) {
      case Op::ADD: case Op::SUB: case Op::ADDI: case Op::LUI: case Op::AUIPC: return "arith";
      case Op::BEQ: case Op::BNE: case Op::BLT: case Op::BGE: case Op::BLTU: case Op::BGEU:
      case Op::JAL: case Op::JALR: return "branch";
      case Op::LB: case Op::LH: case Op::LW: case Op::LBU: case Op::LHU: return "load";
      case Op::SB: case Op::SH: case Op::SW: return "store";
      case Op::CSRRW: case Op::CSRRS: case Op::CSRRC: case Op::CSRRWI: case Op::CSRRSI: case Op::CSRRCI: return "csr";
      default: return "logic";
    }
  };
  for (int prog = 0; prog < kConformancePrograms; ++prog) {
    const int n = 40;
    std::vector<std::uint32_t> img = halted_image();
    std::vector<std::uint32_t> body;
    for (int i = 0; i < n; ++i) {
      const Instr in = random_instr(rng, static_cast<std::uint32_t>(4 * i), static_cast<std::uint32_t>(4 * n));
      body.push_back(encode(in));
    }
    std::copy(body.begin(), body.end(), img.begin());
    img[n] = kEbreak;
    Pito cpu;
    cpu.load_instructions(img);
    ref::Cpu r;
    for (int i = 1; i < 32; ++i) {
      const auto v = static_cast<std::uint32_t>(rng());
      r.x[i] = v;
      cpu.hart(0).regs[i] = v;
    }
    std::vector<std::uint8_t> mem(kDataRamBytes);
    for (auto& b : mem) b = static_cast<std::uint8_t>(rng());
    cpu.load_data(mem);
    r.mem = mem;
    bool ok = true;
    while (ok && r.pc < static_cast<std::uint32_t>(4 * n)) {
      ++coverage[category(decode(body[r.pc / 4]).op)];
      r.step(body[r.pc / 4]);
      cpu.run(8);
      ok = cpu.hart(0).pc == r.pc;
      for (int i = 0; ok && i < 32; ++i) ok = cpu.hart(0).regs[i] == r.x[i];
    }
    ok = ok && std::equal(r.mem.begin(), r.mem.end(), cpu.data_ram().begin()) &&
         cpu.csr_access(0, kCsrMscratch, CsrOp::Read, 0) == r.csr[kCsrMscratch] &&
         cpu.csr_access(0, kCsrMcause, CsrOp::Read, 0) == r.csr[kCsrMcause];
    programs_ok += ok;
  }

  // Fairness: eight looping random programs, one retirement per hart per 8 cycles.
  std::vector<std::uint32_t> img(kInstrRamBytes / 4, 0);
  for (int h = 0; h < kHarts; ++h) {
    const int n = 20 + static_cast<int>(rng() % 100);
    const std::uint32_t base = static_cast<std::uint32_t>(h) * kHartRegionBytes;
    for (int i = 0; i < n; ++i) {
      const std::uint32_t pc = base + static_cast<std::uint32_t>(4 * i);
      Instr in = random_instr(rng, pc, base + static_cast<std::uint32_t>(4 * n));
      if (in.op == Op::JALR) in = mk(Op::JAL, in.rd, 0, 0, 4);
      img[pc / 4] = encode(in);
    }
    img[base / 4 + static_cast<std::uint32_t>(n)] = encode(mk(Op::JAL, 0, 0, 0, -4 * n));
  }
  Pito cpu;
  cpu.load_instructions(img);
  std::array<std::uint64_t, kHarts> last{};
  std::uint64_t violations = 0;
  for (std::uint64_t c = 0; c < kFairnessCycles; ++c) {
    const int h = static_cast<int>(c % kHarts);
    cpu.step();
    violations += cpu.hart(h).retired != last[h] + 1 || cpu.hart(h).regs[0] != 0;
    last[h] = cpu.hart(h).retired;
  }
  std::string cov;
  bool covered = true;
  for (const char* k : {"arith", "logic", "branch", "load", "store", "csr"}) {
    cov += std::string(cov.empty() ? "" : " ") + k + "=" + std::to_string(coverage[k]);
    covered = covered && coverage[k] > 0;
  }
  return {programs_ok == kConformancePrograms && covered && violations == 0,
          std::to_string(programs_ok) + "/" + std::to_string(kConformancePrograms) +
              " random programs match the reference interpreter (" + cov + "); " + std::to_string(kFairnessCycles) +
              " cycles, " + std::to_string(violations) + " fairness violations"};
}

Outcome format_round_trips() {
  std::mt19937_64 rng(77);
  int transpose_ok = 0, weights_ok = 0;
  for (int t = 0; t < kRoundTrips; ++t) {
    const Precision p = Precision::make(1 + static_cast<int>(rng() % 16), rng() % 2);
    const std::size_t width = 1 + rng() % kLanes, n = width * (1 + rng() % 8);
    std::uniform_int_distribution<std::int64_t> d(p.min(), p.max());
    std::vector<std::int64_t> v(n);
    for (auto& x : v) x = d(rng);
    transpose_ok += untranspose(transpose(v, p, width)) == v;
  }
  for (int t = 0; t < kRoundTrips; ++t) {
    const int bits = 1 + static_cast<int>(rng() % 8);
    const bool is_signed = rng() % 2;
    const int ci = 1 + static_cast<int>(rng() % 140), co = 1 + static_cast<int>(rng() % 140);
    nlohmann::json layer;
    auto prec = [](int b, bool s) { return nlohmann::json{{"bits", b}, {"signed", s}}; };
    if (rng() % 3 == 0) {
      layer = {{"kind", "gemv"}, {"input_shape", {ci}}, {"output_shape", {co}}, {"kernel", {co, ci}}};
    } else {
      const int k = rng() % 2 ? 3 : 1;
      layer = {{"kind", "conv2d"},      {"input_shape", {1, 4, 4, ci}}, {"output_shape", {1, 4, 4, co}},
               {"kernel", {co, ci, k, k}}, {"padding", k / 2}};
    }
    layer["name"] = "l";
    layer["prec_a"] = prec(2, false);
    layer["prec_w"] = prec(bits, is_signed);
    layer["prec_out"] = prec(2, false);
    layer["weights"] = {{"seed", rng()}};
    layer["quant_msb"] = 8;
    const ModelIR m = parse_model({{"version", 1}, {"name", "rt"}, {"layers", nlohmann::json::array({layer})}});
    const LayerIR& l = m.layers[0];
    const TilePlan plan = tile_and_pad(l);
    const auto image = export_weights(l, plan);
    weights_ok += image.size() == plan.rows() * kLanes && import_weights(image, l, plan) == l.weights;
  }
  return {transpose_ok == kRoundTrips && weights_ok == kRoundTrips,
          "transpose/untranspose " + std::to_string(transpose_ok) + "/" + std::to_string(kRoundTrips) +
              ", export_weights/inverse map " + std::to_string(weights_ok) + "/" + std::to_string(kRoundTrips)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"ResNet9 cycle reproduction", resnet9_cycles},
      {"Tile cost law", tile_cost_law},
      {"Bit-serial exactness", bitserial_exactness},
      {"End-to-end oracle equivalence", end_to_end_matrix},
      {"FPS scaling", fps_scaling},
      {"Barrel processor suite", barrel_processor},
      {"Format round trips", format_round_trips},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[PRIMARY] %s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
