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

#include "mvusim/cli.hpp"

#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <omp.h>

#include "mvusim/assembler.hpp"
#include "mvusim/codegen.hpp"
#include "mvusim/error.hpp"
#include "mvusim/ir.hpp"
#include "mvusim/machine.hpp"
#include "mvusim/oracle.hpp"
#include "mvusim/perf.hpp"

namespace mvusim {

std::pair<int, int> parse_precision_pair(const std::string& text) {
  const auto slash = text.find('/');
  int w = 0, a = 0;
  try {
    if (slash == std::string::npos) throw std::invalid_argument("no slash");
    std::size_t used = 0;
    w = std::stoi(text.substr(0, slash), &used);
    if (used != slash) throw std::invalid_argument("trailing");
    a = std::stoi(text.substr(slash + 1), &used);
    if (used != text.size() - slash - 1) throw std::invalid_argument("trailing");
  } catch (const std::logic_error&) {
    fail(ErrorCode::OutOfRange, "precision must look like W/A, got '" + text + "'");
  }
  Precision::make(w, false);
  Precision::make(a, false);
  return {w, a};
}

namespace {

ModelIR load_with_precision(const std::string& path, const std::string& precision) {
  ModelIR m = load_model(path);
  if (!precision.empty()) {
    const auto [w, a] = parse_precision_pair(precision);
    m = with_precision(m, w, a);
  }
  return m;
}

CycleReport simulation_report(const CompiledProgram& prog, const SimulationResult& r) {
  std::vector<LayerCycleEntry> layers;
  for (const LayerCycles& l : r.layers) layers.push_back({l.name, l.interior, l.edge});
  return make_report(prog.model_name, std::move(layers), prog.clock_mhz * 1e6);
}

std::string mismatch_summary(const Tensor& want, const Tensor& got) {
  if (want.shape != got.shape) return "shape differs";
  std::size_t bad = 0, first = want.values.size();
  for (std::size_t i = 0; i < want.values.size(); ++i) {
    if (want.values[i] != got.values[i]) {
      if (bad++ == 0) first = i;
    }
  }
  if (bad == 0) return {};
  return std::to_string(bad) + " of " + std::to_string(want.values.size()) + " values differ, first at " +
         std::to_string(first) + " (oracle " + std::to_string(want.values[first]) + ", simulator " +
         std::to_string(got.values[first]) + ")";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bit-serial accelerator simulator and compiler", "mvusim"};
  app.require_subcommand(1);

  std::string model_path, dir, mode = "pipelined", precision, input_path, trace_path, output_path, report_path,
                                   asm_path, bin_path, data_path, kernel = "parallel";
  double clock_mhz = 0;
  std::uint64_t seed = 1;
  int trials = 10;
  bool json_out = false;

  auto* c_compile = app.add_subcommand("compile", "lower a ModelIR file to a program directory");
  c_compile->add_option("model", model_path, "ModelIR JSON")->required();
  c_compile->add_option("--mode", mode, "pipelined | distributed");
  c_compile->add_option("--out", dir, "output directory")->required();
  c_compile->add_option("--precision", precision, "override every layer to W/A bits");

  auto* c_sim = app.add_subcommand("simulate", "run a compiled program");
  c_sim->add_option("dir", dir, "program directory")->required();
  c_sim->add_option("--input", input_path, "input tensor (.bin with .json sidecar)")->required();
  c_sim->add_option("--output", output_path, "output tensor path (default <dir>/output.bin)");
  c_sim->add_option("--report", report_path, "cycle report JSON (default <dir>/report.json)");
  c_sim->add_option("--trace", trace_path, "controller trace file");
  c_sim->add_option("--kernel", kernel, "MVP kernel: parallel | serial");

  auto* c_est = app.add_subcommand("estimate", "closed-form cycle estimate");
  c_est->add_option("model", model_path, "ModelIR JSON")->required();
  c_est->add_option("--clock-mhz", clock_mhz, "clock (default: model's clock_mhz)");
  c_est->add_option("--precision", precision, "override every layer to W/A bits");
  c_est->add_flag("--json", json_out, "print JSON instead of the table");

  auto* c_ver = app.add_subcommand("verify", "random inputs through oracle and simulator");
  c_ver->add_option("model", model_path, "ModelIR JSON")->required();
  c_ver->add_option("--seed", seed, "first input seed");
  c_ver->add_option("--trials", trials, "number of inputs");
  c_ver->add_option("--mode", mode, "pipelined | distributed");
  c_ver->add_option("--precision", precision, "override every layer to W/A bits");

  auto* c_in = app.add_subcommand("input", "write a random input tensor for a model");
  c_in->add_option("model", model_path, "ModelIR JSON")->required();
  c_in->add_option("--seed", seed, "seed");
  c_in->add_option("--precision", precision, "override every layer to W/A bits");
  c_in->add_option("--out", output_path, "tensor path")->required();

  auto* c_asm = app.add_subcommand("asm", "assemble a controller program");
  c_asm->add_option("source", asm_path, "assembly file")->required();
  c_asm->add_option("--out", bin_path, "instruction RAM image")->required();
  c_asm->add_option("--data", data_path, "data RAM image");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "ERROR UsageError: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*c_compile) {
      const ModelIR m = load_with_precision(model_path, precision);
      const CompiledProgram prog = compile(m, parse_mode(mode));
      write_program(prog, dir);
      out << "compiled " << m.name << " (" << m.layers.size() << " layers, " << prog.schedule.size() << " jobs, "
          << prog.laps << " lap" << (prog.laps == 1 ? "" : "s") << ", " << mode << ") -> " << dir << '\n';
      return 0;
    }
    if (*c_sim) {
      const CompiledProgram prog = read_program(dir);
      const Tensor input = read_tensor(input_path);
      std::ofstream trace;
      if (!trace_path.empty()) {
        trace.open(trace_path);
        if (!trace) fail(ErrorCode::IoError, "cannot write " + trace_path);
      }
      if (kernel != "parallel" && kernel != "serial") fail(ErrorCode::SchemaError, "unknown kernel '" + kernel + "'");
      const SimulationResult r = simulate(prog, input, trace_path.empty() ? nullptr : &trace,
                                          kernel == "serial" ? KernelKind::Serial : KernelKind::Parallel);
      const std::filesystem::path opath = output_path.empty() ? std::filesystem::path(dir) / "output.bin" : std::filesystem::path(output_path);
      write_tensor(opath, r.output);
      const CycleReport rep = simulation_report(prog, r);
      nlohmann::json j = report_to_json(rep);
      j["machine_cycles"] = r.machine_cycles;
      j["mvp_cycles"] = r.mvp_cycles;
      const std::filesystem::path rpath = report_path.empty() ? std::filesystem::path(dir) / "report.json" : std::filesystem::path(report_path);
      std::ofstream(rpath) << j.dump(2) << '\n';
      out << report_table(rep);
      out << "machine cycles: " << r.machine_cycles << ", output -> " << opath.string() << '\n';
      return 0;
    }
    if (*c_est) {
      const ModelIR m = load_with_precision(model_path, precision);
      const CycleReport rep = estimate_model(m, (clock_mhz > 0 ? clock_mhz : m.clock_mhz) * 1e6);
      if (json_out) out << report_to_json(rep).dump(2) << '\n';
      else out << report_table(rep);
      return 0;
    }
    if (*c_in) {
      const ModelIR m = load_with_precision(model_path, precision);
      write_tensor(output_path, random_input(m, seed));
      return 0;
    }
    if (*c_asm) {
      std::ifstream in(asm_path);
      if (!in) fail(ErrorCode::IoError, "cannot read " + asm_path);
      const std::string src((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      const AssembledProgram p = assemble(src);
      std::ofstream bin(bin_path, std::ios::binary);
      if (!bin) fail(ErrorCode::IoError, "cannot write " + bin_path);
      for (std::uint32_t w : p.instructions)
        for (int b = 0; b < 4; ++b) bin.put(static_cast<char>((w >> (8 * b)) & 0xFF));
      if (!data_path.empty()) {
        std::ofstream d(data_path, std::ios::binary);
        if (!d) fail(ErrorCode::IoError, "cannot write " + data_path);
        d.write(reinterpret_cast<const char*>(p.data.data()), static_cast<std::streamsize>(p.data.size()));
      }
      std::size_t total = 0;
      for (std::size_t n : p.hart_sizes) total += n;
      out << "assembled " << total << " instructions\n";
      return 0;
    }
    if (*c_ver) {
      const ModelIR m = load_with_precision(model_path, precision);
      const CompiledProgram prog = compile(m, parse_mode(mode));
      if (trials < 1) fail(ErrorCode::OutOfRange, "--trials must be positive");
      std::vector<std::string> failures(static_cast<std::size_t>(trials));
      std::optional<Error> error;
      std::mutex mu;
#pragma omp parallel for schedule(dynamic)
      for (int t = 0; t < trials; ++t) {
        try {
          const Tensor input = random_input(m, seed + static_cast<std::uint64_t>(t));
          const Tensor want = oracle_infer(m, input).back();
          const Tensor got = simulate(prog, input).output;
          failures[static_cast<std::size_t>(t)] = mismatch_summary(want, got);
        } catch (const Error& e) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = e;
        }
      }
      if (error) throw *error;
      int bad = 0;
      for (int t = 0; t < trials; ++t) {
        const std::string& f = failures[static_cast<std::size_t>(t)];
        if (f.empty()) continue;
        ++bad;
        err << "ERROR Mismatch: seed " << seed + static_cast<std::uint64_t>(t) << ": " << f << '\n';
      }
      out << "verify " << m.name << " " << mode << ": " << trials - bad << "/" << trials << " trials bit-exact\n";
      return bad ? 1 : 0;
    }
  } catch (const Error& e) {
    err << "ERROR " << to_string(e.code()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "ERROR Internal: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace mvusim
