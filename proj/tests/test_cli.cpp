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

#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mvusim/cli.hpp"
#include "mvusim/error.hpp"
#include "test_util.hpp"

using namespace mvusim;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("estimate prints the table") {
  const Run r = run({"estimate", testutil::model_path("resnet9.json").string()});
  CHECK(r.code == 0);
  std::string last = r.out.substr(0, r.out.find_last_not_of('\n') + 1);
  last = last.substr(last.rfind('\n') + 1);
  CHECK(last == "Total: 194688");
  const Run j = run({"estimate", testutil::model_path("resnet9.json").string(), "--json"});
  CHECK(j.code == 0);
  CHECK(nlohmann::json::parse(j.out).at("total_cycles") == 194688);
}

TEST_CASE("verify gemv64 over 100 trials") {
  const Run r = run({"verify", testutil::model_path("gemv64.json").string(), "--trials", "100"});
  CHECK(r.code == 0);
}

TEST_CASE("compile rejects a 5-D tensor") {
  const auto dir = std::filesystem::temp_directory_path() / "mvusim_cli_bad";
  const Run r = run({"compile", testutil::model_path("bad.json").string(), "--out", dir.string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("ERROR UnsupportedShape") != std::string::npos);
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"verify", testutil::model_path("gemv64.json").string(), "--mode", "sideways"}).code == 2);
  CHECK(run({"estimate", testutil::model_path("gemv64.json").string(), "--precision", "2x2"}).code == 2);
  CHECK(run({"estimate", "/nonexistent/model.json"}).err.find("ERROR IoError") != std::string::npos);
}

TEST_CASE("compile, input and simulate are deterministic") {
  const auto root = std::filesystem::temp_directory_path() / "mvusim_cli_flow";
  std::filesystem::remove_all(root);
  const std::string model = testutil::model_path("verify/conv_pool_relu.json").string();
  for (const char* d : {"a", "b"}) {
    const auto dir = root / d;
    REQUIRE(run({"compile", model, "--out", dir.string(), "--mode", "distributed"}).code == 0);
    REQUIRE(run({"input", model, "--seed", "5", "--out", (dir / "in.bin").string()}).code == 0);
    REQUIRE(run({"simulate", dir.string(), "--input", (dir / "in.bin").string()}).code == 0);
  }
  for (const char* f : {"program.asm", "schedule.json", "manifest.json", "weights_mvu3.bin", "in.bin", "output.bin",
                        "output.bin.json", "report.json"}) {
    CAPTURE(f);
    CHECK(std::filesystem::exists(root / "a" / f));
    CHECK(slurp(root / "a" / f) == slurp(root / "b" / f));
  }
  std::filesystem::remove_all(root);
}

TEST_CASE("asm writes an image") {
  const auto root = std::filesystem::temp_directory_path() / "mvusim_cli_asm";
  std::filesystem::create_directories(root);
  {
    std::ofstream(root / "p.s") << "addi x1, x0, 5\nebreak\n";
  }
  REQUIRE(run({"asm", (root / "p.s").string(), "--out", (root / "p.bin").string()}).code == 0);
  const std::string img = slurp(root / "p.bin");
  REQUIRE(img.size() >= 4);
  CHECK(static_cast<unsigned char>(img[0]) == 0x93);
  CHECK(static_cast<unsigned char>(img[1]) == 0x00);
  CHECK(static_cast<unsigned char>(img[2]) == 0x50);
  CHECK(static_cast<unsigned char>(img[3]) == 0x00);
  {
    std::ofstream(root / "bad.s") << "addi x1, x0\n";
  }
  const Run bad = run({"asm", (root / "bad.s").string(), "--out", (root / "p.bin").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("ERROR ParseError") != std::string::npos);
  std::filesystem::remove_all(root);
}

TEST_CASE("precision pairs") {
  CHECK(parse_precision_pair("2/4") == std::pair{2, 4});
  CHECK_THROWS_AS(parse_precision_pair("2"), Error);
  CHECK_THROWS_AS(parse_precision_pair("0/2"), Error);
  CHECK_THROWS_AS(parse_precision_pair("2/2x"), Error);
}
