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

#include <random>
#include <vector>

#include "doctest.h"
#include "mvusim/error.hpp"
#include "mvusim/mvu.hpp"

using namespace mvusim;

namespace {

std::int64_t bit_of(std::int64_t v, int b) { return (static_cast<std::uint64_t>(v) >> b) & 1u; }

// Writes a 64x64 tile W[v][l] (v = output row) at weight row `row`.
void put_weight_tile(MvuMemories& mem, std::uint32_t row, Precision p,
                     const std::vector<std::vector<std::int64_t>>& w) {
  for (int plane = 0; plane < p.bits; ++plane) {
    for (int v = 0; v < 64; ++v) {
      std::uint64_t word = 0;
      for (int l = 0; l < 64; ++l) {
        word |= static_cast<std::uint64_t>(bit_of(w[v][l], p.bits - 1 - plane)) << l;
      }
      mem.weight[(row + plane) * 64 + v] = word;
    }
  }
}

void put_act_block(MvuMemories& mem, std::uint32_t addr, Precision p,
                   const std::vector<std::int64_t>& x) {
  for (int plane = 0; plane < p.bits; ++plane) {
    std::uint64_t word = 0;
    for (int l = 0; l < 64; ++l) {
      word |= static_cast<std::uint64_t>(bit_of(x[l], p.bits - 1 - plane)) << l;
    }
    mem.activation[addr + plane] = word;
  }
}

std::vector<std::int64_t> rand_vec(std::mt19937_64& rng, Precision p, std::size_t n) {
  std::uniform_int_distribution<std::int64_t> d(p.min(), p.max());
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

JobDescriptor gemv_job(Precision pa, Precision pw, std::uint32_t in_blocks,
                       std::uint32_t out_blocks) {
  JobDescriptor j;
  j.act_prec = pa;
  j.weight_prec = pw;
  const std::uint32_t counts[] = {in_blocks, out_blocks};
  const std::int64_t astr[] = {pa.bits, 0};
  const std::int64_t wstr[] = {pw.bits, std::int64_t{in_blocks} * pw.bits};
  j.act_agu = agu_from_strides(0, counts, astr);
  j.weight_agu = agu_from_strides(0, counts, wstr);
  j.reduce_depth = 1;
  j.countdown = static_cast<std::uint32_t>(pa.bits * pw.bits) * in_blocks * out_blocks;
  const std::uint32_t oc[] = {out_blocks};
  const std::int64_t os[] = {32};
  j.output_agu = agu_from_strides(0, oc, os);
  j.quant_msb = 31;
  j.quant_bits = 32;
  return j;
}

}  // namespace

TEST_CASE("agu sequences") {
  AguConfig a;
  a.counts = {3, 0, 0, 0, 0};
  a.jumps = {1, 0, 0, 0, 0};
  a.base = 10;
  CHECK(agu_sequence(a, 100) == std::vector<std::uint32_t>{10, 11, 12});

  AguConfig b;
  b.counts = {2, 2, 0, 0, 0};
  b.jumps = {1, -1, 0, 0, 0};
  CHECK(agu_sequence(b, 100) == std::vector<std::uint32_t>{0, 1, 0, 1});

  CHECK_THROWS_AS(agu_sequence(a, 12), Error);
  AguConfig gap;
  gap.counts = {2, 0, 3, 0, 0};
  CHECK_THROWS_AS(agu_sequence(gap, 100), Error);
}

TEST_CASE("agu_from_strides matches a direct loop nest") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int levels = 1 + static_cast<int>(rng() % 5);
    std::vector<std::uint32_t> counts(levels);
    std::vector<std::int64_t> strides(levels);
    for (int l = 0; l < levels; ++l) {
      counts[l] = 1 + static_cast<std::uint32_t>(rng() % 4);
      strides[l] = static_cast<std::int64_t>(rng() % 13) - 4;
    }
    const std::uint32_t base = 1000;
    std::vector<std::uint32_t> want;
    std::vector<std::uint32_t> idx(levels, 0);
    std::size_t total = 1;
    for (auto c : counts) total *= c;
    for (std::size_t n = 0; n < total; ++n) {
      std::int64_t addr = base;
      std::size_t rem = n;
      for (int l = 0; l < levels; ++l) {
        addr += static_cast<std::int64_t>(rem % counts[l]) * strides[l];
        rem /= counts[l];
      }
      want.push_back(static_cast<std::uint32_t>(addr));
    }
    CHECK(agu_sequence(agu_from_strides(base, counts, strides), 1 << 20) == want);
  }
}

TEST_CASE("agu walk plus sequencer offsets reproduce the schedule's plane addresses") {
  // GEMV with 2 activation blocks at b_a=2, b_w=3: for every (j,k) the MVP
  // reads plane b_a-j of each activation block and plane b_w-k of each weight row.
  const Precision pa = Precision::make(2, false), pw = Precision::make(3, false);
  JobDescriptor j = gemv_job(pa, pw, 2, 3);
  MvuMemories mem;
  const MvpPlan plan = plan_mvp_job(mem, j);
  const BitSchedule sched = bit_combination_schedule(2, 3);
  for (std::size_t t = 0; t < 3; ++t) {
    for (const auto& g : sched) {
      for (const auto& p : g) {
        for (std::size_t r = 0; r < 2; ++r) {
          const std::size_t act_word = plan.act_addr[t * 2 + r] + (2 - p.act_bit);
          const std::size_t w_row = plan.weight_addr[t * 2 + r] + (3 - p.weight_bit);
          CHECK(act_word == r * 2 + (2 - p.act_bit));
          CHECK(w_row == (t * 2 + r) * 3 + (3 - p.weight_bit));
        }
      }
    }
  }
}

TEST_CASE("identity tile reproduces the activation bits in one cycle") {
  MvuMemories mem;
  const Precision p1 = Precision::make(1, false);
  std::vector<std::vector<std::int64_t>> eye(64, std::vector<std::int64_t>(64, 0));
  for (int i = 0; i < 64; ++i) eye[i][i] = 1;
  put_weight_tile(mem, 0, p1, eye);
  mem.activation[0] = 0xDEADBEEFCAFEF00Dull;
  JobDescriptor j = gemv_job(p1, p1, 1, 1);
  for (KernelKind k : {KernelKind::Serial, KernelKind::Parallel}) {
    const MvpResult r = run_mvp_job(mem, j, k);
    CHECK(r.cycles == 1);
    for (int v = 0; v < 64; ++v) CHECK(r.tiles[0][v] == static_cast<std::int64_t>(bit_of(0xDEADBEEFCAFEF00Dll, v)));
  }
}

TEST_CASE("gemv tiles match a plain matrix-vector product") {
  std::mt19937_64 rng(9);
  for (auto [in_b, out_b] : {std::pair<std::uint32_t, std::uint32_t>{1, 1}, {2, 2}, {3, 1}}) {
    for (auto [ba, bw, sa, sw] : {std::tuple{2, 2, false, true}, std::tuple{3, 5, true, true},
                                  std::tuple{8, 1, false, false}}) {
      const Precision pa = Precision::make(ba, sa), pw = Precision::make(bw, sw);
      MvuMemories mem;
      const auto x = rand_vec(rng, pa, 64 * in_b);
      std::vector<std::vector<std::int64_t>> w(64 * out_b);
      for (auto& row : w) row = rand_vec(rng, pw, 64 * in_b);
      for (std::uint32_t c = 0; c < in_b; ++c) {
        put_act_block(mem, c * pa.bits, pa, std::vector<std::int64_t>(x.begin() + c * 64, x.begin() + c * 64 + 64));
      }
      for (std::uint32_t o = 0; o < out_b; ++o) {
        for (std::uint32_t c = 0; c < in_b; ++c) {
          std::vector<std::vector<std::int64_t>> tile(64, std::vector<std::int64_t>(64));
          for (int v = 0; v < 64; ++v)
            for (int l = 0; l < 64; ++l) tile[v][l] = w[o * 64 + v][c * 64 + l];
          put_weight_tile(mem, (o * in_b + c) * pw.bits, pw, tile);
        }
      }
      const JobDescriptor j = gemv_job(pa, pw, in_b, out_b);
      const MvpResult serial = run_mvp_job(mem, j, KernelKind::Serial);
      const MvpResult par = run_mvp_job(mem, j, KernelKind::Parallel);
      CHECK(serial.cycles == static_cast<std::uint64_t>(ba * bw) * in_b * out_b);
      REQUIRE(serial.tiles.size() == out_b);
      for (std::uint32_t o = 0; o < out_b; ++o) {
        for (int v = 0; v < 64; ++v) {
          std::int64_t want = 0;
          for (std::size_t l = 0; l < x.size(); ++l) want += x[l] * w[o * 64 + v][l];
          CHECK(serial.tiles[o][v] == want);
          CHECK(par.tiles[o][v] == want);
        }
      }
    }
  }
}

TEST_CASE("tile cost law") {
  MvuMemories mem;
  for (int a = 1; a <= 8; ++a) {
    for (int w = 1; w <= 8; ++w) {
      const JobDescriptor j = gemv_job(Precision::make(a, false), Precision::make(w, false), 1, 1);
      CHECK(run_mvp_job(mem, j).cycles == static_cast<std::uint64_t>(a * w));
    }
  }
}

TEST_CASE("job validation") {
  const Precision p2 = Precision::make(2, false);
  MvuMemories mem;
  JobDescriptor j = gemv_job(p2, p2, 2, 1);
  j.countdown += 1;
  CHECK_THROWS_AS(validate_job(j), Error);
  j = gemv_job(p2, p2, 2, 1);
  j.act_agu.jumps[0] = 1;  // overlaps bit planes
  try {
    validate_job(j);
    FAIL("expected PrecisionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PrecisionMismatch);
  }
  j = gemv_job(p2, p2, 1, 1);
  j.act_agu.base = static_cast<std::uint32_t>(mem.config.activation_words - 1);
  try {
    run_mvp_job(mem, j);
    FAIL("expected AddressOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AddressOutOfRange);
  }
  j = gemv_job(p2, p2, 1, 1);
  j.quant_bits = 33;
  CHECK_THROWS_AS(validate_job(j), Error);
  j = gemv_job(p2, p2, 1, 1);
  j.dest_mask = 0;
  CHECK_THROWS_AS(validate_job(j), Error);
}

TEST_CASE("scaler") {
  CHECK(scaler_apply(5, 1, 0) == 5);
  CHECK(scaler_apply(-3, 4, 10) == -2);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t v = static_cast<std::int64_t>(rng() % (1 << 27)) - (1 << 26);
    const auto s = static_cast<std::uint16_t>(rng());
    const auto b = static_cast<std::int32_t>(rng());
    CHECK(scaler_apply(v, s, b) == v * s + b);
  }
  CHECK_THROWS_AS(scaler_apply(1 << 26, 1, 0), Error);
  CHECK_NOTHROW(scaler_apply(-(1 << 26), 1, 0));
}

TEST_CASE("pool relu") {
  CHECK(pool_relu(std::vector<std::int64_t>{-5, 3}, 2, true) == std::vector<std::int64_t>{3});
  CHECK(pool_relu(std::vector<std::int64_t>{-5, -3}, 2, true) == std::vector<std::int64_t>{0});
  CHECK(pool_relu(std::vector<std::int64_t>{-5, -3}, 2, false) == std::vector<std::int64_t>{-3});
  CHECK(pool_relu(std::vector<std::int64_t>{-5, 7, 2}, 1, true) ==
        std::vector<std::int64_t>{0, 7, 2});
  CHECK_THROWS_AS(pool_relu(std::vector<std::int64_t>{1, 2, 3}, 2, false), Error);
}

TEST_CASE("quantser") {
  CHECK(quantser(0b0110, 2, 2) == std::vector<std::uint8_t>{1, 1});
  CHECK(quantser(-1, 31, 4) == std::vector<std::uint8_t>{1, 1, 1, 1});
  CHECK_THROWS_AS(quantser(0, 2, 4), Error);
  CHECK_THROWS_AS(quantser(0, 32, 1), Error);

  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto v = static_cast<std::int32_t>(rng());
    const int msb = static_cast<int>(rng() % 32);
    const int bits = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(msb + 1));
    const auto got = quantser(v, msb, bits);
    std::int64_t val = 0;
    for (auto b : got) val = val * 2 + b;
    const std::int64_t want =
        (static_cast<std::int64_t>(v) >> (msb - bits + 1)) & ((std::int64_t{1} << bits) - 1);
    CHECK(val == want);
  }
}

TEST_CASE("pipeline writes bit-transposed words after each tile") {
  MvuMemories mem;
  const Precision p1 = Precision::make(1, false);
  std::vector<std::vector<std::int64_t>> ones(64, std::vector<std::int64_t>(64, 1));
  put_weight_tile(mem, 0, p1, ones);
  mem.activation[0] = 0xFFull;  // every output = 8
  JobDescriptor j = gemv_job(p1, p1, 1, 1);
  j.quant_msb = 3;
  j.quant_bits = 2;
  j.dest_base = 100;
  const MvpResult r = run_mvp_job(mem, j);
  const auto words = run_pipeline(mem, j, r);
  REQUIRE(words.size() == 2);
  CHECK(words[0].address == 100);
  CHECK(words[0].word == ~0ull);  // bit 3 of 8
  CHECK(words[1].word == 0);
  CHECK(words[0].ready_offset == 1);
  CHECK(words[1].ready_offset == 2);
}

TEST_CASE("interconnect priority") {
  std::vector<InterconnectPacket> one{{0, 0b10, 5, 42}};
  auto r = interconnect_cycle(one, {});
  REQUIRE(r.applied[1].has_value());
  CHECK(r.applied[1]->word == 42);
  CHECK(r.pending.empty());

  std::vector<InterconnectPacket> two{{5, 0b1, 1, 55}, {2, 0b1, 2, 22}};
  r = interconnect_cycle(two, {});
  CHECK(r.applied[0]->source == 2);
  REQUIRE(r.pending.size() == 1);
  r = interconnect_cycle(r.pending, {});
  CHECK(r.applied[0]->source == 5);

  // Remote packet beats the destination's own writeback.
  std::vector<InterconnectPacket> mixed{{3, 0b1000, 7, 1}, {1, 0b1000, 9, 2}};
  std::vector<ControllerWrite> ctrl{{3, 11, 3}};
  r = interconnect_cycle(mixed, ctrl);
  CHECK(r.applied[3]->origin == WriteOrigin::Interconnect);
  CHECK(r.applied[3]->source == 1);
  r = interconnect_cycle(r.pending, r.controller_pending);
  CHECK(r.applied[3]->origin == WriteOrigin::Controller);
  r = interconnect_cycle(r.pending, r.controller_pending);
  CHECK(r.applied[3]->origin == WriteOrigin::Local);
  CHECK(r.pending.empty());

  // Broadcast reaches every destination in one cycle when uncontended.
  std::vector<InterconnectPacket> bc{{0, 0xFF, 3, 9}};
  r = interconnect_cycle(bc, {});
  for (int d = 0; d < 8; ++d) CHECK(r.applied[d].has_value());
}
