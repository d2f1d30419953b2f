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
#include "mvusim/bitserial.hpp"
#include "mvusim/error.hpp"

using namespace mvusim;

namespace {

std::int64_t plain_dot(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<std::int64_t> random_vec(std::mt19937_64& rng, Precision p, std::size_t n) {
  std::uniform_int_distribution<std::int64_t> d(p.min(), p.max());
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("transpose stores MSB plane first") {
  const std::vector<std::int64_t> e{3, 1};
  auto t = transpose(e, Precision::make(2, false), 2);
  REQUIRE(t.planes.size() == 2);
  CHECK(t.planes[0] == 0b01);
  CHECK(t.planes[1] == 0b11);

  auto z = transpose(std::vector<std::int64_t>(64, 0), Precision::make(4, false));
  CHECK(z.planes == std::vector<std::uint64_t>(4, 0));

  auto m = transpose(std::vector<std::int64_t>{-1}, Precision::make(3, true), 1);
  CHECK(m.planes == std::vector<std::uint64_t>(3, 1));
}

TEST_CASE("transpose rejects out of range and ragged input") {
  CHECK_THROWS_AS(transpose(std::vector<std::int64_t>{4}, Precision::make(2, false), 1), Error);
  CHECK_THROWS_AS(transpose(std::vector<std::int64_t>{1, 2, 3}, Precision::make(2, false), 2),
                  Error);
  CHECK_THROWS_AS(Precision::make(17, false), Error);
  CHECK_THROWS_AS(Precision::make(0, true), Error);
}

TEST_CASE("untranspose inverts transpose") {
  auto t = transpose(std::vector<std::int64_t>{5, 2, 7, 0}, Precision::make(3, false), 4);
  CHECK(untranspose(t) == std::vector<std::int64_t>{5, 2, 7, 0});

  BitTransposedTensor ones;
  ones.precision = Precision::make(2, true);
  ones.block_width = 1;
  ones.planes = {1, 1};
  CHECK(untranspose(ones) == std::vector<std::int64_t>{-1});

  std::mt19937_64 rng(7);
  for (int bits = 1; bits <= kMaxBits; ++bits) {
    for (bool sgn : {false, true}) {
      const Precision p = Precision::make(bits, sgn);
      auto v = random_vec(rng, p, 128);
      CHECK(untranspose(transpose(v, p)) == v);
    }
  }
}

TEST_CASE("bit combination schedule") {
  const BitSchedule s22 = bit_combination_schedule(2, 2);
  const BitSchedule want{{{2, 2}}, {{2, 1}, {1, 2}}, {{1, 1}}};
  CHECK(s22 == want);
  CHECK(bit_combination_schedule(1, 1) == BitSchedule{{{1, 1}}});

  for (int a = 1; a <= kMaxBits; ++a) {
    for (int w = 1; w <= kMaxBits; ++w) {
      const BitSchedule s = bit_combination_schedule(a, w);
      CHECK(s.size() == static_cast<std::size_t>(a + w - 1));
      std::size_t pairs = 0;
      int magnitude = a + w;
      for (const auto& g : s) {
        for (const auto& p : g) CHECK(p.act_bit + p.weight_bit == magnitude);
        pairs += g.size();
        --magnitude;
      }
      CHECK(pairs == static_cast<std::size_t>(a * w));
    }
  }
  const BitSchedule s32 = bit_combination_schedule(3, 2);
  CHECK(s32.size() == 4);
}

TEST_CASE("adder tree") {
  CHECK(adder_tree_sum(~0ull, ~0ull) == 64);
  CHECK(adder_tree_sum(0x1234ull, 0) == 0);
  const std::uint64_t a = 0xF0F0F0F0F0F0F0F0ull;
  const std::uint64_t b = 0xFF00FF00FF00FF00ull;
  int n = 0;
  for (int l = 0; l < 64; ++l) n += static_cast<int>(((a >> l) & (b >> l)) & 1u);
  CHECK(adder_tree_sum(a, b) == n);
}

TEST_CASE("accumulator shifts between groups only") {
  std::vector<std::int64_t> x(64, 0), w(64, 0);
  x[0] = 3;
  w[0] = 3;
  CHECK(bitserial_dot(transpose(x, Precision::make(2, false)).planes,
                      transpose(w, Precision::make(2, false)).planes, Precision::make(2, false),
                      Precision::make(2, false)) == 9);
}

TEST_CASE("bitserial dot is exact") {
  std::mt19937_64 rng(11);
  const int widths[] = {1, 2, 3, 4, 8, 16};
  for (int a : widths) {
    for (int w : widths) {
      for (int sa = 0; sa < 2; ++sa) {
        for (int sw = 0; sw < 2; ++sw) {
          const Precision pa = Precision::make(a, sa != 0);
          const Precision pw = Precision::make(w, sw != 0);
          for (int trial = 0; trial < 20; ++trial) {
            auto x = random_vec(rng, pa, 64);
            auto y = random_vec(rng, pw, 64);
            REQUIRE(bitserial_dot(transpose(x, pa), transpose(y, pw)) == plain_dot(x, y));
          }
        }
      }
    }
  }
}

TEST_CASE("single lane exhaustive at 3/3 signed") {
  const Precision p = Precision::make(3, true);
  for (std::int64_t a = p.min(); a <= p.max(); ++a) {
    for (std::int64_t b = p.min(); b <= p.max(); ++b) {
      std::vector<std::int64_t> x(64, 0), w(64, 0);
      x[0] = a;
      w[0] = b;
      REQUIRE(bitserial_dot(transpose(x, p), transpose(w, p)) == a * b);
    }
  }
}

TEST_CASE("unsigned precision swap symmetry") {
  std::mt19937_64 rng(3);
  for (int a = 1; a <= 8; ++a) {
    for (int w = 1; w <= 8; ++w) {
      const Precision pa = Precision::make(a, false), pw = Precision::make(w, false);
      auto x = random_vec(rng, pa, 64);
      auto y = random_vec(rng, pw, 64);
      CHECK(bitserial_dot(transpose(x, pa), transpose(y, pw)) ==
            bitserial_dot(transpose(y, pw), transpose(x, pa)));
    }
  }
}

TEST_CASE("lane mismatch") {
  auto x = transpose(std::vector<std::int64_t>(32, 1), Precision::make(1, false), 32);
  CHECK_THROWS_AS(bitserial_dot(x, x), Error);
}
