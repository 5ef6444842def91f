/*
 * Copyright (c) 2026 The tinytrain Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Half-precision codec verification. The decode side is checked exhaustively
// against an ldexp-based oracle; the encode side against an exhaustive
// nearest-even search over all finite encodings, plus hand-picked rounding,
// tie, overflow, and subnormal boundary cases. The portable codec and the
// hardware (F16C) path are also required to agree bit-for-bit, since the
// library promises results never depend on which one ran.

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <random>

#include "support/oracles.hpp"
#include "tinytrain/f16.hpp"

namespace tt = tinytrain;

namespace {

// Restores the process-global format switch on scope exit.
struct FlavorGuard {
  tt::F16Flavor saved;
  explicit FlavorGuard(tt::F16Flavor f) : saved(tt::f16_flavor()) {
    tt::f16_flavor() = f;
  }
  ~FlavorGuard() { tt::f16_flavor() = saved; }
};

bool is_half_nan(std::uint16_t h) {
  return ((h >> 10) & 0x1f) == 0x1f && (h & 0x3ff) != 0;
}

float decode(std::uint16_t bits) { return tt::half_to_float(tt::half_t{bits}); }

std::uint16_t encode(float v) { return tt::half_from_float(v).bits; }

TEST(F16, DecodeMatchesOracleExhaustively) {
  for (std::uint32_t b = 0; b <= 0xffffu; ++b) {
    const auto h = static_cast<std::uint16_t>(b);
    const double want = ttest::f16_decode_oracle(h);
    const float got = decode(h);
    if (std::isnan(want)) {
      EXPECT_TRUE(std::isnan(got)) << "bits " << b;
      continue;
    }
    ASSERT_EQ(static_cast<double>(got), want) << "bits " << b;
    // Signed zero must keep its sign through decoding.
    if (want == 0.0) {
      EXPECT_EQ(std::signbit(got), (b & 0x8000u) != 0) << "bits " << b;
    }
  }
}

TEST(F16, PortableDecodeEqualsDispatchedDecode) {
  for (std::uint32_t b = 0; b <= 0xffffu; ++b) {
    const auto h = static_cast<std::uint16_t>(b);
    const float portable = tt::f16detail::decode_ieee(h);
    const float dispatched = decode(h);
    if (is_half_nan(h)) {
      EXPECT_TRUE(std::isnan(portable) && std::isnan(dispatched));
      continue;
    }
    ASSERT_EQ(std::bit_cast<std::uint32_t>(portable),
              std::bit_cast<std::uint32_t>(dispatched))
        << "bits " << b;
  }
}

TEST(F16, EncodeRoundTripsEveryNonNanValue) {
  for (std::uint32_t b = 0; b <= 0xffffu; ++b) {
    const auto h = static_cast<std::uint16_t>(b);
    if (is_half_nan(h)) continue;  // NaN payloads may canonicalize
    ASSERT_EQ(encode(decode(h)), h) << "bits " << b;
  }
}

TEST(F16, EncodeMatchesExhaustiveNearestEvenSearch) {
  std::mt19937 rng(20260819u);
  std::uniform_real_distribution<float> unit(-2.0f, 2.0f);
  std::uniform_int_distribution<int> scale(-30, 20);
  for (int i = 0; i < 400; ++i) {
    const float v = std::ldexp(unit(rng), scale(rng));
    const std::uint16_t want = ttest::f16_encode_oracle(v);
    const std::uint16_t got = encode(v);
    ASSERT_EQ(got, want) << "value " << v;
  }
  const float edge_cases[] = {
      0.0f,        -0.0f,      0.1f,      -0.1f,       1.0f / 3.0f,
      65504.0f,    65519.0f,   65520.0f,  -65520.0f,   70000.0f,
      0x1p-14f,    0x1p-24f,   0x1p-25f,  0x1.8p-25f,  0x1p-26f,
      1023 * 0x1p-24f,         0x1p15f,   0x1.ffcp15f, 0x1.ffep15f,
      1.0f + 0x1p-11f,         1.0f + 3 * 0x1p-11f,
  };
  for (const float v : edge_cases) {
    ASSERT_EQ(encode(v), ttest::f16_encode_oracle(v)) << "value " << v;
  }
}

TEST(F16, PortableEncodeEqualsDispatchedEncode) {
  std::mt19937 rng(7u);
  std::uniform_real_distribution<float> unit(-2.0f, 2.0f);
  std::uniform_int_distribution<int> scale(-32, 22);
  for (int i = 0; i < 20000; ++i) {
    const float v = std::ldexp(unit(rng), scale(rng));
    ASSERT_EQ(tt::f16detail::encode_ieee(v), encode(v)) << "value " << v;
  }
}

TEST(F16, InfinityAndNanEncode) {
  EXPECT_EQ(encode(std::numeric_limits<float>::infinity()), 0x7c00u);
  EXPECT_EQ(encode(-std::numeric_limits<float>::infinity()), 0xfc00u);
  EXPECT_TRUE(is_half_nan(encode(std::numeric_limits<float>::quiet_NaN())));
  EXPECT_TRUE(std::isinf(decode(0x7c00u)));
  EXPECT_TRUE(std::isinf(decode(0xfc00u)) && std::signbit(decode(0xfc00u)));
}

TEST(F16, TenthRoundsWithinHalfUlp) {
  // A normal magnitude rounds to nearest, so the error is at most half of the
  // 2^-10 relative spacing.
  const float back = tt::round_to_half(0.1f);
  EXPECT_LE(std::abs(back - 0.1f), 0x1p-11f * 0.1f);
  EXPECT_NE(back, 0.1f);  // 0.1 is not representable in 11 mantissa bits
}

TEST(F16, TiesRoundToEvenMantissa) {
  // 1 + 2^-11 sits exactly between 1.0 (even mantissa) and 1 + 2^-10 (odd).
  EXPECT_EQ(tt::round_to_half(1.0f + 0x1p-11f), 1.0f);
  // 1 + 3*2^-11 sits between 1 + 2^-10 (odd) and 1 + 2^-9 (even).
  EXPECT_EQ(tt::round_to_half(1.0f + 3 * 0x1p-11f), 1.0f + 0x1p-9f);
}

TEST(F16, OverflowBoundary) {
  // 65504 is the largest finite half; anything below 65520 rounds back to it,
  // 65520 and up round to infinity under nearest-even.
  EXPECT_EQ(tt::round_to_half(65504.0f), 65504.0f);
  EXPECT_EQ(tt::round_to_half(65519.0f), 65504.0f);
  EXPECT_TRUE(std::isinf(tt::round_to_half(65520.0f)));
  EXPECT_TRUE(std::isinf(tt::round_to_half(-65520.0f)));
}

TEST(F16, SubnormalBoundary) {
  EXPECT_EQ(tt::round_to_half(0x1p-24f), 0x1p-24f);  // smallest subnormal
  EXPECT_EQ(tt::round_to_half(0x1p-14f), 0x1p-14f);  // smallest normal
  EXPECT_EQ(tt::round_to_half(1023 * 0x1p-24f), 1023 * 0x1p-24f);
  // 2^-25 ties between zero (even) and the smallest subnormal (odd).
  EXPECT_EQ(tt::round_to_half(0x1p-25f), 0.0f);
  EXPECT_EQ(tt::round_to_half(0x1.8p-25f), 0x1p-24f);
}

TEST(F16, SignedZeroSurvives) {
  EXPECT_EQ(encode(-0.0f), 0x8000u);
  EXPECT_EQ(encode(0.0f), 0x0000u);
  EXPECT_TRUE(std::signbit(decode(0x8000u)));
  EXPECT_FALSE(std::signbit(decode(0x0000u)));
}

TEST(F16, MacRoundsOncePerStep) {
  // The contract: acc' = round16(acc + a*b), values already half-exact.
  EXPECT_EQ(tt::half_mac(1.0f, 1.0f, 1.0f), 2.0f);
  // At magnitude 2048 the half spacing is 2: +1 ties down to even 2048,
  // +1.5 rounds up to 2050.
  EXPECT_EQ(tt::half_mac(2048.0f, 1.0f, 1.0f), 2048.0f);
  EXPECT_EQ(tt::half_mac(2048.0f, 1.0f, 1.5f), 2050.0f);
  std::mt19937 rng(11u);
  std::uniform_real_distribution<float> unit(-4.0f, 4.0f);
  for (int i = 0; i < 1000; ++i) {
    const float acc = tt::round_to_half(unit(rng));
    const float a = tt::round_to_half(unit(rng));
    const float b = tt::round_to_half(unit(rng));
    const float got = tt::half_mac(acc, a, b);
    EXPECT_EQ(got, tt::round_to_half(acc + a * b));
    EXPECT_EQ(got, tt::round_to_half(got));  // result is half-exact
  }
}

TEST(F16, UlpConstants) {
  EXPECT_EQ(tt::ulp_of(tt::ElemType::F32), 0x1p-23f);
  EXPECT_EQ(tt::ulp_of(tt::ElemType::F16), 0x1p-10f);
  FlavorGuard guard(tt::F16Flavor::BFloat16);
  EXPECT_EQ(tt::ulp_of(tt::ElemType::F16), 0x1p-7f);
}

TEST(F16, FlavorSwitchChangesEncoding) {
  EXPECT_EQ(encode(1.0f), 0x3c00u);
  FlavorGuard guard(tt::F16Flavor::BFloat16);
  EXPECT_EQ(encode(1.0f), 0x3f80u);
  EXPECT_EQ(decode(0x3f80u), 1.0f);
}

TEST(F16, Bf16RoundTripsEveryNonNanValue) {
  FlavorGuard guard(tt::F16Flavor::BFloat16);
  for (std::uint32_t b = 0; b <= 0xffffu; ++b) {
    const auto h = static_cast<std::uint16_t>(b);
    const float f = decode(h);
    if (std::isnan(f)) continue;
    ASSERT_EQ(encode(f), h) << "bits " << b;
  }
}

TEST(F16, Bf16TruncatesWithNearestEven) {
  FlavorGuard guard(tt::F16Flavor::BFloat16);
  // 1 + 2^-8 ties between 1.0 (even) and 1 + 2^-7 (odd): rounds down.
  EXPECT_EQ(tt::round_to_half(1.0f + 0x1p-8f), 1.0f);
  // 1 + 3*2^-8 ties between 1 + 2^-7 (odd) and 1 + 2^-6 (even): rounds up.
  EXPECT_EQ(tt::round_to_half(1.0f + 3 * 0x1p-8f), 1.0f + 0x1p-6f);
  // bfloat16 keeps the full float exponent range: no overflow at 65520.
  EXPECT_FALSE(std::isinf(tt::round_to_half(65520.0f)));
}

}  // namespace
