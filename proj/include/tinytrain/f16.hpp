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

#pragma once

// 16-bit float storage type and codecs.
//
// The library computes all half-precision arithmetic host-side as
// convert -> compute in binary32 -> round back, one rounding per operation.
// For a fused MAC this is exact fused behavior: the product of two halfs is
// exactly representable in binary32 (11x11 or 8x8 mantissa bits), so
// round(acc + a*b) performs a genuine single-rounded multiply-accumulate.
//
// Two flavors share the 16-bit storage: IEEE binary16 (default) and bfloat16,
// selected by a process-global switch. All rounding is round-to-nearest-even.

#include <bit>
#include <cstdint>

#include "tinytrain/types.hpp"

#if defined(__F16C__)
#include <immintrin.h>
#endif

namespace tinytrain {

enum class F16Flavor : std::uint8_t {
  IeeeBinary16 = 0,
  BFloat16 = 1,
};

// Process-global flavor switch. Set it before running kernels; it is read at
// conversion time and is not intended to change mid-operation.
inline F16Flavor& f16_flavor() {
  static F16Flavor flavor = F16Flavor::IeeeBinary16;
  return flavor;
}

// Storage-only half type. Arithmetic goes through float; keeping the struct
// trivial makes tensors of halfs memcpy/memset-safe. Value-initialize
// (half_t{}) for a positive zero.
struct half_t {
  std::uint16_t bits;
};

static_assert(sizeof(half_t) == 2);

namespace f16detail {

// ---- IEEE binary16 ----------------------------------------------------

inline std::uint16_t encode_ieee(float value) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(value);
  const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
  const std::uint32_t abs = x & 0x7fffffffu;

  if (abs >= 0x7f800000u) {  // Inf or NaN; NaNs quiet with truncated payload.
    const std::uint32_t nan = abs > 0x7f800000u
                                  ? 0x0200u | ((abs & 0x7fffffu) >> 13)
                                  : 0u;
    return static_cast<std::uint16_t>(sign | 0x7c00u | nan);
  }

  const int e = static_cast<int>(abs >> 23) - 127;  // unbiased exponent
  const std::uint32_t mant = abs & 0x7fffffu;

  if (e >= 16) {  // magnitude >= 2^16: overflows to infinity
    return static_cast<std::uint16_t>(sign | 0x7c00u);
  }
  if (e >= -14) {  // normal range; rounding may carry into the exponent
    std::uint32_t half = (static_cast<std::uint32_t>(e + 15) << 10) | (mant >> 13);
    const std::uint32_t rem = mant & 0x1fffu;  // 13 dropped bits
    half += (rem > 0x1000u) || (rem == 0x1000u && (half & 1u));
    // A carry out of the exponent field lands exactly on 0x7c00 (infinity),
    // which is the IEEE round-to-nearest-even overflow rule.
    return static_cast<std::uint16_t>(sign | half);
  }
  if (e >= -25) {  // subnormal result: value = m * 2^-24, m in [0, 1024]
    const std::uint32_t mant24 = mant | 0x800000u;
    const int rshift = -(e + 1);  // 14..24
    std::uint32_t half = mant24 >> rshift;
    const std::uint32_t rem = mant24 & ((1u << rshift) - 1u);
    const std::uint32_t halfway = 1u << (rshift - 1);
    half += (rem > halfway) || (rem == halfway && (half & 1u));
    return static_cast<std::uint16_t>(sign | half);  // may round up to 0x0400
  }
  return sign;  // underflows to signed zero
}

inline float decode_ieee(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1fu;
  const std::uint32_t mant = h & 0x3ffu;
  std::uint32_t f;
  if (exp == 31u) {  // inf / nan; nan payload widens, signaling nans quiet
    f = sign | 0x7f800000u | (mant ? 0x400000u | (mant << 13) : 0u);
  } else if (exp != 0u) {  // normal
    f = sign | ((exp + 112u) << 23) | (mant << 13);
  } else if (mant != 0u) {  // subnormal: value = mant * 2^-24, normalize
    const int p = std::bit_width(mant);  // 1..10
    f = sign | (static_cast<std::uint32_t>(p + 102) << 23) |
        ((mant & ((1u << (p - 1)) - 1u)) << (24 - p));
  } else {  // signed zero
    f = sign;
  }
  return std::bit_cast<float>(f);
}

// ---- bfloat16 ---------------------------------------------------------

inline std::uint16_t encode_bf16(float value) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(value);
  if ((x & 0x7fffffffu) > 0x7f800000u) {  // NaN: canonical quiet NaN
    return static_cast<std::uint16_t>(((x >> 16) & 0x8000u) | 0x7fc0u);
  }
  const std::uint32_t rounded = x + 0x7fffu + ((x >> 16) & 1u);
  return static_cast<std::uint16_t>(rounded >> 16);
}

inline float decode_bf16(std::uint16_t h) {
  return std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16);
}

}  // namespace f16detail

// Flavor-dispatching conversions. The F16C fast path is bit-identical to the
// portable binary16 codec (both implement round-to-nearest-even with NaN
// quieting), verified by tests, so results never depend on which path ran.
inline float half_to_float(half_t h) {
  if (f16_flavor() == F16Flavor::BFloat16) return f16detail::decode_bf16(h.bits);
#if defined(__F16C__)
  return _cvtsh_ss(h.bits);
#else
  return f16detail::decode_ieee(h.bits);
#endif
}

inline half_t half_from_float(float v) {
  if (f16_flavor() == F16Flavor::BFloat16) return {f16detail::encode_bf16(v)};
#if defined(__F16C__)
  return {static_cast<std::uint16_t>(
      _cvtss_sh(v, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC))};
#else
  return {f16detail::encode_ieee(v)};
#endif
}

// Round a binary32 value through the active 16-bit format. The result is
// exactly representable as a half, so chained operations can keep the
// accumulator in a float register without extra conversions.
inline float round_to_half(float v) { return half_to_float(half_from_float(v)); }

// One fused multiply-accumulate with half-precision semantics:
// acc' = round16(acc + a*b), a single rounding per MAC.
inline float half_mac(float acc_as_half, float a_as_half, float b_as_half) {
  return round_to_half(acc_as_half + a_as_half * b_as_half);
}

// Unit-in-the-last-place of 1.0 for tolerance formulas.
inline float ulp_of(ElemType t) {
  if (t == ElemType::F32) return 0x1p-23f;
  return f16_flavor() == F16Flavor::BFloat16 ? 0x1p-7f : 0x1p-10f;
}

inline const char* to_string(F16Flavor f) {
  return f == F16Flavor::IeeeBinary16 ? "ieee" : "bf16";
}

inline F16Flavor parse_f16_flavor(std::string_view s) {
  if (s == "ieee") return F16Flavor::IeeeBinary16;
  if (s == "bf16") return F16Flavor::BFloat16;
  throw ConfigError("unknown f16 flavor: " + std::string(s));
}

}  // namespace tinytrain
