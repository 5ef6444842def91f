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

// Matrix-multiplication kernels.
//
// Two forms share one implementation:
//   mm   : C[n][m] = sum_k A[n][k] * B[k][m]          (B stored K x M)
//   mm_t : C[n][m] = sum_k A[n][k] * Bt[m][k]         (B stored transposed,
//          M x K, so both operands stream row-wise — the SIMD-friendly form)
//
// Kernel variants:
//   scalar UxV unrolling, (U,V) in {(1,1),(2,2),(2,4),(4,2)}: U rows x V
//   columns of C are kept in registers; one inner iteration issues U+V loads
//   for U*V MACs (naive = 1 MAC per 2 loads, 2x4 = 8 MACs per 6 loads).
//   lanes2 (half precision, mm_t only, fixed shape (1,2)): two adjacent k
//   elements form a lane pair; per iteration one A-pair load and two B-pair
//   loads feed 4 MACs (two output columns x two lanes). Odd K gets a scalar
//   epilogue; odd M gets a single-column tail; per element the even/odd lane
//   sub-sums are combined once at writeback.
//
// Row/column leftovers always fall back to the naive path. Every element of C
// accumulates strictly in k order with one fused rounding per MAC (binary32
// fma for f32; convert-compute-round for f16 in native accumulation). That
// makes results bit-identical across worker counts and row partitions.
//
// Operation counters follow the loop structure in closed form: one counted
// load per operand fetch (a lane pair counts once), one MAC per scalar
// multiply-accumulate (a lane-pair op counts twice), one store per output
// element. mac always equals N*K*M.
//
// The public kernels overwrite C. The accumulate-into entries (detail::) are
// for the tiling engine, which must carry a running accumulator across
// reduction splits; they are not part of the public contract.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tinytrain/context.hpp"
#include "tinytrain/counters.hpp"
#include "tinytrain/f16.hpp"
#include "tinytrain/matview.hpp"
#include "tinytrain/types.hpp"

#if defined(__AVX2__) && defined(__FMA__) && defined(__F16C__)
#define TINYTRAIN_F16_FAST_PATH 1
#include <immintrin.h>
#endif

namespace tinytrain {

enum class MmForm : std::uint8_t { Mm = 0, MmT = 1 };

enum class VectorMode : std::uint8_t { Scalar = 0, Lanes2 = 1 };

struct Unroll {
  int u = 1;
  int v = 1;
  friend bool operator==(const Unroll& a, const Unroll& b) {
    return a.u == b.u && a.v == b.v;
  }
};

struct KernelVariant {
  MmForm form = MmForm::Mm;
  Unroll unroll{1, 1};
  VectorMode vec = VectorMode::Scalar;

  static KernelVariant naive(MmForm f = MmForm::Mm) { return {f, {1, 1}, VectorMode::Scalar}; }
  static KernelVariant unrolled(int u, int v, MmForm f = MmForm::Mm) {
    return {f, {u, v}, VectorMode::Scalar};
  }
  // The paired-lane kernel has a fixed (1,2) shape and transposed form.
  static KernelVariant f16_lanes2() { return {MmForm::MmT, {1, 2}, VectorMode::Lanes2}; }

  void validate(ElemType elem) const {
    if (vec == VectorMode::Lanes2) {
      check_config(elem == ElemType::F16, "lanes2 requires f16 elements");
      check_config(form == MmForm::MmT, "lanes2 requires the transposed form");
      check_config(unroll == Unroll{1, 2}, "lanes2 has a fixed (1,2) shape");
      return;
    }
    const bool known = unroll == Unroll{1, 1} || unroll == Unroll{2, 2} ||
                       unroll == Unroll{2, 4} || unroll == Unroll{4, 2};
    check_config(known, "unroll must be one of (1,1),(2,2),(2,4),(4,2)");
  }

  std::string name() const {
    if (vec == VectorMode::Lanes2) return "lanes2";
    return std::to_string(unroll.u) + "x" + std::to_string(unroll.v);
  }
};

inline KernelVariant parse_variant(std::string_view s, MmForm form = MmForm::Mm) {
  if (s == "lanes2") return KernelVariant::f16_lanes2();
  if (s == "1x1") return KernelVariant::unrolled(1, 1, form);
  if (s == "2x2") return KernelVariant::unrolled(2, 2, form);
  if (s == "2x4") return KernelVariant::unrolled(2, 4, form);
  if (s == "4x2") return KernelVariant::unrolled(4, 2, form);
  throw ConfigError("unknown kernel variant: " + std::string(s));
}

struct MMDims {
  index_t n = 0, k = 0, m = 0;
};

namespace mmdetail {

// ---- element arithmetic policies ---------------------------------------

// Accumulators live in float registers in all policies; the policy decides
// how values are fetched and how a MAC rounds.
struct F32Ops {
  using elem = float;
  static float fetch(const float* p) { return *p; }
  static float mac(float acc, float a, float b) { return std::fma(a, b, acc); }
  static void store(float* p, float acc) { *p = acc; }
};

// Half precision, native accumulation: one rounding to the 16-bit format per
// MAC (the float accumulator always holds an exactly representable half).
struct F16NativeOps {
  using elem = half_t;
  static float fetch(const half_t* p) { return half_to_float(*p); }
  static float mac(float acc, float a, float b) { return half_mac(acc, a, b); }
  static void store(half_t* p, float acc) { *p = half_from_float(acc); }
};

// Half precision, binary32 accumulation: rounds once at writeback.
struct F16WideOps {
  using elem = half_t;
  static float fetch(const half_t* p) { return half_to_float(*p); }
  static float mac(float acc, float a, float b) { return std::fma(a, b, acc); }
  static void store(half_t* p, float acc) { *p = half_from_float(acc); }
};

// ---- B operand addressing -----------------------------------------------

template <typename T>
struct BNormal {  // B stored K x M
  const T* p;
  index_t m;  // row stride
  const T* at(index_t k, index_t col) const { return p + k * m + col; }
};

template <typename T>
struct BTrans {  // B stored M x K
  const T* p;
  index_t k;  // row stride
  const T* at(index_t k_, index_t col) const { return p + col * k + k_; }
};

// ---- scalar UxV kernel ----------------------------------------------------

template <typename Ops, int U, int V, bool Acc, typename B>
void scalar_rows(const typename Ops::elem* a, index_t lda, B b,
                 typename Ops::elem* c, index_t ldc, index_t rb, index_t re,
                 index_t K, index_t M) {
  using T = typename Ops::elem;
  const index_t rows_main_end = rb + ((re - rb) / U) * U;
  const index_t m_main = M - M % V;

  auto naive_cell = [&](index_t n, index_t m) {
    const T* arow = a + n * lda;
    float acc = Acc ? Ops::fetch(c + n * ldc + m) : 0.0f;
    for (index_t k = 0; k < K; ++k) {
      acc = Ops::mac(acc, Ops::fetch(arow + k), Ops::fetch(b.at(k, m)));
    }
    Ops::store(c + n * ldc + m, acc);
  };

  for (index_t n = rb; n < rows_main_end; n += U) {
    for (index_t m = 0; m < m_main; m += V) {
      float acc[U][V];
      for (int u = 0; u < U; ++u) {
        for (int v = 0; v < V; ++v) {
          acc[u][v] = Acc ? Ops::fetch(c + (n + u) * ldc + m + v) : 0.0f;
        }
      }
      for (index_t k = 0; k < K; ++k) {
        float av[U], bv[V];
        for (int u = 0; u < U; ++u) av[u] = Ops::fetch(a + (n + u) * lda + k);
        for (int v = 0; v < V; ++v) bv[v] = Ops::fetch(b.at(k, m + v));
        for (int u = 0; u < U; ++u) {
          for (int v = 0; v < V; ++v) acc[u][v] = Ops::mac(acc[u][v], av[u], bv[v]);
        }
      }
      for (int u = 0; u < U; ++u) {
        for (int v = 0; v < V; ++v) Ops::store(c + (n + u) * ldc + m + v, acc[u][v]);
      }
    }
    for (int u = 0; u < U; ++u) {
      for (index_t m = m_main; m < M; ++m) naive_cell(n + u, m);
    }
  }
  for (index_t n = rows_main_end; n < re; ++n) {
    for (index_t m = 0; m < M; ++m) naive_cell(n, m);
  }
}

inline OpCounters scalar_chunk_counters(index_t rows, index_t K, index_t M, int U,
                                        int V) {
  OpCounters ctr;
  const std::uint64_t rows_main = static_cast<std::uint64_t>(rows - rows % U);
  const std::uint64_t m_main = static_cast<std::uint64_t>(M - M % V);
  const std::uint64_t naive_cells =
      rows_main * static_cast<std::uint64_t>(M - static_cast<index_t>(m_main)) +
      static_cast<std::uint64_t>(rows - static_cast<index_t>(rows_main)) *
          static_cast<std::uint64_t>(M);
  ctr.mac = static_cast<std::uint64_t>(rows) * K * M;
  ctr.loads = (rows_main / U) * (m_main / V) * static_cast<std::uint64_t>(K) *
                  static_cast<std::uint64_t>(U + V) +
              naive_cells * 2u * static_cast<std::uint64_t>(K);
  ctr.stores = static_cast<std::uint64_t>(rows) * M;
  return ctr;
}

// ---- lanes2 kernel (f16, mm_t) --------------------------------------------

// Wide = binary32 accumulation; otherwise per-lane native rounding. With Acc,
// the previous C value seeds the even lane of the first column's pair.
template <bool Wide, bool Acc>
void lanes2_rows(const half_t* a, index_t lda, const half_t* bt, index_t ldb,
                 half_t* c, index_t ldc, index_t rb, index_t re, index_t K,
                 index_t M) {
  const index_t k_pairs_end = K - (K % 2);
  const index_t m_main = M - M % 2;

  auto lane_mac = [](float acc, float x, float y) {
    return Wide ? std::fma(x, y, acc) : half_mac(acc, x, y);
  };

  for (index_t n = rb; n < re; ++n) {
    const half_t* arow = a + n * lda;
    half_t* crow = c + n * ldc;
    for (index_t m = 0; m < m_main; m += 2) {
      const half_t* b0 = bt + m * ldb;
      const half_t* b1 = b0 + ldb;
      float acc0e = Acc ? half_to_float(crow[m]) : 0.0f, acc0o = 0.0f;
      float acc1e = Acc ? half_to_float(crow[m + 1]) : 0.0f, acc1o = 0.0f;
      index_t k = 0;
#if defined(TINYTRAIN_F16_FAST_PATH)
      if (Wide && f16_flavor() == F16Flavor::IeeeBinary16 && K >= 16) {
        // 8-wide convert+fma blocks; reduction order differs from the lane
        // model, which the wide mode permits (tolerance-level equivalence).
        __m256 vacc0 = _mm256_setzero_ps();
        __m256 vacc1 = _mm256_setzero_ps();
        for (; k + 8 <= K; k += 8) {
          const __m256 av = _mm256_cvtph_ps(
              _mm_loadu_si128(reinterpret_cast<const __m128i*>(arow + k)));
          const __m256 bv0 = _mm256_cvtph_ps(
              _mm_loadu_si128(reinterpret_cast<const __m128i*>(b0 + k)));
          const __m256 bv1 = _mm256_cvtph_ps(
              _mm_loadu_si128(reinterpret_cast<const __m128i*>(b1 + k)));
          vacc0 = _mm256_fmadd_ps(av, bv0, vacc0);
          vacc1 = _mm256_fmadd_ps(av, bv1, vacc1);
        }
        alignas(32) float lanes[8];
        _mm256_store_ps(lanes, vacc0);
        acc0e += lanes[0] + lanes[2] + lanes[4] + lanes[6];
        acc0o += lanes[1] + lanes[3] + lanes[5] + lanes[7];
        _mm256_store_ps(lanes, vacc1);
        acc1e += lanes[0] + lanes[2] + lanes[4] + lanes[6];
        acc1o += lanes[1] + lanes[3] + lanes[5] + lanes[7];
      }
#endif
      for (; k < k_pairs_end; k += 2) {
        const float a0 = half_to_float(arow[k]);
        const float a1 = half_to_float(arow[k + 1]);
        acc0e = lane_mac(acc0e, a0, half_to_float(b0[k]));
        acc0o = lane_mac(acc0o, a1, half_to_float(b0[k + 1]));
        acc1e = lane_mac(acc1e, a0, half_to_float(b1[k]));
        acc1o = lane_mac(acc1o, a1, half_to_float(b1[k + 1]));
      }
      if (K % 2) {
        const float a0 = half_to_float(arow[K - 1]);
        acc0e = lane_mac(acc0e, a0, half_to_float(b0[K - 1]));
        acc1e = lane_mac(acc1e, a0, half_to_float(b1[K - 1]));
      }
      // One lane combine per element at writeback.
      crow[m] = half_from_float(Wide ? acc0e + acc0o : round_to_half(acc0e + acc0o));
      crow[m + 1] =
          half_from_float(Wide ? acc1e + acc1o : round_to_half(acc1e + acc1o));
    }
    if (M % 2) {
      const index_t m = M - 1;
      const half_t* b0 = bt + m * ldb;
      float acce = Acc ? half_to_float(crow[m]) : 0.0f, acco = 0.0f;
      for (index_t k = 0; k < k_pairs_end; k += 2) {
        acce = lane_mac(acce, half_to_float(arow[k]), half_to_float(b0[k]));
        acco = lane_mac(acco, half_to_float(arow[k + 1]), half_to_float(b0[k + 1]));
      }
      if (K % 2) {
        acce = lane_mac(acce, half_to_float(arow[K - 1]), half_to_float(b0[K - 1]));
      }
      crow[m] = half_from_float(Wide ? acce + acco : round_to_half(acce + acco));
    }
  }
}

inline OpCounters lanes2_chunk_counters(index_t rows, index_t K, index_t M) {
  OpCounters ctr;
  const std::uint64_t kp = static_cast<std::uint64_t>(K / 2);
  const std::uint64_t ko = static_cast<std::uint64_t>(K % 2);
  const std::uint64_t mp = static_cast<std::uint64_t>(M / 2);
  const std::uint64_t mo = static_cast<std::uint64_t>(M % 2);
  ctr.mac = static_cast<std::uint64_t>(rows) * K * M;
  ctr.loads = static_cast<std::uint64_t>(rows) *
              (mp * (kp * 3 + ko * 3) + mo * (kp * 2 + ko * 2));
  ctr.stores = static_cast<std::uint64_t>(rows) * M;
  return ctr;
}

// ---- dispatch --------------------------------------------------------------

template <typename Ops, bool Acc, typename B>
void run_scalar(const Unroll& un, const typename Ops::elem* a, index_t lda, B b,
                typename Ops::elem* c, index_t ldc, index_t rb, index_t re,
                index_t K, index_t M) {
  if (un == Unroll{1, 1}) {
    scalar_rows<Ops, 1, 1, Acc>(a, lda, b, c, ldc, rb, re, K, M);
  } else if (un == Unroll{2, 2}) {
    scalar_rows<Ops, 2, 2, Acc>(a, lda, b, c, ldc, rb, re, K, M);
  } else if (un == Unroll{2, 4}) {
    scalar_rows<Ops, 2, 4, Acc>(a, lda, b, c, ldc, rb, re, K, M);
  } else {
    scalar_rows<Ops, 4, 2, Acc>(a, lda, b, c, ldc, rb, re, K, M);
  }
}

template <typename T>
void check_mm_args(MatView<const T> a, MatView<const T> b, MatView<T> c,
                   MmForm form, const KernelVariant& v) {
  constexpr ElemType elem =
      std::is_same_v<T, float> ? ElemType::F32 : ElemType::F16;
  v.validate(elem);
  check_config(v.form == form, "variant form does not match the called kernel");
  check_shape(a.rows >= 1 && a.cols >= 1 && b.rows >= 1 && b.cols >= 1,
              "mm: empty operand");
  if (form == MmForm::Mm) {
    check_shape(b.rows == a.cols, "mm: inner dimensions disagree");
    check_shape(c.rows == a.rows && c.cols == b.cols, "mm: bad output shape");
  } else {
    check_shape(b.cols == a.cols, "mm_t: reduction dimensions disagree");
    check_shape(c.rows == a.rows && c.cols == b.rows, "mm_t: bad output shape");
  }
}

// Shared driver: splits rows of C deterministically, runs the kernel, and
// folds per-worker counters in worker order.
template <typename T, bool Acc>
void run_mm(MatView<const T> a, MatView<const T> b, MatView<T> c, MmForm form,
            const KernelVariant& v, const RunContext& ctx) {
  check_mm_args<T>(a, b, c, form, v);
  const index_t N = c.rows, K = a.cols, M = c.cols;
  const int workers = ctx.exec.workers < 1 ? 1 : ctx.exec.workers;

  std::vector<OpCounters> wctr;
  if (ctx.counters != nullptr) {
    wctr.resize(static_cast<std::size_t>(workers));
  }

  {
    ScopedPhase phase(ctx.profiler, Phase::Mm);
    parallel_chunks(N, workers, [&](index_t rb, index_t re, int w) {
      if (v.vec == VectorMode::Lanes2) {
        if constexpr (std::is_same_v<T, half_t>) {
          if (ctx.f16_acc == F16Acc::F32) {
            lanes2_rows<true, Acc>(a.data, a.cols, b.data, b.cols, c.data, c.cols,
                                   rb, re, K, M);
          } else {
            lanes2_rows<false, Acc>(a.data, a.cols, b.data, b.cols, c.data, c.cols,
                                    rb, re, K, M);
          }
        }
      } else if constexpr (std::is_same_v<T, float>) {
        if (form == MmForm::Mm) {
          run_scalar<F32Ops, Acc>(v.unroll, a.data, a.cols, BNormal<T>{b.data, b.cols},
                                  c.data, c.cols, rb, re, K, M);
        } else {
          run_scalar<F32Ops, Acc>(v.unroll, a.data, a.cols, BTrans<T>{b.data, b.cols},
                                  c.data, c.cols, rb, re, K, M);
        }
      } else {
        const bool wide = ctx.f16_acc == F16Acc::F32;
        if (form == MmForm::Mm) {
          BNormal<T> bb{b.data, b.cols};
          wide ? run_scalar<F16WideOps, Acc>(v.unroll, a.data, a.cols, bb, c.data,
                                             c.cols, rb, re, K, M)
               : run_scalar<F16NativeOps, Acc>(v.unroll, a.data, a.cols, bb, c.data,
                                               c.cols, rb, re, K, M);
        } else {
          BTrans<T> bb{b.data, b.cols};
          wide ? run_scalar<F16WideOps, Acc>(v.unroll, a.data, a.cols, bb, c.data,
                                             c.cols, rb, re, K, M)
               : run_scalar<F16NativeOps, Acc>(v.unroll, a.data, a.cols, bb, c.data,
                                               c.cols, rb, re, K, M);
        }
      }
      if (ctx.counters != nullptr) {
        wctr[static_cast<std::size_t>(w)] =
            v.vec == VectorMode::Lanes2
                ? lanes2_chunk_counters(re - rb, K, M)
                : scalar_chunk_counters(re - rb, K, M, v.unroll.u, v.unroll.v);
      }
    });
  }

  if (ctx.counters != nullptr) {
    for (const auto& wc : wctr) *ctx.counters += wc;
  }
}

}  // namespace mmdetail

// C = A * B. Overwrites C.
template <typename T>
void mm(MatView<const T> a, MatView<const T> b, MatView<T> c,
        const KernelVariant& v, const RunContext& ctx = {}) {
  mmdetail::run_mm<T, false>(a, b, c, MmForm::Mm, v, ctx);
}

// C = A * Bt^T with Bt stored M x K. Overwrites C.
template <typename T>
void mm_t(MatView<const T> a, MatView<const T> bt, MatView<T> c,
          const KernelVariant& v, const RunContext& ctx = {}) {
  mmdetail::run_mm<T, false>(a, bt, c, MmForm::MmT, v, ctx);
}

namespace mmdetail {
// Accumulate-into entries for the tiling engine (C += A*B in the element
// accumulation semantics; for f32 this continues the element's fused chain).
template <typename T>
void mm_acc(MatView<const T> a, MatView<const T> b, MatView<T> c,
            const KernelVariant& v, const RunContext& ctx) {
  run_mm<T, true>(a, b, c, MmForm::Mm, v, ctx);
}
template <typename T>
void mm_t_acc(MatView<const T> a, MatView<const T> bt, MatView<T> c,
              const KernelVariant& v, const RunContext& ctx) {
  run_mm<T, true>(a, bt, c, MmForm::MmT, v, ctx);
}
}  // namespace mmdetail

// out = in^T. Blocked and parallelized over output rows; counted as one load
// and one store per element.
template <typename T>
void transpose(MatView<const T> in, MatView<T> out, const RunContext& ctx = {}) {
  check_shape(out.rows == in.cols && out.cols == in.rows, "transpose: bad shape");
  constexpr index_t kBlock = 32;
  {
    ScopedPhase phase(ctx.profiler, Phase::Transpose);
    parallel_chunks(out.rows, ctx.exec.workers, [&](index_t rb, index_t re, int) {
      for (index_t r0 = rb; r0 < re; r0 += kBlock) {
        const index_t r1 = std::min(re, r0 + kBlock);
        for (index_t c0 = 0; c0 < out.cols; c0 += kBlock) {
          const index_t c1 = std::min(out.cols, c0 + kBlock);
          for (index_t r = r0; r < r1; ++r) {
            for (index_t c = c0; c < c1; ++c) out.at(r, c) = in.at(c, r);
          }
        }
      }
    });
  }
  if (ctx.counters != nullptr) {
    const auto n = static_cast<std::uint64_t>(in.rows) *
                   static_cast<std::uint64_t>(in.cols);
    ctx.counters->loads += n;
    ctx.counters->stores += n;
  }
}

}  // namespace tinytrain
