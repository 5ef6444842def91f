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

// Shape transforms that lower convolutions onto matrix multiplications.
//
// im2row(X) has one row per output pixel; row r holds every input element of
// that window. The intra-row order follows the source layout so the lowered
// matrix lines up with the weight matrix without any extra shuffle:
//   HWC: (k_h, k_w, c)  — each kernel row is one contiguous k_w*C chunk of
//        the source, so interior windows copy in k_w*C-element runs;
//   CHW: (c, k_h, k_w)  — runs are k_w elements per (channel, kernel row).
// im2col is the transposed arrangement (k_h*k_w*C rows, one column per
// output pixel); it is written column-by-column with strided stores, which
// is exactly why it is the slower transform.
//
// Zero insertion for padding happens logically: window cells outside the
// source are guarded per element (interior spans take the contiguous-run
// fast path). Borders are signed — a negative border is a crop, which the
// input-gradient geometry produces when pad >= k.

#include <cstring>

#include "tinytrain/context.hpp"
#include "tinytrain/conv_spec.hpp"
#include "tinytrain/tensor.hpp"

namespace tinytrain {

namespace tfdetail {

template <typename T>
void im2row_hwc_rows(const T* src, const WindowGeom& g, MatView<T> dst,
                     index_t rb, index_t re) {
  const index_t row_chunk = g.k_w * g.c;  // one kernel row of one window
  for (index_t r = rb; r < re; ++r) {
    const index_t oy = r / g.w_out;
    const index_t ox = r % g.w_out;
    T* out = dst.row(r);
    const index_t x0 = ox - g.pad_left;
    for (index_t kh = 0; kh < g.k_h; ++kh, out += row_chunk) {
      const index_t y = oy - g.pad_top + kh;
      if (y < 0 || y >= g.h) {
        std::memset(out, 0, static_cast<std::size_t>(row_chunk) * sizeof(T));
        continue;
      }
      const T* in_row = src + (y * g.w + x0) * g.c;
      if (x0 >= 0 && x0 + g.k_w <= g.w) {  // fully interior: one run
        std::memcpy(out, in_row, static_cast<std::size_t>(row_chunk) * sizeof(T));
        continue;
      }
      for (index_t kw = 0; kw < g.k_w; ++kw) {  // border: guard per column
        const index_t x = x0 + kw;
        if (x < 0 || x >= g.w) {
          std::memset(out + kw * g.c, 0, static_cast<std::size_t>(g.c) * sizeof(T));
        } else {
          std::memcpy(out + kw * g.c, in_row + kw * g.c,
                      static_cast<std::size_t>(g.c) * sizeof(T));
        }
      }
    }
  }
}

template <typename T>
void im2row_chw_rows(const T* src, const WindowGeom& g, MatView<T> dst,
                     index_t rb, index_t re) {
  for (index_t r = rb; r < re; ++r) {
    const index_t oy = r / g.w_out;
    const index_t ox = r % g.w_out;
    T* out = dst.row(r);
    const index_t x0 = ox - g.pad_left;
    const bool x_interior = x0 >= 0 && x0 + g.k_w <= g.w;
    for (index_t ci = 0; ci < g.c; ++ci) {
      const T* plane = src + ci * g.h * g.w;
      for (index_t kh = 0; kh < g.k_h; ++kh, out += g.k_w) {
        const index_t y = oy - g.pad_top + kh;
        if (y < 0 || y >= g.h) {
          std::memset(out, 0, static_cast<std::size_t>(g.k_w) * sizeof(T));
          continue;
        }
        const T* in_row = plane + y * g.w + x0;
        if (x_interior) {  // contiguous k_w-element run
          std::memcpy(out, in_row, static_cast<std::size_t>(g.k_w) * sizeof(T));
          continue;
        }
        for (index_t kw = 0; kw < g.k_w; ++kw) {
          const index_t x = x0 + kw;
          out[kw] = (x < 0 || x >= g.w) ? T{} : in_row[kw];
        }
      }
    }
  }
}

// Columns cb..ce of im2col (one column per output pixel, strided stores).
template <typename T>
void im2col_cols(const T* src, const WindowGeom& g, Layout layout, MatView<T> dst,
                 index_t cb, index_t ce) {
  const index_t stride = dst.cols;
  for (index_t r = cb; r < ce; ++r) {
    const index_t oy = r / g.w_out;
    const index_t ox = r % g.w_out;
    const index_t x0 = ox - g.pad_left;
    T* col = dst.data + r;
    index_t j = 0;
    auto emit = [&](T v) { col[(j++) * stride] = v; };
    if (layout == Layout::HWC) {
      for (index_t kh = 0; kh < g.k_h; ++kh) {
        const index_t y = oy - g.pad_top + kh;
        const bool yin = y >= 0 && y < g.h;
        for (index_t kw = 0; kw < g.k_w; ++kw) {
          const index_t x = x0 + kw;
          if (yin && x >= 0 && x < g.w) {
            const T* px = src + (y * g.w + x) * g.c;
            for (index_t ci = 0; ci < g.c; ++ci) emit(px[ci]);
          } else {
            for (index_t ci = 0; ci < g.c; ++ci) emit(T{});
          }
        }
      }
    } else {
      for (index_t ci = 0; ci < g.c; ++ci) {
        const T* plane = src + ci * g.h * g.w;
        for (index_t kh = 0; kh < g.k_h; ++kh) {
          const index_t y = oy - g.pad_top + kh;
          const bool yin = y >= 0 && y < g.h;
          for (index_t kw = 0; kw < g.k_w; ++kw) {
            const index_t x = x0 + kw;
            emit(yin && x >= 0 && x < g.w ? plane[y * g.w + x] : T{});
          }
        }
      }
    }
  }
}

}  // namespace tfdetail

// Lowers src into dst with one row per output pixel of the window geometry.
// dst must be (h_out*w_out) x (k_h*k_w*c). Parallelizes over output rows.
template <typename T>
void im2row(const Tensor& src, const WindowGeom& g, MatView<T> dst,
            const RunContext& ctx = {}) {
  g.validate();
  check_shape(src.ndims() == 3 && src.c() == g.c && src.h() == g.h && src.w() == g.w,
              "im2row: source does not match the window geometry");
  check_shape(dst.rows == g.h_out * g.w_out && dst.cols == g.lowered_cols(),
              "im2row: bad destination shape");
  ScopedPhase phase(ctx.profiler, Phase::Transform);
  const T* s = src.data<T>();
  const bool hwc = src.layout() == Layout::HWC;
  parallel_chunks(dst.rows, ctx.exec.workers, [&](index_t rb, index_t re, int) {
    if (hwc) {
      tfdetail::im2row_hwc_rows(s, g, dst, rb, re);
    } else {
      tfdetail::im2row_chw_rows(s, g, dst, rb, re);
    }
  });
}

// The transposed lowering: dst must be (k_h*k_w*c) x (h_out*w_out).
// Parallelizes over output columns (pixels).
template <typename T>
void im2col(const Tensor& src, const WindowGeom& g, MatView<T> dst,
            const RunContext& ctx = {}) {
  g.validate();
  check_shape(src.ndims() == 3 && src.c() == g.c && src.h() == g.h && src.w() == g.w,
              "im2col: source does not match the window geometry");
  check_shape(dst.cols == g.h_out * g.w_out && dst.rows == g.lowered_cols(),
              "im2col: bad destination shape");
  ScopedPhase phase(ctx.profiler, Phase::Transform);
  const T* s = src.data<T>();
  const Layout layout = src.layout();
  parallel_chunks(dst.cols, ctx.exec.workers, [&](index_t cb, index_t ce, int) {
    tfdetail::im2col_cols(s, g, layout, dst, cb, ce);
  });
}

namespace tfdetail {

template <typename T>
void block_transpose_into(const Tensor& w, Tensor& out, index_t ob, index_t oe) {
  const T* s = w.data<T>();
  T* d = out.data<T>();
  const index_t kh = w.kh(), kw = w.kw();
  const WStrides ss = w_strides(w);
  const WStrides ds = w_strides(out);
  for (index_t i = ob; i < oe; ++i) {      // output channel of the result = c_i
    for (index_t o = 0; o < w.co(); ++o) {  // input channel of the result = c_o
      // Source window anchored at the spatially reversed corner; walking
      // (a, b) forward in the destination walks it backward in the source.
      const T* sp = s + o * ss.o_s + i * ss.i_s + (kh - 1) * ss.a_s + (kw - 1) * ss.b_s;
      T* dp = d + (i - ob) * ds.o_s + o * ds.i_s;
      for (index_t a = 0; a < kh; ++a) {
        for (index_t b = 0; b < kw; ++b) {
          dp[a * ds.a_s + b * ds.b_s] = sp[-a * ss.a_s - b * ss.b_s];
        }
      }
    }
  }
}

// Rows [ob, oe) of the block-transpose, as a weight tensor of (oe-ob)
// output channels. Used whole by block_transpose and sliced by the tiler.
template <typename T>
void block_transpose_range(const Tensor& w, Tensor& out, index_t ob, index_t oe,
                           const RunContext& ctx) {
  ScopedPhase phase(ctx.profiler, Phase::Transpose);
  block_transpose_into<T>(w, out, ob, oe);
}

}  // namespace tfdetail

// Weight block-transpose: swaps the channel roles and reverses the kernel
// window, keeping the storage idiom (layout and transposed flag) intact:
//   BT(W)[ci][co][a][b] = W[co][ci][k_h-1-a][k_w-1-b]
// It is an involution: BT(BT(W)) == W. The input-gradient pass convolves the
// output gradient with BT(W).
inline Tensor block_transpose(const Tensor& w, const RunContext& ctx = {}) {
  check_shape(w.ndims() == 4, "block_transpose applies to weight tensors");
  Tensor out =
      Tensor::weights(w.elem(), w.layout(), w.ci(), w.co(), w.kh(), w.kw(),
                      w.transposed());
  if (w.elem() == ElemType::F32) {
    tfdetail::block_transpose_range<float>(w, out, 0, w.ci(), ctx);
  } else {
    tfdetail::block_transpose_range<half_t>(w, out, 0, w.ci(), ctx);
  }
  return out;
}

// Explicit gradient-border materialization: pads (or crops, when pad >= k)
// the output gradient by k-1-pad on each side. Lowering the result with a
// zero-border window is equivalent to lowering dY directly with the
// input-gradient geometry; the library uses the logical form internally and
// offers this op for callers that want the border in memory.
inline Tensor pad_gradient(const Tensor& dy, const ConvSpec& spec,
                           const RunContext& ctx = {}) {
  spec.validate();
  check_shape(dy.ndims() == 3 && dy.c() == spec.c_out && dy.h() == spec.h_out() &&
                  dy.w() == spec.w_out(),
              "pad_gradient: dy does not match the spec output");
  const index_t bh = spec.k_h - 1 - spec.pad;
  const index_t bw = spec.k_w - 1 - spec.pad;
  const index_t h2 = dy.h() + 2 * bh;
  const index_t w2 = dy.w() + 2 * bw;
  check_shape(h2 >= 1 && w2 >= 1, "pad_gradient: crop leaves nothing");
  Tensor out = Tensor::activation(dy.elem(), dy.layout(), dy.c(), h2, w2);
  ScopedPhase phase(ctx.profiler, Phase::Transform);
  for (index_t ci = 0; ci < dy.c(); ++ci) {
    for (index_t y2 = 0; y2 < h2; ++y2) {
      const index_t y = y2 - bh;
      for (index_t x2 = 0; x2 < w2; ++x2) {
        const index_t x = x2 - bw;
        const bool in = y >= 0 && y < dy.h() && x >= 0 && x < dy.w();
        out.set_flat(out.act_offset(ci, y2, x2),
                     in ? dy.get_flat(dy.act_offset(ci, y, x)) : 0.0f);
      }
    }
  }
  return out;
}

}  // namespace tinytrain
