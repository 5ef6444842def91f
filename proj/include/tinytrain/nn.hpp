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

// Direct (non-lowered) network ops: ReLU, pooling, depthwise convolution and
// the residual add. These are the glue around the matrix-multiply layers in
// the model benchmarks; they run single-threaded elementwise loops, are
// timed under Phase::Direct, and keep honest operation counts (every operand
// element fetch is a load, every output element written is a store, and only
// fused multiply-accumulates count as macs).
//
// Half-precision ops follow the same accumulation contract as the kernels:
// strictly sequential accumulation per output element, rounding per step in
// native mode or once at writeback in f32-accumulate mode.

#include <algorithm>
#include <cmath>

#include "tinytrain/context.hpp"
#include "tinytrain/tensor.hpp"

namespace tinytrain {
namespace nndetail {

template <typename T>
float ld(const T* p, index_t i) {
  if constexpr (std::is_same_v<T, float>) {
    return p[i];
  } else {
    return half_to_float(p[i]);
  }
}

template <typename T>
void stv(T* p, index_t i, float v) {
  if constexpr (std::is_same_v<T, float>) {
    p[i] = v;
  } else {
    p[i] = half_from_float(v);
  }
}

inline void bump(const RunContext& ctx, std::uint64_t loads, std::uint64_t stores,
                 std::uint64_t macs) {
  if (ctx.counters != nullptr) {
    ctx.counters->loads += loads;
    ctx.counters->stores += stores;
    ctx.counters->mac += macs;
  }
}

// Output extent of a pooling axis. In ceil mode partial windows are allowed,
// but a window must still start inside the input.
inline index_t pool_out(index_t in, index_t win, index_t stride, bool ceil_mode) {
  check_config(win >= 1 && stride >= 1 && win <= in, "pool: bad window/stride");
  index_t o = ceil_mode ? ceil_div(in - win, stride) + 1 : (in - win) / stride + 1;
  while (o > 1 && (o - 1) * stride >= in) --o;
  return o;
}

}  // namespace nndetail

// ---- ReLU -------------------------------------------------------------------

inline Tensor relu_fw(const Tensor& x, const RunContext& ctx = {}) {
  check_shape(x.ndims() == 3, "relu_fw expects an activation tensor");
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  Tensor y = Tensor::activation(x.elem(), x.layout(), x.c(), x.h(), x.w());
  const index_t n = x.count();
  auto run = [&](auto* xp, auto* yp) {
    for (index_t i = 0; i < n; ++i) {
      const float v = nndetail::ld(xp, i);
      nndetail::stv(yp, i, v > 0.0f ? v : 0.0f);
    }
  };
  if (x.elem() == ElemType::F32) {
    run(x.data<float>(), y.data<float>());
  } else {
    run(x.data<half_t>(), y.data<half_t>());
  }
  nndetail::bump(ctx, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(n), 0);
  return y;
}

// dX = dY where the forward input was positive, 0 elsewhere.
inline Tensor relu_bw(const Tensor& x, const Tensor& dy, const RunContext& ctx = {}) {
  check_shape(x.ndims() == 3 && dy.ndims() == 3 && x.count() == dy.count(),
              "relu_bw: shape mismatch");
  check_config(x.elem() == dy.elem() && x.layout() == dy.layout(),
               "relu_bw: storage mismatch");
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  Tensor dx = Tensor::activation(x.elem(), x.layout(), x.c(), x.h(), x.w());
  const index_t n = x.count();
  auto run = [&](auto* xp, auto* gp, auto* dp) {
    for (index_t i = 0; i < n; ++i) {
      nndetail::stv(dp, i, nndetail::ld(xp, i) > 0.0f ? nndetail::ld(gp, i) : 0.0f);
    }
  };
  if (x.elem() == ElemType::F32) {
    run(x.data<float>(), dy.data<float>(), dx.data<float>());
  } else {
    run(x.data<half_t>(), dy.data<half_t>(), dx.data<half_t>());
  }
  nndetail::bump(ctx, 2 * static_cast<std::uint64_t>(n),
                 static_cast<std::uint64_t>(n), 0);
  return dx;
}

// ---- pooling ----------------------------------------------------------------

// Max pooling; ties resolve to the first element in row-major window order.
inline Tensor maxpool_fw(const Tensor& x, index_t win, index_t stride,
                         bool ceil_mode, const RunContext& ctx = {}) {
  check_shape(x.ndims() == 3, "maxpool_fw expects an activation tensor");
  const index_t ho = nndetail::pool_out(x.h(), win, stride, ceil_mode);
  const index_t wo = nndetail::pool_out(x.w(), win, stride, ceil_mode);
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  Tensor y = Tensor::activation(x.elem(), x.layout(), x.c(), ho, wo);
  std::uint64_t loads = 0;
  for (index_t c = 0; c < x.c(); ++c) {
    for (index_t oy = 0; oy < ho; ++oy) {
      for (index_t ox = 0; ox < wo; ++ox) {
        const index_t ye = std::min(oy * stride + win, x.h());
        const index_t xe = std::min(ox * stride + win, x.w());
        float best = -std::numeric_limits<float>::infinity();
        for (index_t yy = oy * stride; yy < ye; ++yy) {
          for (index_t xx = ox * stride; xx < xe; ++xx) {
            best = std::max(best, x.get_act(c, yy, xx));
            ++loads;
          }
        }
        y.set_act(c, oy, ox, best);
      }
    }
  }
  nndetail::bump(ctx, loads, static_cast<std::uint64_t>(y.count()), 0);
  return y;
}

// Routes each output gradient to the window element that won the forward max
// (recomputed from the saved input; overlapping windows accumulate).
inline Tensor maxpool_bw(const Tensor& x, const Tensor& dy, index_t win,
                         index_t stride, bool ceil_mode, const RunContext& ctx = {}) {
  check_shape(x.ndims() == 3 && dy.ndims() == 3 && x.c() == dy.c(),
              "maxpool_bw: shape mismatch");
  const index_t ho = nndetail::pool_out(x.h(), win, stride, ceil_mode);
  const index_t wo = nndetail::pool_out(x.w(), win, stride, ceil_mode);
  check_shape(dy.h() == ho && dy.w() == wo, "maxpool_bw: dy does not match pool output");
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  Tensor dx = Tensor::activation(x.elem(), x.layout(), x.c(), x.h(), x.w());
  std::uint64_t loads = 0, stores = 0;
  for (index_t c = 0; c < x.c(); ++c) {
    for (index_t oy = 0; oy < ho; ++oy) {
      for (index_t ox = 0; ox < wo; ++ox) {
        const index_t ye = std::min(oy * stride + win, x.h());
        const index_t xe = std::min(ox * stride + win, x.w());
        index_t by = oy * stride, bx = ox * stride;
        float best = -std::numeric_limits<float>::infinity();
        for (index_t yy = oy * stride; yy < ye; ++yy) {
          for (index_t xx = ox * stride; xx < xe; ++xx) {
            const float v = x.get_act(c, yy, xx);
            ++loads;
            if (v > best) {
              best = v;
              by = yy;
              bx = xx;
            }
          }
        }
        dx.set_act(c, by, bx, dx.get_act(c, by, bx) + dy.get_act(c, oy, ox));
        loads += 2;
        ++stores;
      }
    }
  }
  nndetail::bump(ctx, loads, stores, 0);
  return dx;
}

// Average pooling; clipped windows (ceil mode) average over the elements
// actually present.
inline Tensor avgpool_fw(const Tensor& x, index_t win, index_t stride,
                         bool ceil_mode, const RunContext& ctx = {}) {
  check_shape(x.ndims() == 3, "avgpool_fw expects an activation tensor");
  const index_t ho = nndetail::pool_out(x.h(), win, stride, ceil_mode);
  const index_t wo = nndetail::pool_out(x.w(), win, stride, ceil_mode);
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  Tensor y = Tensor::activation(x.elem(), x.layout(), x.c(), ho, wo);
  std::uint64_t loads = 0;
  for (index_t c = 0; c < x.c(); ++c) {
    for (index_t oy = 0; oy < ho; ++oy) {
      for (index_t ox = 0; ox < wo; ++ox) {
        const index_t ye = std::min(oy * stride + win, x.h());
        const index_t xe = std::min(ox * stride + win, x.w());
        float sum = 0.0f;
        for (index_t yy = oy * stride; yy < ye; ++yy) {
          for (index_t xx = ox * stride; xx < xe; ++xx) {
            sum += x.get_act(c, yy, xx);
            ++loads;
          }
        }
        const auto cnt = static_cast<float>((ye - oy * stride) * (xe - ox * stride));
        y.set_act(c, oy, ox, sum / cnt);
      }
    }
  }
  nndetail::bump(ctx, loads, static_cast<std::uint64_t>(y.count()), 0);
  return y;
}

inline Tensor avgpool_bw(const Tensor& x, const Tensor& dy, index_t win,
                         index_t stride, bool ceil_mode, const RunContext& ctx = {}) {
  check_shape(x.ndims() == 3 && dy.ndims() == 3 && x.c() == dy.c(),
              "avgpool_bw: shape mismatch");
  const index_t ho = nndetail::pool_out(x.h(), win, stride, ceil_mode);
  const index_t wo = nndetail::pool_out(x.w(), win, stride, ceil_mode);
  check_shape(dy.h() == ho && dy.w() == wo, "avgpool_bw: dy does not match pool output");
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  Tensor dx = Tensor::activation(x.elem(), x.layout(), x.c(), x.h(), x.w());
  std::uint64_t loads = 0, stores = 0;
  for (index_t c = 0; c < x.c(); ++c) {
    for (index_t oy = 0; oy < ho; ++oy) {
      for (index_t ox = 0; ox < wo; ++ox) {
        const index_t ye = std::min(oy * stride + win, x.h());
        const index_t xe = std::min(ox * stride + win, x.w());
        const auto cnt = static_cast<float>((ye - oy * stride) * (xe - ox * stride));
        const float g = dy.get_act(c, oy, ox) / cnt;
        ++loads;
        for (index_t yy = oy * stride; yy < ye; ++yy) {
          for (index_t xx = ox * stride; xx < xe; ++xx) {
            dx.set_act(c, yy, xx, dx.get_act(c, yy, xx) + g);
            ++loads;
            ++stores;
          }
        }
      }
    }
  }
  nndetail::bump(ctx, loads, stores, 0);
  return dx;
}

// Global average pool (C,H,W) -> (C,1,1); a sequential sum per channel.
inline Tensor global_avg_fw(const Tensor& x, const RunContext& ctx = {}) {
  check_shape(x.ndims() == 3, "global_avg_fw expects an activation tensor");
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  Tensor y = Tensor::activation(x.elem(), x.layout(), x.c(), 1, 1);
  const auto inv = 1.0f / static_cast<float>(x.h() * x.w());
  for (index_t c = 0; c < x.c(); ++c) {
    float sum = 0.0f;
    for (index_t yy = 0; yy < x.h(); ++yy) {
      for (index_t xx = 0; xx < x.w(); ++xx) sum += x.get_act(c, yy, xx);
    }
    y.set_act(c, 0, 0, sum * inv);
  }
  nndetail::bump(ctx, static_cast<std::uint64_t>(x.count()),
                 static_cast<std::uint64_t>(x.c()), 0);
  return y;
}

inline Tensor global_avg_bw(const Tensor& x, const Tensor& dy,
                            const RunContext& ctx = {}) {
  check_shape(x.ndims() == 3 && dy.ndims() == 3 && dy.c() == x.c() && dy.h() == 1 &&
                  dy.w() == 1,
              "global_avg_bw: shape mismatch");
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  Tensor dx = Tensor::activation(x.elem(), x.layout(), x.c(), x.h(), x.w());
  const auto inv = 1.0f / static_cast<float>(x.h() * x.w());
  for (index_t c = 0; c < x.c(); ++c) {
    const float g = dy.get_act(c, 0, 0) * inv;
    for (index_t yy = 0; yy < x.h(); ++yy) {
      for (index_t xx = 0; xx < x.w(); ++xx) dx.set_act(c, yy, xx, g);
    }
  }
  nndetail::bump(ctx, static_cast<std::uint64_t>(x.c()),
                 static_cast<std::uint64_t>(dx.count()), 0);
  return dx;
}

// Residual connection: dst += src, elementwise (halves round once).
inline void add_into(Tensor& dst, const Tensor& src, const RunContext& ctx = {}) {
  check_shape(dst.ndims() == src.ndims() && dst.count() == src.count(),
              "add_into: shape mismatch");
  check_config(dst.elem() == src.elem() && dst.layout() == src.layout(),
               "add_into: storage mismatch");
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  const index_t n = dst.count();
  auto run = [&](auto* dp, auto* sp) {
    for (index_t i = 0; i < n; ++i) {
      nndetail::stv(dp, i, nndetail::ld(dp, i) + nndetail::ld(sp, i));
    }
  };
  if (dst.elem() == ElemType::F32) {
    run(dst.data<float>(), src.data<float>());
  } else {
    run(dst.data<half_t>(), src.data<half_t>());
  }
  nndetail::bump(ctx, 2 * static_cast<std::uint64_t>(n),
                 static_cast<std::uint64_t>(n), 0);
}

// ---- depthwise convolution ----------------------------------------------------

// Depthwise layers stay on the direct per-channel path: each channel is an
// independent small 2D convolution, which the lowered matrix form cannot
// batch (the lowered matrix would be block-diagonal). They are CHW-only —
// per-channel walks want each channel's plane contiguous — so models running
// HWC relayout at the layer boundary. Weights are stored (C, 1, k, k),
// always in normal storage. Accumulation per output element is strictly
// k-ordered; halves honor RunContext::f16_acc.
struct DwLayer {
  index_t c = 0, h_in = 0, w_in = 0;
  index_t k = 0, pad = 0;
  Layout layout = Layout::HWC;
  ElemType elem = ElemType::F32;
  Tensor w;
  Tensor x_saved;
  bool has_x = false;

  index_t h_out() const { return h_in + 2 * pad - k + 1; }
  index_t w_out() const { return w_in + 2 * pad - k + 1; }
};

inline DwLayer make_dw(index_t c, index_t h, index_t w, index_t k, index_t pad,
                       Layout layout, ElemType elem) {
  check_config(layout == Layout::CHW,
               "make_dw: depthwise layers are CHW-only; relayout at the boundary");
  check_config(c >= 1 && h >= 1 && w >= 1 && k >= 1 && pad >= 0,
               "make_dw: bad geometry");
  check_config(h + 2 * pad - k + 1 >= 1 && w + 2 * pad - k + 1 >= 1,
               "make_dw: empty output");
  DwLayer st;
  st.c = c;
  st.h_in = h;
  st.w_in = w;
  st.k = k;
  st.pad = pad;
  st.layout = layout;
  st.elem = elem;
  st.w = Tensor::weights(elem, layout, c, 1, k, k);
  return st;
}

namespace nndetail {

// One accumulation chain in the element type's semantics. The accumulator is
// a float; in native half mode it always holds an exactly representable half
// (half_mac rounds each step), in wide mode it rounds once at the store.
template <typename T>
struct DwAcc {
  float acc = 0.0f;
  bool wide;
  explicit DwAcc(const RunContext& ctx)
      : wide(std::is_same_v<T, float> || ctx.f16_acc == F16Acc::F32) {}
  void mac(float a, float b) {
    acc = wide ? std::fma(a, b, acc) : half_mac(acc, a, b);
  }
  float value() const { return acc; }
};

}  // namespace nndetail

inline Tensor dw_fw(DwLayer& st, const Tensor& x, const RunContext& ctx = {}) {
  check_shape(x.ndims() == 3 && x.c() == st.c && x.h() == st.h_in && x.w() == st.w_in,
              "dw_fw: input shape mismatch");
  check_config(x.elem() == st.elem && x.layout() == st.layout,
               "dw_fw: storage mismatch");
  st.x_saved = x.clone();
  st.has_x = true;
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  Tensor y = Tensor::activation(st.elem, st.layout, st.c, st.h_out(), st.w_out());
  std::uint64_t loads = 0, macs = 0;
  auto run = [&]<typename T>(T) {
    for (index_t c = 0; c < st.c; ++c) {
      for (index_t oy = 0; oy < st.h_out(); ++oy) {
        for (index_t ox = 0; ox < st.w_out(); ++ox) {
          nndetail::DwAcc<T> acc(ctx);
          for (index_t a = 0; a < st.k; ++a) {
            const index_t yy = oy + a - st.pad;
            if (yy < 0 || yy >= st.h_in) continue;
            for (index_t b = 0; b < st.k; ++b) {
              const index_t xx = ox + b - st.pad;
              if (xx < 0 || xx >= st.w_in) continue;
              acc.mac(x.get_act(c, yy, xx), st.w.get_w(c, 0, a, b));
              loads += 2;
              ++macs;
            }
          }
          y.set_act(c, oy, ox, acc.value());
        }
      }
    }
  };
  if (st.elem == ElemType::F32) {
    run(float{});
  } else {
    run(half_t{});
  }
  nndetail::bump(ctx, loads, static_cast<std::uint64_t>(y.count()), macs);
  return y;
}

// dX[c] = dY[c] correlated against the spatially reversed per-channel window.
inline Tensor dw_bw_ig(const DwLayer& st, const Tensor& dy, const RunContext& ctx = {}) {
  check_shape(dy.ndims() == 3 && dy.c() == st.c && dy.h() == st.h_out() &&
                  dy.w() == st.w_out(),
              "dw_bw_ig: dy shape mismatch");
  check_config(dy.elem() == st.elem && dy.layout() == st.layout,
               "dw_bw_ig: storage mismatch");
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  Tensor dx = Tensor::activation(st.elem, st.layout, st.c, st.h_in, st.w_in);
  std::uint64_t loads = 0, macs = 0;
  auto run = [&]<typename T>(T) {
    for (index_t c = 0; c < st.c; ++c) {
      for (index_t y = 0; y < st.h_in; ++y) {
        for (index_t x = 0; x < st.w_in; ++x) {
          nndetail::DwAcc<T> acc(ctx);
          for (index_t a = 0; a < st.k; ++a) {
            const index_t oy = y + st.pad - a;
            if (oy < 0 || oy >= st.h_out()) continue;
            for (index_t b = 0; b < st.k; ++b) {
              const index_t ox = x + st.pad - b;
              if (ox < 0 || ox >= st.w_out()) continue;
              acc.mac(dy.get_act(c, oy, ox), st.w.get_w(c, 0, a, b));
              loads += 2;
              ++macs;
            }
          }
          dx.set_act(c, y, x, acc.value());
        }
      }
    }
  };
  if (st.elem == ElemType::F32) {
    run(float{});
  } else {
    run(half_t{});
  }
  nndetail::bump(ctx, loads, static_cast<std::uint64_t>(dx.count()), macs);
  return dx;
}

inline Tensor dw_bw_wg(const DwLayer& st, const Tensor& dy, const RunContext& ctx = {}) {
  check_config(st.has_x, "dw_bw_wg: no saved input (run dw_fw first)");
  check_shape(dy.ndims() == 3 && dy.c() == st.c && dy.h() == st.h_out() &&
                  dy.w() == st.w_out(),
              "dw_bw_wg: dy shape mismatch");
  check_config(dy.elem() == st.elem && dy.layout() == st.layout,
               "dw_bw_wg: storage mismatch");
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  Tensor dw = Tensor::weights(st.elem, st.layout, st.c, 1, st.k, st.k);
  std::uint64_t loads = 0, macs = 0;
  auto run = [&]<typename T>(T) {
    for (index_t c = 0; c < st.c; ++c) {
      for (index_t a = 0; a < st.k; ++a) {
        for (index_t b = 0; b < st.k; ++b) {
          nndetail::DwAcc<T> acc(ctx);
          for (index_t oy = 0; oy < st.h_out(); ++oy) {
            const index_t yy = oy + a - st.pad;
            if (yy < 0 || yy >= st.h_in) continue;
            for (index_t ox = 0; ox < st.w_out(); ++ox) {
              const index_t xx = ox + b - st.pad;
              if (xx < 0 || xx >= st.w_in) continue;
              acc.mac(st.x_saved.get_act(c, yy, xx), dy.get_act(c, oy, ox));
              loads += 2;
              ++macs;
            }
          }
          dw.set_w(c, 0, a, b, acc.value());
        }
      }
    }
  };
  if (st.elem == ElemType::F32) {
    run(float{});
  } else {
    run(half_t{});
  }
  nndetail::bump(ctx, loads, static_cast<std::uint64_t>(dw.count()), macs);
  return dw;
}

}  // namespace tinytrain
