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

// Convolution training primitives, lowered onto matrix multiplication.
//
// Per training step of a layer (single sample, stride 1, no bias):
//   forward          Y  = conv(X, W)
//   input gradient   dX = conv over dY with border k-1-pad and BT(W)
//   weight gradient  dW = windows of X correlated with dY
//
// Each (layout, element type) pair maps onto a fixed operand arrangement:
// f32 uses the plain mm form, f16 uses the transposed mm_t form with
// transposed HWC weight storage. The input gradient is literally the forward
// primitive applied to (dY, BT(W)) under the gradient geometry, and the
// pointwise (1x1) fast path falls out of the lowering helpers: a 1x1 window
// needs no im2row/im2col at all, at most a plain matrix transpose.
//
// All lowering/transpose scratch comes from the context arena (a per-call
// heap arena when none is provided), so the tiling engine can run the same
// code against a bounded scratchpad.

#include <type_traits>

#include "tinytrain/mm.hpp"
#include "tinytrain/transforms.hpp"

namespace tinytrain {

// Weight storage rule: the half-precision HWC path keeps weights (and weight
// gradients) in transposed storage; everything else uses normal storage.
constexpr bool weights_transposed(Layout l, ElemType e) {
  return l == Layout::HWC && e == ElemType::F16;
}

// One convolution layer: geometry, storage conventions, kernel preferences,
// and the forward input retained for the weight-gradient pass.
struct LayerState {
  ConvSpec spec;
  Layout layout = Layout::HWC;
  ElemType elem = ElemType::F32;
  KernelVariant variant = KernelVariant::naive();
  Tensor w;
  Tensor x_saved;
  bool has_x = false;
};

// The kernel most appropriate for the element type: the widest unrolling for
// f32, the paired-lane kernel for f16.
inline KernelVariant default_variant(ElemType e) {
  return e == ElemType::F32 ? KernelVariant::unrolled(2, 4)
                            : KernelVariant::f16_lanes2();
}

inline LayerState make_layer(const ConvSpec& spec, Layout layout, ElemType elem,
                             KernelVariant variant) {
  spec.validate();
  variant.validate(elem);
  LayerState st;
  st.spec = spec;
  st.layout = layout;
  st.elem = elem;
  st.variant = variant;
  st.w = Tensor::weights(elem, layout, spec.c_out, spec.c_in, spec.k_h, spec.k_w,
                         weights_transposed(layout, elem));
  return st;
}

inline LayerState make_layer(const ConvSpec& spec, Layout layout, ElemType elem) {
  return make_layer(spec, layout, elem, default_variant(elem));
}

namespace convdetail {

constexpr bool is_pointwise_geom(const WindowGeom& g) {
  return g.k_h == 1 && g.k_w == 1 && g.pad_top == 0 && g.pad_left == 0 &&
         g.h_out == g.h && g.w_out == g.w;
}

template <typename T>
MatView<T> arena_mat(Arena& ar, index_t rows, index_t cols) {
  return {ar.allocate_n<T>(static_cast<std::size_t>(rows * cols)), rows, cols};
}

template <typename T>
MatView<const T> tr_into(Arena& ar, MatView<const T> m, const RunContext& ctx) {
  MatView<T> out = arena_mat<T>(ar, m.cols, m.rows);
  transpose<T>(m, out, ctx);
  return out;
}

// The spatial-rows arrangement of the lowered input: im2row, or its 1x1
// degenerate forms (HWC: the activation matrix itself; CHW: one transpose).
template <typename T>
MatView<const T> lowered_rows(const Tensor& act, const WindowGeom& g, Arena& ar,
                              const RunContext& ctx) {
  if (is_pointwise_geom(g)) {
    if (act.layout() == Layout::HWC) return act_matrix<T>(act);
    return tr_into<T>(ar, act_matrix<T>(act), ctx);
  }
  MatView<T> dst = arena_mat<T>(ar, g.h_out * g.w_out, g.lowered_cols());
  im2row<T>(act, g, dst, ctx);
  return dst;
}

// The lowered-rows-as-columns arrangement: im2col, or its 1x1 degenerate
// forms (CHW: the activation matrix itself; HWC: one transpose).
template <typename T>
MatView<const T> lowered_cols(const Tensor& act, const WindowGeom& g, Arena& ar,
                              const RunContext& ctx) {
  if (is_pointwise_geom(g)) {
    if (act.layout() == Layout::CHW) return act_matrix<T>(act);
    return tr_into<T>(ar, act_matrix<T>(act), ctx);
  }
  MatView<T> dst = arena_mat<T>(ar, g.lowered_cols(), g.h_out * g.w_out);
  im2col<T>(act, g, dst, ctx);
  return dst;
}

template <typename T>
KernelVariant form_for(KernelVariant v) {
  v.form = std::is_same_v<T, float> ? MmForm::Mm : MmForm::MmT;
  return v;
}

// Forward in its lowered form. Also computes the input gradient when called
// as (dY, BT(W), dX, gradient geometry) — the formulas coincide.
template <typename T>
void step_fw(const Tensor& x, const Tensor& w, Tensor& y, const WindowGeom& g,
             KernelVariant v, const RunContext& ctx, Arena& ar) {
  constexpr bool f32 = std::is_same_v<T, float>;
  v = form_for<T>(v);
  ArenaFrame frame(ar);
  MatView<T> ymat = act_matrix<T>(y);
  if (x.layout() == Layout::HWC) {
    MatView<const T> a = lowered_rows<T>(x, g, ar, ctx);
    if constexpr (f32) {
      mm<T>(a, weight_matrix<T>(w), ymat, v, ctx);
    } else {
      mm_t<T>(a, weight_matrix<T>(w), ymat, v, ctx);
    }
  } else {
    MatView<const T> wm = weight_matrix<T>(w);
    if constexpr (f32) {
      mm<T>(wm, lowered_cols<T>(x, g, ar, ctx), ymat, v, ctx);
    } else {
      mm_t<T>(wm, lowered_rows<T>(x, g, ar, ctx), ymat, v, ctx);
    }
  }
}

// Weight gradient. `accumulate` continues element accumulation on top of the
// current dw contents (the tiling engine's reduction-split carry); public
// entry points always pass false.
template <typename T>
void step_wg(const Tensor& x, const Tensor& dy, Tensor& dw, const WindowGeom& g,
             KernelVariant v, const RunContext& ctx, Arena& ar, bool accumulate) {
  constexpr bool f32 = std::is_same_v<T, float>;
  v = form_for<T>(v);
  ArenaFrame frame(ar);
  MatView<T> dwm = weight_matrix<T>(dw);
  MatView<const T> dymat = act_matrix<T>(dy);
  auto run_mm = [&](MatView<const T> a, MatView<const T> b) {
    accumulate ? mmdetail::mm_acc<T>(a, b, dwm, v, ctx)
               : mm<T>(a, b, dwm, v, ctx);
  };
  auto run_mm_t = [&](MatView<const T> a, MatView<const T> bt) {
    accumulate ? mmdetail::mm_t_acc<T>(a, bt, dwm, v, ctx)
               : mm_t<T>(a, bt, dwm, v, ctx);
  };
  if (x.layout() == Layout::HWC) {
    MatView<const T> xcols = lowered_cols<T>(x, g, ar, ctx);
    if constexpr (f32) {
      run_mm(xcols, dymat);
    } else {
      run_mm_t(tr_into<T>(ar, dymat, ctx), xcols);
    }
  } else {
    if constexpr (f32) {
      run_mm(dymat, lowered_rows<T>(x, g, ar, ctx));
    } else {
      run_mm_t(dymat, lowered_cols<T>(x, g, ar, ctx));
    }
  }
}

// Block-transpose of w materialized in the arena (output-channel range
// [ob, oe) of the result), keeping w's storage idiom.
template <typename T>
Tensor bt_slice(const Tensor& w, index_t ob, index_t oe, Arena& ar,
                const RunContext& ctx) {
  Tensor out = Tensor::weights_view(
      ar.allocate((oe - ob) * w.co() * w.kh() * w.kw() * sizeof(T)), w.elem(),
      w.layout(), oe - ob, w.co(), w.kh(), w.kw(), w.transposed());
  tfdetail::block_transpose_range<T>(w, out, ob, oe, ctx);
  return out;
}

inline void check_act(const Tensor& t, const LayerState& st, index_t c, index_t h,
                      index_t w, const char* what) {
  check_shape(t.ndims() == 3 && t.c() == c && t.h() == h && t.w() == w,
              std::string(what) + ": activation shape mismatch");
  check_config(t.elem() == st.elem && t.layout() == st.layout,
               std::string(what) + ": elem/layout mismatch with the layer");
}

struct ArenaOrLocal {
  HeapArena local;
  Arena* use;
  explicit ArenaOrLocal(const RunContext& ctx)
      : use(ctx.arena != nullptr ? ctx.arena : &local) {}
};

// Zero-filled output buffers and the save-for-backward clone are real data
// movement, not dispatch; charge them to the copy phase so a step's phase
// breakdown leaves only loop glue unaccounted.
inline Tensor alloc_act(const RunContext& ctx, ElemType elem, Layout layout,
                        index_t c, index_t h, index_t w) {
  ScopedPhase phase(ctx.profiler, Phase::Copy);
  return Tensor::activation(elem, layout, c, h, w);
}

inline Tensor alloc_w(const RunContext& ctx, ElemType elem, Layout layout,
                      index_t co, index_t ci, index_t kh, index_t kw,
                      bool transposed) {
  ScopedPhase phase(ctx.profiler, Phase::Copy);
  return Tensor::weights(elem, layout, co, ci, kh, kw, transposed);
}

}  // namespace convdetail

// ---- public training primitives -------------------------------------------

// Forward pass; retains X in the state for the weight-gradient pass.
inline Tensor conv2d_fw(LayerState& st, const Tensor& x, const RunContext& ctx = {}) {
  st.spec.validate();
  st.variant.validate(st.elem);
  convdetail::check_act(x, st, st.spec.c_in, st.spec.h_in, st.spec.w_in, "conv2d_fw");
  check_config(st.w.transposed() == weights_transposed(st.layout, st.elem),
               "conv2d_fw: weight storage does not match the layout/elem rule");
  {
    ScopedPhase phase(ctx.profiler, Phase::Copy);
    st.x_saved = x.clone();
  }
  st.has_x = true;
  Tensor y = convdetail::alloc_act(ctx, st.elem, st.layout, st.spec.c_out,
                                   st.spec.h_out(), st.spec.w_out());
  convdetail::ArenaOrLocal ar(ctx);
  const WindowGeom g = WindowGeom::forward(st.spec);
  if (st.elem == ElemType::F32) {
    convdetail::step_fw<float>(x, st.w, y, g, st.variant, ctx, *ar.use);
  } else {
    convdetail::step_fw<half_t>(x, st.w, y, g, st.variant, ctx, *ar.use);
  }
  return y;
}

// Input gradient: dX from dY. Does not need the saved input.
inline Tensor conv2d_bw_ig(const LayerState& st, const Tensor& dy,
                           const RunContext& ctx = {}) {
  st.spec.validate();
  st.variant.validate(st.elem);
  convdetail::check_act(dy, st, st.spec.c_out, st.spec.h_out(), st.spec.w_out(),
                        "conv2d_bw_ig");
  Tensor dx = convdetail::alloc_act(ctx, st.elem, st.layout, st.spec.c_in,
                                    st.spec.h_in, st.spec.w_in);
  convdetail::ArenaOrLocal ar(ctx);
  ArenaFrame frame(*ar.use);
  const WindowGeom gi = WindowGeom::input_grad(st.spec);
  if (st.elem == ElemType::F32) {
    Tensor bt = convdetail::bt_slice<float>(st.w, 0, st.w.ci(), *ar.use, ctx);
    convdetail::step_fw<float>(dy, bt, dx, gi, st.variant, ctx, *ar.use);
  } else {
    Tensor bt = convdetail::bt_slice<half_t>(st.w, 0, st.w.ci(), *ar.use, ctx);
    convdetail::step_fw<half_t>(dy, bt, dx, gi, st.variant, ctx, *ar.use);
  }
  return dx;
}

// Weight gradient: dW from the saved X and dY, in the layer's weight storage.
inline Tensor conv2d_bw_wg(const LayerState& st, const Tensor& dy,
                           const RunContext& ctx = {}) {
  st.spec.validate();
  st.variant.validate(st.elem);
  check_config(st.has_x, "conv2d_bw_wg: no saved input (run conv2d_fw first)");
  convdetail::check_act(dy, st, st.spec.c_out, st.spec.h_out(), st.spec.w_out(),
                        "conv2d_bw_wg");
  Tensor dw = convdetail::alloc_w(ctx, st.elem, st.layout, st.spec.c_out,
                                  st.spec.c_in, st.spec.k_h, st.spec.k_w,
                                  weights_transposed(st.layout, st.elem));
  convdetail::ArenaOrLocal ar(ctx);
  const WindowGeom g = WindowGeom::forward(st.spec);
  if (st.elem == ElemType::F32) {
    convdetail::step_wg<float>(st.x_saved, dy, dw, g, st.variant, ctx, *ar.use,
                               false);
  } else {
    convdetail::step_wg<half_t>(st.x_saved, dy, dw, g, st.variant, ctx, *ar.use,
                                false);
  }
  return dw;
}

// ---- pointwise (1x1) and fully connected -----------------------------------

// The 1x1 entries are the same primitives with the pointwise fast path
// guaranteed by construction (no lowering copies; transform phase stays
// zero). They exist as named entry points because 1x1 layers are planned and
// reported as their own operator kind.
inline Tensor pointwise_fw(LayerState& st, const Tensor& x, const RunContext& ctx = {}) {
  check_config(st.spec.is_pointwise(), "pointwise_fw: spec is not 1x1/pad0");
  return conv2d_fw(st, x, ctx);
}
inline Tensor pointwise_bw_ig(const LayerState& st, const Tensor& dy,
                              const RunContext& ctx = {}) {
  check_config(st.spec.is_pointwise(), "pointwise_bw_ig: spec is not 1x1/pad0");
  return conv2d_bw_ig(st, dy, ctx);
}
inline Tensor pointwise_bw_wg(const LayerState& st, const Tensor& dy,
                              const RunContext& ctx = {}) {
  check_config(st.spec.is_pointwise(), "pointwise_bw_wg: spec is not 1x1/pad0");
  return conv2d_bw_wg(st, dy, ctx);
}

// A fully connected layer is the 1x1 pointwise layer on a (C, 1, 1)
// activation; these wrappers only pin that shape.
inline LayerState make_fc(index_t in, index_t out, Layout layout, ElemType elem) {
  return make_layer(ConvSpec{in, 1, 1, out, 1, 1, 0}, layout, elem,
                    elem == ElemType::F32 ? KernelVariant::naive()
                                          : KernelVariant::f16_lanes2());
}
inline Tensor fc_fw(LayerState& st, const Tensor& x, const RunContext& ctx = {}) {
  check_config(st.spec.h_in == 1 && st.spec.w_in == 1 && st.spec.is_pointwise(),
               "fc_fw: layer is not a (C,1,1) pointwise layer");
  return conv2d_fw(st, x, ctx);
}
inline Tensor fc_bw_ig(const LayerState& st, const Tensor& dy,
                       const RunContext& ctx = {}) {
  return conv2d_bw_ig(st, dy, ctx);
}
inline Tensor fc_bw_wg(const LayerState& st, const Tensor& dy,
                       const RunContext& ctx = {}) {
  return conv2d_bw_wg(st, dy, ctx);
}

// ---- optimizer --------------------------------------------------------------

// Plain SGD descent step W <- W - lr*dW, elementwise in the weight's element
// type (halves round once per element).
inline void sgd_update(Tensor& w, const Tensor& dw, float lr,
                       const RunContext& ctx = {}) {
  check_shape(w.ndims() == dw.ndims() && w.count() == dw.count(),
              "sgd_update: shape mismatch");
  check_config(w.elem() == dw.elem() && w.layout() == dw.layout() &&
                   w.transposed() == dw.transposed(),
               "sgd_update: storage mismatch");
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  const index_t n = w.count();
  if (w.elem() == ElemType::F32) {
    float* wp = w.data<float>();
    const float* gp = dw.data<float>();
    for (index_t i = 0; i < n; ++i) wp[i] -= lr * gp[i];
  } else {
    half_t* wp = w.data<half_t>();
    const half_t* gp = dw.data<half_t>();
    for (index_t i = 0; i < n; ++i) {
      wp[i] = half_from_float(half_to_float(wp[i]) - lr * half_to_float(gp[i]));
    }
  }
}

}  // namespace tinytrain
