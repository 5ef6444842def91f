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

// Dense tensor container with explicit memory-order conventions.
//
// Logical shapes are fixed per rank and never depend on the layout tag:
//   rank 1  vector      (n)
//   rank 2  matrix      (rows, cols), row-major
//   rank 3  activation  (C, H, W)
//   rank 4  weights     (C_O, C_I, k_h, k_w)
//
// The layout tag selects the buffer order:
//   activation CHW   offset = (c*H + h)*W + w            (channel planes)
//   activation HWC   offset = (h*W + w)*C + c            (pixel vectors)
//   weights CHW      (c_o, c_i, k_h, k_w)
//   weights HWC      (k_h, k_w, c_i, c_o)                "normal": the lowered
//                    weight matrix (k_h*k_w*C_I) x C_O is this buffer as-is
//   weights HWC^T    (c_o, k_h, k_w, c_i)                transposed storage for
//                    the half-precision row-by-row kernels
//
// A tensor either owns its buffer (zero-initialized) or is a borrowed view
// over externally managed memory (used for scratchpad tiles).

#include <array>
#include <cstring>
#include <random>
#include <vector>

#include "tinytrain/common.hpp"
#include "tinytrain/f16.hpp"
#include "tinytrain/matview.hpp"
#include "tinytrain/types.hpp"

namespace tinytrain {

class Tensor {
 public:
  Tensor() = default;

  // ---- owning factories (zero-initialized) ----
  static Tensor activation(ElemType e, Layout l, index_t c, index_t h, index_t w) {
    return Tensor(e, l, false, {c, h, w, 0}, 3, nullptr);
  }
  static Tensor weights(ElemType e, Layout l, index_t co, index_t ci, index_t kh,
                        index_t kw, bool transposed = false) {
    check_config(!(transposed && l == Layout::CHW),
                 "transposed weight storage is an HWC form");
    return Tensor(e, l, transposed, {co, ci, kh, kw}, 4, nullptr);
  }
  static Tensor matrix(ElemType e, index_t rows, index_t cols) {
    return Tensor(e, Layout::CHW, false, {rows, cols, 0, 0}, 2, nullptr);
  }
  static Tensor vec(ElemType e, index_t n) {
    return Tensor(e, Layout::CHW, false, {n, 0, 0, 0}, 1, nullptr);
  }

  // ---- borrowed views over external memory (not owned, not initialized) ----
  static Tensor activation_view(void* data, ElemType e, Layout l, index_t c,
                                index_t h, index_t w) {
    return Tensor(e, l, false, {c, h, w, 0}, 3, data);
  }
  static Tensor weights_view(void* data, ElemType e, Layout l, index_t co,
                             index_t ci, index_t kh, index_t kw,
                             bool transposed = false) {
    check_config(!(transposed && l == Layout::CHW),
                 "transposed weight storage is an HWC form");
    return Tensor(e, l, transposed, {co, ci, kh, kw}, 4, data);
  }
  static Tensor matrix_view(void* data, ElemType e, index_t rows, index_t cols) {
    return Tensor(e, Layout::CHW, false, {rows, cols, 0, 0}, 2, data);
  }

  // ---- metadata ----
  ElemType elem() const { return elem_; }
  Layout layout() const { return layout_; }
  bool transposed() const { return transposed_; }
  int ndims() const { return ndims_; }
  index_t dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
  bool owns() const { return !own_.empty(); }

  index_t c() const { return need(3), dims_[0]; }
  index_t h() const { return need(3), dims_[1]; }
  index_t w() const { return need(3), dims_[2]; }
  index_t co() const { return need(4), dims_[0]; }
  index_t ci() const { return need(4), dims_[1]; }
  index_t kh() const { return need(4), dims_[2]; }
  index_t kw() const { return need(4), dims_[3]; }
  index_t rows() const { return need(2), dims_[0]; }
  index_t cols() const { return need(2), dims_[1]; }

  index_t count() const {
    index_t n = 1;
    for (int i = 0; i < ndims_; ++i) n *= dims_[static_cast<std::size_t>(i)];
    return n;
  }
  std::size_t bytes() const {
    return static_cast<std::size_t>(count()) * elem_size(elem_);
  }

  // ---- raw access ----
  void* raw() { return data_; }
  const void* raw() const { return data_; }

  template <typename T>
  T* data() {
    check_elem<T>();
    return static_cast<T*>(data_);
  }
  template <typename T>
  const T* data() const {
    check_elem<T>();
    return static_cast<const T*>(data_);
  }

  // ---- buffer offsets per the conventions above ----
  index_t act_offset(index_t ci, index_t y, index_t x) const {
    need(3);
    return layout_ == Layout::CHW ? (ci * dims_[1] + y) * dims_[2] + x
                                  : (y * dims_[2] + x) * dims_[0] + ci;
  }
  index_t w_offset(index_t o, index_t i, index_t a, index_t b) const {
    need(4);
    const index_t co = dims_[0], ci = dims_[1], kh = dims_[2], kw = dims_[3];
    (void)kh;
    if (layout_ == Layout::CHW) return ((o * ci + i) * dims_[2] + a) * kw + b;
    if (!transposed_) return ((a * kw + b) * ci + i) * co + o;
    return ((o * dims_[2] + a) * kw + b) * ci + i;
  }

  // ---- scalar element access (converts halfs) ----
  float get_flat(index_t i) const {
    return elem_ == ElemType::F32 ? static_cast<const float*>(data_)[i]
                                  : half_to_float(static_cast<const half_t*>(data_)[i]);
  }
  void set_flat(index_t i, float v) {
    if (elem_ == ElemType::F32) {
      static_cast<float*>(data_)[i] = v;
    } else {
      static_cast<half_t*>(data_)[i] = half_from_float(v);
    }
  }
  float get_act(index_t ci, index_t y, index_t x) const {
    return get_flat(act_offset(ci, y, x));
  }
  void set_act(index_t ci, index_t y, index_t x, float v) {
    set_flat(act_offset(ci, y, x), v);
  }
  float get_w(index_t o, index_t i, index_t a, index_t b) const {
    return get_flat(w_offset(o, i, a, b));
  }
  void set_w(index_t o, index_t i, index_t a, index_t b, float v) {
    set_flat(w_offset(o, i, a, b), v);
  }

  // Deep copy; the result always owns its buffer.
  Tensor clone() const {
    Tensor t(elem_, layout_, transposed_, dims_, ndims_, nullptr);
    std::memcpy(t.data_, data_, bytes());
    return t;
  }

  // Move-only: an implicit copy would leave data_ aliased to the source's
  // buffer. Deep copies are spelled clone().
  Tensor(const Tensor&) = delete;
  Tensor& operator=(const Tensor&) = delete;
  Tensor(Tensor&& o) noexcept { *this = std::move(o); }
  Tensor& operator=(Tensor&& o) noexcept {
    if (this == &o) return *this;
    const bool owned = !o.own_.empty();
    elem_ = o.elem_;
    layout_ = o.layout_;
    transposed_ = o.transposed_;
    ndims_ = o.ndims_;
    dims_ = o.dims_;
    own_ = std::move(o.own_);
    data_ = owned ? own_.data() : o.data_;
    o.data_ = nullptr;
    o.ndims_ = 0;
    return *this;
  }

 private:
  Tensor(ElemType e, Layout l, bool transposed, std::array<index_t, 4> dims,
         int ndims, void* external)
      : elem_(e), layout_(l), transposed_(transposed), ndims_(ndims), dims_(dims) {
    for (int i = 0; i < ndims_; ++i) {
      check_shape(dims_[static_cast<std::size_t>(i)] > 0,
                  "tensor dims must be positive");
    }
    if (external != nullptr) {
      data_ = external;
    } else {
      own_.resize(bytes(), 0u);
      data_ = own_.data();
    }
  }

  void need(int nd) const {
    check_shape(ndims_ == nd, "tensor rank mismatch");
  }

  template <typename T>
  void check_elem() const {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, half_t>,
                  "tensors hold float or half_t");
    if constexpr (std::is_same_v<T, float>) {
      check_config(elem_ == ElemType::F32, "tensor is not f32");
    } else {
      check_config(elem_ == ElemType::F16, "tensor is not f16");
    }
  }

  ElemType elem_ = ElemType::F32;
  Layout layout_ = Layout::CHW;
  bool transposed_ = false;
  int ndims_ = 0;
  std::array<index_t, 4> dims_{};
  std::vector<unsigned char> own_;
  void* data_ = nullptr;
};

// ---- linear strides --------------------------------------------------------

// Element strides of the four weight indices, rendering w_offset as the
// linear form o*o_s + i*i_s + a*a_s + b*b_s. Hot loops hoist these instead
// of recomputing the layout arithmetic per element.
struct WStrides {
  index_t o_s, i_s, a_s, b_s;
};

inline WStrides w_strides(const Tensor& t) {
  check_shape(t.ndims() == 4, "w_strides applies to weight tensors");
  const index_t co = t.co(), ci = t.ci(), kh = t.kh(), kw = t.kw();
  (void)kh;
  if (t.layout() == Layout::CHW) return {ci * t.kh() * kw, t.kh() * kw, kw, 1};
  if (!t.transposed()) return {1, co, kw * ci * co, ci * co};
  return {t.kh() * kw * ci, 1, kw * ci, ci};
}

// Element strides of the three activation indices (c, y, x).
struct ActStrides {
  index_t c_s, y_s, x_s;
};

inline ActStrides act_strides(const Tensor& t) {
  check_shape(t.ndims() == 3, "act_strides applies to activation tensors");
  return t.layout() == Layout::CHW
             ? ActStrides{t.h() * t.w(), t.w(), 1}
             : ActStrides{1, t.w() * t.c(), t.c()};
}

// ---- matrix views --------------------------------------------------------

// The activation matrix of the lowered formulation: HWC yields
// (H*W) x C with pixels as rows; CHW yields C x (H*W) with channels as rows.
// Both are reinterpretations of the buffer — no copy.
template <typename T>
MatView<T> act_matrix(Tensor& t) {
  return t.layout() == Layout::HWC
             ? MatView<T>{t.data<T>(), t.h() * t.w(), t.c()}
             : MatView<T>{t.data<T>(), t.c(), t.h() * t.w()};
}
template <typename T>
MatView<const T> act_matrix(const Tensor& t) {
  return act_matrix<T>(const_cast<Tensor&>(t));
}

// The lowered weight matrix: CHW gives C_O x (C_I*k_h*k_w); HWC normal gives
// (k_h*k_w*C_I) x C_O; HWC transposed gives C_O x (k_h*k_w*C_I).
template <typename T>
MatView<T> weight_matrix(Tensor& t) {
  const index_t kk = t.kh() * t.kw();
  if (t.layout() == Layout::CHW) return {t.data<T>(), t.co(), t.ci() * kk};
  if (!t.transposed()) return {t.data<T>(), kk * t.ci(), t.co()};
  return {t.data<T>(), t.co(), kk * t.ci()};
}
template <typename T>
MatView<const T> weight_matrix(const Tensor& t) {
  return weight_matrix<T>(const_cast<Tensor&>(t));
}

template <typename T>
MatView<T> matrix_of(Tensor& t) {
  return {t.data<T>(), t.rows(), t.cols()};
}
template <typename T>
MatView<const T> matrix_of(const Tensor& t) {
  return matrix_of<T>(const_cast<Tensor&>(t));
}

// ---- conversions ----------------------------------------------------------

// Element-type conversion; metadata unchanged. F16 -> F32 is exact,
// F32 -> F16 rounds to nearest-even. Converting twice to the same target is
// idempotent (the first rounding already lands on a representable value).
inline Tensor convert(const Tensor& t, ElemType target) {
  if (t.elem() == target) return t.clone();
  Tensor out = [&] {
    switch (t.ndims()) {
      case 1: return Tensor::vec(target, t.dim(0));
      case 2: return Tensor::matrix(target, t.rows(), t.cols());
      case 3: return Tensor::activation(target, t.layout(), t.c(), t.h(), t.w());
      default:
        return Tensor::weights(target, t.layout(), t.co(), t.ci(), t.kh(), t.kw(),
                               t.transposed());
    }
  }();
  const index_t n = t.count();
  for (index_t i = 0; i < n; ++i) out.set_flat(i, t.get_flat(i));
  return out;
}

namespace detail {
template <typename T>
void relayout_typed(const Tensor& src, Tensor& dst) {
  const T* s = src.data<T>();
  T* d = dst.data<T>();
  for (index_t ci = 0; ci < src.c(); ++ci) {
    for (index_t y = 0; y < src.h(); ++y) {
      for (index_t x = 0; x < src.w(); ++x) {
        d[dst.act_offset(ci, y, x)] = s[src.act_offset(ci, y, x)];
      }
    }
  }
}
template <typename T>
void weights_reorder_typed(const Tensor& src, Tensor& dst) {
  const T* s = src.data<T>();
  T* d = dst.data<T>();
  for (index_t o = 0; o < src.co(); ++o) {
    for (index_t i = 0; i < src.ci(); ++i) {
      for (index_t a = 0; a < src.kh(); ++a) {
        for (index_t b = 0; b < src.kw(); ++b) {
          d[dst.w_offset(o, i, a, b)] = s[src.w_offset(o, i, a, b)];
        }
      }
    }
  }
}
}  // namespace detail

// Reorders an activation tensor into the target layout (bit-preserving).
inline Tensor relayout(const Tensor& t, Layout target) {
  check_shape(t.ndims() == 3, "relayout applies to activation tensors");
  if (t.layout() == target) return t.clone();
  Tensor out = Tensor::activation(t.elem(), target, t.c(), t.h(), t.w());
  if (t.elem() == ElemType::F32) {
    detail::relayout_typed<float>(t, out);
  } else {
    detail::relayout_typed<half_t>(t, out);
  }
  return out;
}

// Reorders a weight tensor into any of the three storage forms
// (bit-preserving). Used when constructing logically identical layers across
// layouts and when un-transposing half-precision weights.
inline Tensor weights_as(const Tensor& t, Layout target, bool transposed) {
  check_shape(t.ndims() == 4, "weights_as applies to weight tensors");
  if (t.layout() == target && t.transposed() == transposed) return t.clone();
  Tensor out =
      Tensor::weights(t.elem(), target, t.co(), t.ci(), t.kh(), t.kw(), transposed);
  if (t.elem() == ElemType::F32) {
    detail::weights_reorder_typed<float>(t, out);
  } else {
    detail::weights_reorder_typed<half_t>(t, out);
  }
  return out;
}

// ---- small utilities ------------------------------------------------------

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.elem() == b.elem() && a.count() == b.count() &&
         std::memcmp(a.raw(), b.raw(), a.bytes()) == 0;
}

// Seeded uniform fill in [lo, hi); halves are rounded on store. The generator
// is fixed (mt19937 + uniform_real_distribution) so a given seed reproduces
// the same tensor on a given platform.
inline void fill_uniform(Tensor& t, std::uint32_t seed, float lo = -1.0f,
                         float hi = 1.0f) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> dist(lo, hi);
  const index_t n = t.count();
  for (index_t i = 0; i < n; ++i) t.set_flat(i, dist(rng));
}

}  // namespace tinytrain
