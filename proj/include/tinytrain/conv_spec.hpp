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

#include <string>

#include "tinytrain/common.hpp"

namespace tinytrain {

// Convolution geometry: single sample, stride 1, dilation 1, square symmetric
// zero padding, no bias. Output extent H_O = H_I + 2*pad - k_h + 1 (same for
// width).
struct ConvSpec {
  index_t c_in = 0, h_in = 0, w_in = 0;
  index_t c_out = 0;
  index_t k_h = 0, k_w = 0;
  index_t pad = 0;

  index_t h_out() const { return h_in + 2 * pad - k_h + 1; }
  index_t w_out() const { return w_in + 2 * pad - k_w + 1; }

  bool is_pointwise() const { return k_h == 1 && k_w == 1 && pad == 0; }

  // MACs of one forward pass; backward passes have the same count.
  std::uint64_t mac_count() const {
    return static_cast<std::uint64_t>(h_out() * w_out()) *
           static_cast<std::uint64_t>(c_out) *
           static_cast<std::uint64_t>(c_in * k_h * k_w);
  }

  void validate() const {
    check_shape(c_in > 0 && h_in > 0 && w_in > 0 && c_out > 0,
                "conv spec: dims must be positive");
    check_shape(k_h > 0 && k_w > 0, "conv spec: kernel dims must be positive");
    check_shape(pad >= 0, "conv spec: pad must be non-negative");
    check_shape(h_out() >= 1 && w_out() >= 1,
                "conv spec: empty output (kernel larger than padded input)");
  }

  std::string to_string() const {
    return "(" + std::to_string(c_in) + "," + std::to_string(h_in) + "," +
           std::to_string(w_in) + ")->(" + std::to_string(c_out) + "," +
           std::to_string(h_out()) + "," + std::to_string(w_out()) + ") k" +
           std::to_string(k_h) + "x" + std::to_string(k_w) + " p" +
           std::to_string(pad);
  }
};

// Generalized sliding-window geometry used by the lowering transforms.
// Borders are signed and per-edge: the input-gradient pass needs border
// k-1-pad, which is negative when pad >= k (a crop, not a pad), and tiled
// execution needs asymmetric top offsets. The output extent is stored
// explicitly rather than derived so a tile can describe a partial range.
struct WindowGeom {
  index_t c = 0, h = 0, w = 0;  // source activation dims
  index_t k_h = 0, k_w = 0;
  index_t pad_top = 0, pad_left = 0;  // signed offsets of window (0,0)
  index_t h_out = 0, w_out = 0;

  // Length of one lowered row: every input element of one window.
  index_t lowered_cols() const { return k_h * k_w * c; }

  // Forward geometry of a conv layer.
  static WindowGeom forward(const ConvSpec& s) {
    return {s.c_in, s.h_in, s.w_in, s.k_h, s.k_w, s.pad, s.pad, s.h_out(), s.w_out()};
  }

  // Input-gradient geometry: slides the kernel over the output gradient with
  // border k-1-pad; the result extent equals the layer input extent.
  static WindowGeom input_grad(const ConvSpec& s) {
    return {s.c_out, s.h_out(), s.w_out(), s.k_h, s.k_w,
            s.k_h - 1 - s.pad, s.k_w - 1 - s.pad, s.h_in, s.w_in};
  }

  void validate() const {
    check_shape(c > 0 && h > 0 && w > 0 && k_h > 0 && k_w > 0,
                "window geom: dims must be positive");
    check_shape(h_out > 0 && w_out > 0, "window geom: empty output");
  }
};

}  // namespace tinytrain
