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

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "tinytrain/common.hpp"

namespace tinytrain {

// Element types supported by every kernel and container.
enum class ElemType : std::uint8_t {
  F32 = 0,  // IEEE binary32
  F16 = 1,  // 16-bit float; flavor (binary16 / bfloat16) is a global switch
};

// Activation memory order. CHW keeps each channel plane contiguous; HWC keeps
// the channels of one pixel contiguous. Both describe the same logical
// (C, H, W) tensor.
enum class Layout : std::uint8_t {
  CHW = 0,
  HWC = 1,
};

constexpr std::size_t elem_size(ElemType t) {
  return t == ElemType::F32 ? 4u : 2u;
}

constexpr const char* to_string(ElemType t) {
  return t == ElemType::F32 ? "f32" : "f16";
}

constexpr const char* to_string(Layout l) {
  return l == Layout::CHW ? "chw" : "hwc";
}

inline ElemType parse_elem(std::string_view s) {
  if (s == "f32") return ElemType::F32;
  if (s == "f16") return ElemType::F16;
  throw ConfigError("unknown elem type: " + std::string(s));
}

inline Layout parse_layout(std::string_view s) {
  if (s == "chw") return Layout::CHW;
  if (s == "hwc") return Layout::HWC;
  throw ConfigError("unknown layout: " + std::string(s));
}

}  // namespace tinytrain
