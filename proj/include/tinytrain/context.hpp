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

#include <string_view>

#include "tinytrain/arena.hpp"
#include "tinytrain/counters.hpp"
#include "tinytrain/profile.hpp"
#include "tinytrain/workers.hpp"

namespace tinytrain {

// Accumulator width for half-precision kernels. Native keeps the running sum
// in the 16-bit format (one rounding per MAC); F32 accumulates in binary32
// and rounds once at writeback — an accuracy-study mode, not the default.
enum class F16Acc : std::uint8_t {
  Native = 0,
  F32 = 1,
};

constexpr const char* to_string(F16Acc a) {
  return a == F16Acc::Native ? "native" : "f32";
}

inline F16Acc parse_f16_acc(std::string_view s) {
  if (s == "native") return F16Acc::Native;
  if (s == "f32") return F16Acc::F32;
  throw ConfigError("unknown f16 accumulation mode: " + std::string(s));
}

// Per-call execution context threaded through all operations. Everything is
// optional; defaults give a single-worker run with no instrumentation and
// per-operation heap scratch.
struct RunContext {
  ExecConfig exec{};
  F16Acc f16_acc = F16Acc::Native;
  OpCounters* counters = nullptr;   // summed into when non-null
  PhaseProfiler* profiler = nullptr;
  Arena* arena = nullptr;           // scratch for transform/staging buffers
};

}  // namespace tinytrain
