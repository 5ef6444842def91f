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

#include <array>
#include <chrono>
#include <cstdint>

namespace tinytrain {

// Phase buckets for the training-step time breakdown:
//   Mm        - matrix-multiplication kernels
//   Transform - im2row / im2col lowering copies
//   Transpose - matrix transposes and weight block-transposes
//   Copy      - staging copies (tile slabs, casts, accumulator writeback)
//   Direct    - non-lowered compute (depthwise, activations, pooling)
enum class Phase : int {
  Mm = 0,
  Transform,
  Transpose,
  Copy,
  Direct,
  kCount,
};

constexpr int kPhaseCount = static_cast<int>(Phase::kCount);

constexpr const char* to_string(Phase p) {
  switch (p) {
    case Phase::Mm: return "mm";
    case Phase::Transform: return "transform";
    case Phase::Transpose: return "transpose";
    case Phase::Copy: return "copy";
    case Phase::Direct: return "direct";
    default: return "?";
  }
}

// Accumulates nanoseconds per phase. Phases are entered and left on the
// calling thread (kernels parallelize inside a phase), so plain counters are
// enough. Snapshots make per-layer attribution cheap: take one before and
// after a step and subtract.
class PhaseProfiler {
 public:
  using Clock = std::chrono::steady_clock;

  void add(Phase p, std::uint64_t ns) { ns_[static_cast<int>(p)] += ns; }
  std::uint64_t ns(Phase p) const { return ns_[static_cast<int>(p)]; }

  std::uint64_t total_ns() const {
    std::uint64_t t = 0;
    for (auto v : ns_) t += v;
    return t;
  }

  void reset() { ns_.fill(0); }

  std::array<std::uint64_t, kPhaseCount> snapshot() const { return ns_; }

  static std::array<std::uint64_t, kPhaseCount> delta(
      const std::array<std::uint64_t, kPhaseCount>& before,
      const std::array<std::uint64_t, kPhaseCount>& after) {
    std::array<std::uint64_t, kPhaseCount> d{};
    for (int i = 0; i < kPhaseCount; ++i) d[i] = after[i] - before[i];
    return d;
  }

 private:
  std::array<std::uint64_t, kPhaseCount> ns_{};
};

// RAII phase timer; no-op when no profiler is attached.
class ScopedPhase {
 public:
  ScopedPhase(PhaseProfiler* prof, Phase phase) : prof_(prof), phase_(phase) {
    if (prof_) t0_ = PhaseProfiler::Clock::now();
  }
  ~ScopedPhase() {
    if (prof_) {
      const auto t1 = PhaseProfiler::Clock::now();
      prof_->add(phase_, static_cast<std::uint64_t>(
                             std::chrono::duration_cast<std::chrono::nanoseconds>(
                                 t1 - t0_)
                                 .count()));
    }
  }
  ScopedPhase(const ScopedPhase&) = delete;
  ScopedPhase& operator=(const ScopedPhase&) = delete;

 private:
  PhaseProfiler* prof_;
  Phase phase_;
  PhaseProfiler::Clock::time_point t0_{};
};

}  // namespace tinytrain
