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

#include <cstdint>

namespace tinytrain {

// Abstract operation counters for the matrix kernels. They model the inner
// loops of an idealized in-order machine: one counted load per scalar operand
// fetch (one per lane *pair* on the two-lane path), one counted store per
// result writeback, one MAC per multiply-accumulate. Counts are derived in
// closed form from the loop structure, so they are exact and deterministic
// — independent of worker count, host ISA, and compiler.
struct OpCounters {
  std::uint64_t mac = 0;
  std::uint64_t loads = 0;
  std::uint64_t stores = 0;

  // Fraction of "useful" operations; the naive kernel sits near 1/3,
  // the 2x4-unrolled kernel near 4/7.
  double utilization() const {
    const std::uint64_t total = mac + loads + stores;
    return total == 0 ? 0.0 : static_cast<double>(mac) / static_cast<double>(total);
  }

  OpCounters& operator+=(const OpCounters& o) {
    mac += o.mac;
    loads += o.loads;
    stores += o.stores;
    return *this;
  }
};

}  // namespace tinytrain
