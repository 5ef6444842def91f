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

#include "tinytrain/common.hpp"

namespace tinytrain {

// Non-owning, contiguous, row-major 2-D view. All matrix kernels operate on
// these; the tensor containers hand them out without copying.
template <typename T>
struct MatView {
  T* data = nullptr;
  index_t rows = 0;
  index_t cols = 0;

  T* row(index_t r) const { return data + r * cols; }
  T& at(index_t r, index_t c) const { return data[r * cols + c]; }
  index_t count() const { return rows * cols; }

  operator MatView<const T>() const { return {data, rows, cols}; }
};

}  // namespace tinytrain
