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
#include <stdexcept>
#include <string>

namespace tinytrain {

// Signed index type used for all shape/loop arithmetic. Signed on purpose:
// gradient geometries produce negative effective borders.
using index_t = std::int64_t;

// Error hierarchy. Contract violations throw; nothing is reported by
// silently degrading.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape/dimension mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration (bad variant/type combination, bad enum value, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Serialization / file format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

// A bounded scratch arena could not satisfy an allocation. Never spills.
class ScratchpadOverflow : public Error {
 public:
  using Error::Error;
};

// The const char* overloads keep success paths allocation-free: element
// accessors run these checks per call, and building a std::string from the
// literal would put a heap allocation on every hot-loop iteration.
inline void check_shape(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}
inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

inline void check_config(bool ok, const char* what) {
  if (!ok) throw ConfigError(what);
}
inline void check_config(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

constexpr index_t ceil_div(index_t a, index_t b) { return (a + b - 1) / b; }

}  // namespace tinytrain
