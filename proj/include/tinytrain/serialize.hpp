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

// Tensor file format (little-endian, 32-byte header + raw payload):
//
//   offset  size  field
//        0     4  magic "TTN1"
//        4     1  version (1)
//        5     1  elem      (0 = f32, 1 = f16)
//        6     1  layout    (0 = chw, 1 = hwc)
//        7     1  flags     (bit0 = transposed weight storage)
//        8     1  ndims     (1 vector, 2 matrix, 3 activation, 4 weights)
//        9     3  zero padding
//       12    16  dims, 4 x u32 (unused trailing dims zero)
//       28     4  reserved (zero)
//       32     -  payload: count * elem_size bytes, element order = buffer order
//
// Loading validates magic, version, enums, dims and payload size and throws
// IoError on any mismatch.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "tinytrain/tensor.hpp"

namespace tinytrain {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace detail {

constexpr std::array<char, 4> kMagic = {'T', 'T', 'N', '1'};
constexpr std::uint8_t kFormatVersion = 1;
constexpr std::size_t kHeaderBytes = 32;

inline void put_u32(unsigned char* p, std::uint32_t v) {
  p[0] = static_cast<unsigned char>(v & 0xffu);
  p[1] = static_cast<unsigned char>((v >> 8) & 0xffu);
  p[2] = static_cast<unsigned char>((v >> 16) & 0xffu);
  p[3] = static_cast<unsigned char>((v >> 24) & 0xffu);
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);

  unsigned char header[detail::kHeaderBytes] = {};
  std::memcpy(header, detail::kMagic.data(), 4);
  header[4] = detail::kFormatVersion;
  header[5] = static_cast<unsigned char>(t.elem());
  header[6] = static_cast<unsigned char>(t.layout());
  header[7] = t.transposed() ? 0x01u : 0x00u;
  header[8] = static_cast<unsigned char>(t.ndims());
  for (int i = 0; i < t.ndims(); ++i) {
    detail::put_u32(header + 12 + 4 * i, static_cast<std::uint32_t>(t.dim(i)));
  }
  out.write(reinterpret_cast<const char*>(header), detail::kHeaderBytes);
  out.write(static_cast<const char*>(t.raw()),
            static_cast<std::streamsize>(t.bytes()));
  if (!out) throw IoError("short write: " + path);
}

inline Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);

  unsigned char header[detail::kHeaderBytes];
  in.read(reinterpret_cast<char*>(header), detail::kHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(detail::kHeaderBytes)) {
    throw IoError("truncated header: " + path);
  }
  if (std::memcmp(header, detail::kMagic.data(), 4) != 0) {
    throw IoError("bad magic: " + path);
  }
  if (header[4] != detail::kFormatVersion) {
    throw IoError("unsupported version " + std::to_string(header[4]) + ": " + path);
  }
  if (header[5] > 1 || header[6] > 1 || header[7] > 1) {
    throw IoError("bad elem/layout/flags byte: " + path);
  }
  const auto elem = static_cast<ElemType>(header[5]);
  const auto layout = static_cast<Layout>(header[6]);
  const bool transposed = header[7] != 0;
  const int ndims = header[8];
  if (ndims < 1 || ndims > 4) throw IoError("bad rank: " + path);

  std::array<index_t, 4> dims{};
  for (int i = 0; i < ndims; ++i) {
    dims[static_cast<std::size_t>(i)] =
        static_cast<index_t>(detail::get_u32(header + 12 + 4 * i));
    if (dims[static_cast<std::size_t>(i)] == 0) {
      throw IoError("zero dimension: " + path);
    }
  }

  Tensor t = [&] {
    try {
      switch (ndims) {
        case 1: return Tensor::vec(elem, dims[0]);
        case 2: return Tensor::matrix(elem, dims[0], dims[1]);
        case 3: return Tensor::activation(elem, layout, dims[0], dims[1], dims[2]);
        default:
          return Tensor::weights(elem, layout, dims[0], dims[1], dims[2], dims[3],
                                 transposed);
      }
    } catch (const Error& e) {
      throw IoError(std::string("invalid tensor metadata: ") + e.what());
    }
  }();

  in.read(static_cast<char*>(t.raw()), static_cast<std::streamsize>(t.bytes()));
  if (in.gcount() != static_cast<std::streamsize>(t.bytes())) {
    throw IoError("truncated payload: " + path);
  }
  // Trailing garbage is also a format error.
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0) {
    throw IoError("trailing bytes after payload: " + path);
  }
  return t;
}

}  // namespace tinytrain
