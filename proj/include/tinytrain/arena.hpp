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

// Scratch memory for lowering buffers and tile staging.
//
// Scratchpad models a fixed on-chip memory: a bump allocator over one
// preallocated block with live/peak accounting. An allocation that does not
// fit throws ScratchpadOverflow — there is no silent spill to other memory.
// Nested mark/release pairs give tiles frame-structured lifetimes.
//
// HeapArena has the same interface without a capacity, for direct (untiled)
// calls that only need somewhere to put transform buffers.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tinytrain/common.hpp"

namespace tinytrain {

class Arena {
 public:
  virtual ~Arena() = default;

  // Returns cacheline-aligned storage valid until the enclosing mark is
  // released (or reset). Throws on exhaustion; never returns null.
  virtual void* allocate(std::size_t bytes) = 0;

  // Frame markers: release_to(mark()) frees everything allocated in between.
  virtual std::size_t mark() const = 0;
  virtual void release_to(std::size_t mark) = 0;

  void reset() { release_to(0); }

  virtual std::size_t live_bytes() const = 0;
  virtual std::size_t peak_bytes() const = 0;

  template <typename T>
  T* allocate_n(std::size_t count) {
    return static_cast<T*>(allocate(count * sizeof(T)));
  }

 protected:
  static constexpr std::size_t kAlign = 64;
  static constexpr std::size_t align_up(std::size_t n) {
    return (n + kAlign - 1) & ~(kAlign - 1);
  }
};

// Fixed-capacity bump allocator with peak tracking.
class Scratchpad final : public Arena {
 public:
  static constexpr std::size_t kDefaultBytes = 64 * 1024;

  explicit Scratchpad(std::size_t capacity = kDefaultBytes)
      : capacity_(capacity), storage_(new unsigned char[capacity + kAlign]) {
    // Base aligned manually so capacity accounting stays exact.
    const auto raw = reinterpret_cast<std::uintptr_t>(storage_.get());
    base_ = reinterpret_cast<unsigned char*>((raw + kAlign - 1) & ~std::uintptr_t(kAlign - 1));
  }

  void* allocate(std::size_t bytes) override {
    const std::size_t need = align_up(bytes);
    if (top_ + need > capacity_) {
      throw ScratchpadOverflow(
          "scratchpad overflow: request " + std::to_string(bytes) + " B, live " +
          std::to_string(top_) + " B, capacity " + std::to_string(capacity_) + " B");
    }
    void* p = base_ + top_;
    top_ += need;
    if (top_ > peak_) peak_ = top_;
    return p;
  }

  std::size_t mark() const override { return top_; }

  void release_to(std::size_t m) override {
    check_config(m <= top_, "scratchpad release above current top");
    top_ = m;
  }

  std::size_t live_bytes() const override { return top_; }
  std::size_t peak_bytes() const override { return peak_; }
  std::size_t capacity() const { return capacity_; }

  void reset_peak() { peak_ = top_; }

 private:
  std::size_t capacity_;
  std::unique_ptr<unsigned char[]> storage_;
  unsigned char* base_ = nullptr;
  std::size_t top_ = 0;
  std::size_t peak_ = 0;
};

// Unbounded arena backed by individually owned heap blocks.
class HeapArena final : public Arena {
 public:
  void* allocate(std::size_t bytes) override {
    const std::size_t need = align_up(bytes);
    // Arena memory is scratch with a write-before-read contract (the bounded
    // scratchpad recycles bytes without clearing them), so skip the zero-fill.
    blocks_.emplace_back(
        std::unique_ptr<unsigned char[]>(new unsigned char[need + kAlign]), need);
    live_ += need;
    if (live_ > peak_) peak_ = live_;
    const auto raw = reinterpret_cast<std::uintptr_t>(blocks_.back().first.get());
    return reinterpret_cast<void*>((raw + kAlign - 1) & ~std::uintptr_t(kAlign - 1));
  }

  std::size_t mark() const override { return blocks_.size(); }

  void release_to(std::size_t m) override {
    check_config(m <= blocks_.size(), "arena release above current top");
    while (blocks_.size() > m) {
      live_ -= blocks_.back().second;
      blocks_.pop_back();
    }
  }

  std::size_t live_bytes() const override { return live_; }
  std::size_t peak_bytes() const override { return peak_; }

 private:
  std::vector<std::pair<std::unique_ptr<unsigned char[]>, std::size_t>> blocks_;
  std::size_t live_ = 0;
  std::size_t peak_ = 0;
};

// RAII frame over any arena. release() pops the frame early and leaves it
// armed, so a loop can recycle one frame across iterations.
class ArenaFrame {
 public:
  explicit ArenaFrame(Arena& a) : arena_(a), mark_(a.mark()) {}
  ~ArenaFrame() { arena_.release_to(mark_); }
  ArenaFrame(const ArenaFrame&) = delete;
  ArenaFrame& operator=(const ArenaFrame&) = delete;

  void release() { arena_.release_to(mark_); }

 private:
  Arena& arena_;
  std::size_t mark_;
};

}  // namespace tinytrain
