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

// Deterministic fork-join parallelism.
//
// Work is split into contiguous chunks by a fixed formula: with N items and
// P workers, worker w owns rows [w*ceil(N/P), min((w+1)*ceil(N/P), N)).
// Because the chunk->worker map depends only on (N, P) and every output
// element is produced by exactly one worker with an unchanged inner loop,
// results are bit-identical for any worker count. A persistent pool keeps
// dispatch latency low enough for small kernels.

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "tinytrain/common.hpp"

namespace tinytrain {

struct ExecConfig {
  int workers = 1;
};

inline int hardware_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Lazy, process-wide pool. run(n, fn) invokes fn(0..n-1); fn(0) executes on
// the calling thread. Not reentrant: kernel bodies must not dispatch again.
class WorkerPool {
 public:
  static WorkerPool& instance() {
    static WorkerPool pool;
    return pool;
  }

  void run(int n, const std::function<void(int)>& fn) {
    if (n <= 1) {
      fn(0);
      return;
    }
    std::lock_guard<std::mutex> run_guard(run_mu_);
    ensure_threads(n - 1);
    {
      std::lock_guard<std::mutex> lk(mu_);
      job_ = &fn;
      active_ = n - 1;
      remaining_ = n - 1;
      failed_.store(false, std::memory_order_relaxed);
      ++generation_;
    }
    cv_work_.notify_all();
    fn(0);
    {
      std::unique_lock<std::mutex> lk(mu_);
      cv_done_.wait(lk, [&] { return remaining_ == 0; });
      job_ = nullptr;
    }
    if (failed_.load(std::memory_order_relaxed)) {
      throw Error("worker body threw; parallel kernel bodies must not throw");
    }
  }

  ~WorkerPool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_work_.notify_all();
    for (auto& t : threads_) t.join();
  }

 private:
  WorkerPool() = default;

  void ensure_threads(int count) {
    while (static_cast<int>(threads_.size()) < count) {
      const int idx = static_cast<int>(threads_.size());
      threads_.emplace_back([this, idx] { worker_main(idx); });
    }
  }

  void worker_main(int idx) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* job = nullptr;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_work_.wait(lk, [&] {
          return stop_ || (generation_ != seen && idx < active_);
        });
        if (stop_) return;
        seen = generation_;
        job = job_;
      }
      try {
        (*job)(idx + 1);
      } catch (...) {
        failed_.store(true, std::memory_order_relaxed);
      }
      {
        std::lock_guard<std::mutex> lk(mu_);
        if (--remaining_ == 0) cv_done_.notify_all();
      }
    }
  }

  std::mutex run_mu_;  // serializes callers
  std::mutex mu_;
  std::condition_variable cv_work_;
  std::condition_variable cv_done_;
  std::vector<std::thread> threads_;
  const std::function<void(int)>* job_ = nullptr;
  std::uint64_t generation_ = 0;
  int active_ = 0;
  int remaining_ = 0;
  bool stop_ = false;
  std::atomic<bool> failed_{false};
};

// Splits [0, n) into the deterministic per-worker chunks and runs
// body(begin, end, worker) for each non-empty chunk.
template <typename F>
void parallel_chunks(index_t n, int workers, F&& body) {
  if (n <= 0) return;
  const int p = workers < 1 ? 1 : workers;
  const index_t chunk = ceil_div(n, static_cast<index_t>(p));
  const int used = static_cast<int>(ceil_div(n, chunk));
  if (used <= 1) {
    body(index_t{0}, n, 0);
    return;
  }
  WorkerPool::instance().run(used, [&](int w) {
    const index_t begin = chunk * w;
    const index_t end = std::min(n, begin + chunk);
    if (begin < end) body(begin, end, w);
  });
}

}  // namespace tinytrain
