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

// Scratchpad-budgeted tiled execution.
//
// A training step can be split so every working buffer — operand slabs,
// weight slices, lowered matrices, and the output tile — lives inside a
// fixed-size scratchpad. Tiles split the output along channels (outer) and
// spatial rows (inner); a row tile stages the input slab it can see (the
// rows under its windows, halo included), so neighbouring tiles re-read the
// halo rows. The planner is greedy: it first maximizes the channel slice at
// a single-row tile, then grows the row count, and fails loudly when even a
// 1x1-channel-row tile cannot fit.
//
// The weight-gradient step is a reduction over output pixels, so its spatial
// tiles split the accumulation. Tiles run in ascending row order and carry
// the running sum through the accumulate-into kernel entries: in f32 each
// output element sees exactly the same ascending-k fma chain as the untiled
// call (bit-identical results). For halves the cross-tile carry defaults to
// a binary32 master rounded once at writeback (wg_acc = F16Acc::F32); the
// native option instead continues the half-rounded chain across tiles.
//
// Staging in and out of the scratchpad is counted in a TransferLog (exact
// bytes, one logical transfer per staged operand or written-back tile) and
// timed under Phase::Copy. Kernel OpCounters deliberately exclude staging:
// loads/stores model kernel operand fetches, data movement is the log's job.

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "tinytrain/conv.hpp"

namespace tinytrain {

enum class StepKind : std::uint8_t { Fw = 0, BwIg = 1, BwWg = 2 };

inline const char* to_string(StepKind s) {
  switch (s) {
    case StepKind::Fw:
      return "fw";
    case StepKind::BwIg:
      return "bw_ig";
    default:
      return "bw_wg";
  }
}

// One tile: output-channel range x output-row range (rows of dX for BwIg,
// rows of dY for the other two steps; channels of dX for BwIg, of Y/dW
// otherwise). Full output width always.
struct TileRange {
  index_t co_b = 0, co_e = 0;
  index_t r_b = 0, r_e = 0;
};

struct TransferLog {
  std::uint64_t bytes_in = 0;
  std::uint64_t bytes_out = 0;
  std::uint64_t transfers = 0;
};

struct TilePlan {
  StepKind step = StepKind::Fw;
  ConvSpec spec;
  Layout layout = Layout::HWC;
  ElemType elem = ElemType::F32;
  F16Acc wg_acc = F16Acc::F32;  // cross-tile carry for f16 weight gradients
  std::size_t budget = 0;       // scratchpad bytes the plan was sized for
  index_t co_per_tile = 0;
  index_t rows_per_tile = 0;
  std::size_t planned_peak = 0;  // footprint bound at (co_per, rows_per)
  std::vector<TileRange> tiles;
};

namespace tiledetail {

// Tiled extents per step: total output channels, total output rows, and the
// source height the row slabs are cut from.
struct StepExtents {
  index_t co_total = 0;
  index_t rows_total = 0;
  index_t src_h = 0;
  index_t border = 0;  // top/left window border into the slab source
};

inline StepExtents extents(const ConvSpec& s, StepKind step) {
  switch (step) {
    case StepKind::Fw:
    case StepKind::BwWg:
      return {s.c_out, s.h_out(), s.h_in, s.pad};
    default:  // BwIg: output is dX, slabs are cut from dY
      return {s.c_in, s.h_in, s.h_out(), s.k_h - 1 - s.pad};
  }
}

inline std::size_t aligned(std::size_t bytes) { return (bytes + 63u) & ~std::size_t{63}; }

// Upper bound on the rows a slab can span for a row tile of `rows`.
inline index_t slab_rows_bound(const ConvSpec& s, index_t rows, index_t src_h) {
  return std::min<index_t>(src_h, rows + s.k_h - 1);
}

// Conservative scratch footprint (bytes) of one tile, matching the runner's
// allocation set. Monotone in both co_cnt and rows.
inline std::size_t tile_footprint(const ConvSpec& s, Layout layout, ElemType elem,
                                  StepKind step, F16Acc wg_acc, index_t co_cnt,
                                  index_t rows) {
  const std::size_t es = elem_size(elem);
  const StepExtents ex = extents(s, step);
  const bool pw = s.is_pointwise();
  const bool f16 = elem == ElemType::F16;
  const index_t kk = s.k_h * s.k_w;

  std::size_t total = 0;
  std::size_t allocs = 0;
  auto add = [&](std::size_t elems, std::size_t esz) {
    total += aligned(elems * esz);
    ++allocs;
  };

  switch (step) {
    case StepKind::Fw: {
      const index_t slab = slab_rows_bound(s, rows, ex.src_h);
      add(static_cast<std::size_t>(co_cnt * s.c_in * kk), es);         // W slice
      add(static_cast<std::size_t>(s.c_in * slab * s.w_in), es);       // X slab
      add(static_cast<std::size_t>(co_cnt * rows * s.w_out()), es);    // Y tile
      const index_t sp = rows * s.w_out();
      if (!pw) {
        add(static_cast<std::size_t>(sp * kk * s.c_in), es);           // lowered
      } else if (layout == Layout::CHW && f16) {
        add(static_cast<std::size_t>(sp * s.c_in), es);                // transpose
      }
      break;
    }
    case StepKind::BwIg: {
      const index_t slab = slab_rows_bound(s, rows, ex.src_h);
      add(static_cast<std::size_t>(co_cnt * s.c_out * kk), es);        // BT slice
      add(static_cast<std::size_t>(s.c_out * slab * s.w_out()), es);   // dY slab
      add(static_cast<std::size_t>(co_cnt * rows * s.w_in), es);       // dX tile
      const index_t sp = rows * s.w_in;
      if (!pw) {
        add(static_cast<std::size_t>(sp * kk * s.c_out), es);          // lowered
      } else if (layout == Layout::CHW && f16) {
        add(static_cast<std::size_t>(sp * s.c_out), es);               // transpose
      }
      break;
    }
    default: {  // BwWg
      const index_t slab = slab_rows_bound(s, rows, ex.src_h);
      const bool wide_carry = f16 && wg_acc == F16Acc::F32;
      add(static_cast<std::size_t>(co_cnt * s.c_in * kk),
          wide_carry ? sizeof(float) : es);                            // master
      add(static_cast<std::size_t>(s.c_in * slab * s.w_in), es);       // X slab
      const index_t sp = rows * s.w_out();
      add(static_cast<std::size_t>(co_cnt * sp), es);                  // dY slab
      if (!pw) {
        add(static_cast<std::size_t>(sp * kk * s.c_in), es);           // lowered
      } else if (!(layout == Layout::CHW && f16)) {
        add(static_cast<std::size_t>(sp * s.c_in), es);                // transpose
      }
      if (f16 && layout == Layout::HWC) {
        add(static_cast<std::size_t>(co_cnt * sp), es);                // Tr(dY)
      }
      if (wide_carry) {
        add(static_cast<std::size_t>(co_cnt * s.c_in * kk), es);       // partial
      }
      break;
    }
  }
  return total + 64u * allocs;  // per-allocation alignment slack
}

inline void fill_tiles(TilePlan& plan) {
  const StepExtents ex = extents(plan.spec, plan.step);
  plan.tiles.clear();
  for (index_t co = 0; co < ex.co_total; co += plan.co_per_tile) {
    const index_t ce = std::min(ex.co_total, co + plan.co_per_tile);
    for (index_t r = 0; r < ex.rows_total; r += plan.rows_per_tile) {
      const index_t re = std::min(ex.rows_total, r + plan.rows_per_tile);
      plan.tiles.push_back(TileRange{co, ce, r, re});
    }
  }
}

}  // namespace tiledetail

// Greedy plan: the largest channel slice that fits a one-row tile, then the
// largest row count that fits at that slice. Throws ConfigError when even
// the minimal tile exceeds the budget.
inline TilePlan plan_tiles(const ConvSpec& spec, Layout layout, ElemType elem,
                           StepKind step, std::size_t budget_bytes,
                           F16Acc wg_acc = F16Acc::F32) {
  spec.validate();
  TilePlan plan;
  plan.step = step;
  plan.spec = spec;
  plan.layout = layout;
  plan.elem = elem;
  plan.wg_acc = wg_acc;
  plan.budget = budget_bytes;

  const tiledetail::StepExtents ex = tiledetail::extents(spec, step);
  auto fits = [&](index_t co, index_t rows) {
    return tiledetail::tile_footprint(spec, layout, elem, step, wg_acc, co, rows) <=
           budget_bytes;
  };
  if (!fits(1, 1)) {
    throw ConfigError("plan_tiles: a minimal 1-channel/1-row tile of " +
                      spec.to_string() + " (" + to_string(step) +
                      ") does not fit a " + std::to_string(budget_bytes) +
                      " byte scratchpad");
  }
  index_t co = 1;
  while (co < ex.co_total && fits(co + 1, 1)) ++co;
  index_t rows = 1;
  while (rows < ex.rows_total && fits(co, rows + 1)) ++rows;

  plan.co_per_tile = co;
  plan.rows_per_tile = rows;
  plan.planned_peak =
      tiledetail::tile_footprint(spec, layout, elem, step, wg_acc, co, rows);
  tiledetail::fill_tiles(plan);
  return plan;
}

// The same plan shape with a caller-chosen tile grid; used to compare runs
// that must stage identical element counts (e.g. f32 vs f16 traffic).
inline TilePlan plan_tiles_fixed(const ConvSpec& spec, Layout layout, ElemType elem,
                                 StepKind step, std::size_t budget_bytes,
                                 index_t co_per_tile, index_t rows_per_tile,
                                 F16Acc wg_acc = F16Acc::F32) {
  spec.validate();
  const tiledetail::StepExtents ex = tiledetail::extents(spec, step);
  check_config(co_per_tile >= 1 && co_per_tile <= ex.co_total &&
                   rows_per_tile >= 1 && rows_per_tile <= ex.rows_total,
               "plan_tiles_fixed: tile shape out of range");
  TilePlan plan;
  plan.step = step;
  plan.spec = spec;
  plan.layout = layout;
  plan.elem = elem;
  plan.wg_acc = wg_acc;
  plan.budget = budget_bytes;
  plan.co_per_tile = co_per_tile;
  plan.rows_per_tile = rows_per_tile;
  plan.planned_peak = tiledetail::tile_footprint(spec, layout, elem, step, wg_acc,
                                                 co_per_tile, rows_per_tile);
  check_config(plan.planned_peak <= budget_bytes,
               "plan_tiles_fixed: requested tile does not fit the budget");
  tiledetail::fill_tiles(plan);
  return plan;
}

// Compact JSON rendering of a plan (diagnostics; no external dependencies).
inline std::string plan_to_json(const TilePlan& p) {
  std::string s = "{";
  s += "\"step\":\"" + std::string(to_string(p.step)) + "\",";
  s += "\"layer\":\"" + p.spec.to_string() + "\",";
  s += "\"layout\":\"" + std::string(to_string(p.layout)) + "\",";
  s += "\"elem\":\"" + std::string(to_string(p.elem)) + "\",";
  s += "\"budget\":" + std::to_string(p.budget) + ",";
  s += "\"co_per_tile\":" + std::to_string(p.co_per_tile) + ",";
  s += "\"rows_per_tile\":" + std::to_string(p.rows_per_tile) + ",";
  s += "\"planned_peak\":" + std::to_string(p.planned_peak) + ",";
  s += "\"tiles\":[";
  for (std::size_t i = 0; i < p.tiles.size(); ++i) {
    const TileRange& t = p.tiles[i];
    if (i != 0) s += ",";
    s += "[" + std::to_string(t.co_b) + "," + std::to_string(t.co_e) + "," +
         std::to_string(t.r_b) + "," + std::to_string(t.r_e) + "]";
  }
  s += "]}";
  return s;
}

namespace tiledetail {

inline void log_in(TransferLog* log, std::uint64_t bytes) {
  if (log != nullptr) {
    log->bytes_in += bytes;
    ++log->transfers;
  }
}
inline void log_out(TransferLog* log, std::uint64_t bytes) {
  if (log != nullptr) {
    log->bytes_out += bytes;
    ++log->transfers;
  }
}

// Raw element-range copy between tensors of the same element type.
inline void copy_elems(const Tensor& src, index_t so, Tensor& dst, index_t dofs,
                       index_t n) {
  const std::size_t es = elem_size(src.elem());
  std::memcpy(static_cast<std::byte*>(dst.raw()) + static_cast<std::size_t>(dofs) * es,
              static_cast<const std::byte*>(src.raw()) + static_cast<std::size_t>(so) * es,
              static_cast<std::size_t>(n) * es);
}

// Stage rows [y0, y1) x channels [cb, ce) of an activation into a dense
// (ce-cb, y1-y0, W) scratch tensor.
inline Tensor stage_act(const Tensor& src, index_t cb, index_t ce, index_t y0,
                        index_t y1, Arena& ar, const RunContext& ctx,
                        TransferLog* log) {
  ScopedPhase phase(ctx.profiler, Phase::Copy);
  const index_t cs = ce - cb, rows = y1 - y0, W = src.w();
  Tensor dst = Tensor::activation_view(
      ar.allocate(static_cast<std::size_t>(cs * rows * W) * elem_size(src.elem())),
      src.elem(), src.layout(), cs, rows, W);
  if (src.layout() == Layout::CHW) {
    for (index_t c = 0; c < cs; ++c) {
      copy_elems(src, ((cb + c) * src.h() + y0) * W, dst, c * rows * W, rows * W);
    }
  } else if (cs == src.c()) {
    copy_elems(src, y0 * W * cs, dst, 0, rows * W * cs);
  } else {
    for (index_t p = 0; p < rows * W; ++p) {
      copy_elems(src, (y0 * W + p) * src.c() + cb, dst, p * cs, cs);
    }
  }
  log_in(log, static_cast<std::uint64_t>(cs * rows * W) * elem_size(src.elem()));
  return dst;
}

// Write a staged (cs, rows, W) activation tile back into rows [y0, ...) x
// channels [cb, ...) of the destination.
inline void writeback_act(const Tensor& tile, Tensor& dst, index_t cb, index_t y0,
                          const RunContext& ctx, TransferLog* log) {
  ScopedPhase phase(ctx.profiler, Phase::Copy);
  const index_t cs = tile.c(), rows = tile.h(), W = tile.w();
  const Tensor& src = tile;
  if (dst.layout() == Layout::CHW) {
    for (index_t c = 0; c < cs; ++c) {
      copy_elems(src, c * rows * W, dst, ((cb + c) * dst.h() + y0) * W, rows * W);
    }
  } else if (cs == dst.c()) {
    copy_elems(src, 0, dst, y0 * W * cs, rows * W * cs);
  } else {
    for (index_t p = 0; p < rows * W; ++p) {
      copy_elems(src, p * cs, dst, (y0 * W + p) * dst.c() + cb, cs);
    }
  }
  log_out(log, static_cast<std::uint64_t>(cs * rows * W) * elem_size(tile.elem()));
}

// Stage output channels [co_b, co_e) of a weight tensor into scratch,
// keeping the storage idiom.
inline Tensor stage_w(const Tensor& w, index_t co_b, index_t co_e, Arena& ar,
                      const RunContext& ctx, TransferLog* log) {
  ScopedPhase phase(ctx.profiler, Phase::Copy);
  const index_t cnt = co_e - co_b, ci = w.ci(), kk = w.kh() * w.kw();
  Tensor dst = Tensor::weights_view(
      ar.allocate(static_cast<std::size_t>(cnt * ci * kk) * elem_size(w.elem())),
      w.elem(), w.layout(), cnt, ci, w.kh(), w.kw(), w.transposed());
  if (w.layout() == Layout::CHW || w.transposed()) {
    // (co, ...) is the outer dimension: the slice is contiguous.
    copy_elems(w, co_b * ci * kk, dst, 0, cnt * ci * kk);
  } else {
    // HWC normal storage (kh, kw, ci, co): co is innermost.
    for (index_t r = 0; r < kk * ci; ++r) {
      copy_elems(w, r * w.co() + co_b, dst, r * cnt, cnt);
    }
  }
  log_in(log, static_cast<std::uint64_t>(cnt * ci * kk) * elem_size(w.elem()));
  return dst;
}

// Materialize rows [ob, oe) of BT(w) in scratch (reads w from its home).
template <typename T>
Tensor stage_bt(const Tensor& w, index_t ob, index_t oe, Arena& ar,
                const RunContext& ctx, TransferLog* log) {
  Tensor bt = convdetail::bt_slice<T>(w, ob, oe, ar, ctx);
  log_in(log, static_cast<std::uint64_t>(bt.count()) * elem_size(w.elem()));
  return bt;
}

// Write a staged weight-gradient slice back to channels [co_b, ...).
inline void writeback_w(const Tensor& tile, Tensor& dst, index_t co_b,
                        const RunContext& ctx, TransferLog* log) {
  ScopedPhase phase(ctx.profiler, Phase::Copy);
  const index_t cnt = tile.co(), ci = dst.ci(), kk = dst.kh() * dst.kw();
  if (dst.layout() == Layout::CHW || dst.transposed()) {
    copy_elems(tile, 0, dst, co_b * ci * kk, cnt * ci * kk);
  } else {
    for (index_t r = 0; r < kk * ci; ++r) {
      copy_elems(tile, r * cnt, dst, r * dst.co() + co_b, cnt);
    }
  }
  log_out(log, static_cast<std::uint64_t>(cnt * ci * kk) * elem_size(dst.elem()));
}

// Slab bounds and local window geometry for output rows [r_b, r_e).
struct Slab {
  index_t y0 = 0, y1 = 0, pad_top = 0;
};

inline Slab slab_for(index_t r_b, index_t r_e, index_t border, index_t k_h,
                     index_t src_h) {
  Slab s;
  s.y0 = std::max<index_t>(0, r_b - border);
  s.y1 = std::min(src_h, r_e + k_h - 1 - border);
  s.pad_top = border + s.y0 - r_b;
  return s;
}

inline void check_plan(const TilePlan& plan, const LayerState& st, StepKind step) {
  check_config(plan.step == step, "tiled run: plan was built for another step");
  check_config(plan.layout == st.layout && plan.elem == st.elem,
               "tiled run: plan layout/elem mismatch");
  const ConvSpec &a = plan.spec, &b = st.spec;
  check_config(a.c_in == b.c_in && a.h_in == b.h_in && a.w_in == b.w_in &&
                   a.c_out == b.c_out && a.k_h == b.k_h && a.k_w == b.k_w &&
                   a.pad == b.pad,
               "tiled run: plan geometry mismatch");
  check_config(!plan.tiles.empty(), "tiled run: empty plan");
}

template <typename T>
void run_fw_tiled(const LayerState& st, const Tensor& x, Tensor& y,
                  const TilePlan& plan, Scratchpad& pad, const RunContext& ctx,
                  TransferLog* log) {
  const ConvSpec& s = st.spec;
  RunContext cctx = ctx;
  cctx.arena = &pad;
  index_t co_prev = -1;
  Tensor w_slice;
  ArenaFrame co_frame(pad);
  for (const TileRange& t : plan.tiles) {
    if (t.co_b != co_prev) {
      co_frame.release();
      w_slice = stage_w(st.w, t.co_b, t.co_e, pad, cctx, log);
      co_prev = t.co_b;
    }
    ArenaFrame row_frame(pad);
    const Slab sl = slab_for(t.r_b, t.r_e, s.pad, s.k_h, s.h_in);
    Tensor y_tile = Tensor::activation_view(
        pad.allocate(static_cast<std::size_t>((t.co_e - t.co_b) * (t.r_e - t.r_b) *
                                              s.w_out()) *
                     sizeof(T)),
        st.elem, st.layout, t.co_e - t.co_b, t.r_e - t.r_b, s.w_out());
    if (sl.y1 <= sl.y0) {
      // Every window of this row tile lies in the zero padding (pad >= k);
      // there is nothing to stage and the output rows are exact zeros.
      std::memset(y_tile.raw(), 0, static_cast<std::size_t>(y_tile.count()) * sizeof(T));
      writeback_act(y_tile, y, t.co_b, t.r_b, cctx, log);
      continue;
    }
    Tensor x_slab = stage_act(x, 0, s.c_in, sl.y0, sl.y1, pad, cctx, log);
    const WindowGeom g{s.c_in,  sl.y1 - sl.y0, s.w_in,     s.k_h,     s.k_w,
                       sl.pad_top, s.pad,      t.r_e - t.r_b, s.w_out()};
    convdetail::step_fw<T>(x_slab, w_slice, y_tile, g, st.variant, cctx, pad);
    writeback_act(y_tile, y, t.co_b, t.r_b, cctx, log);
  }
}

template <typename T>
void run_ig_tiled(const LayerState& st, const Tensor& dy, Tensor& dx,
                  const TilePlan& plan, Scratchpad& pad, const RunContext& ctx,
                  TransferLog* log) {
  const ConvSpec& s = st.spec;
  RunContext cctx = ctx;
  cctx.arena = &pad;
  const index_t border = s.k_h - 1 - s.pad;
  const index_t border_w = s.k_w - 1 - s.pad;
  index_t ci_prev = -1;
  Tensor bt_slice;
  ArenaFrame ci_frame(pad);
  for (const TileRange& t : plan.tiles) {
    if (t.co_b != ci_prev) {
      ci_frame.release();
      bt_slice = stage_bt<T>(st.w, t.co_b, t.co_e, pad, cctx, log);
      ci_prev = t.co_b;
    }
    ArenaFrame row_frame(pad);
    const Slab sl = slab_for(t.r_b, t.r_e, border, s.k_h, s.h_out());
    Tensor dy_slab = stage_act(dy, 0, s.c_out, sl.y0, sl.y1, pad, cctx, log);
    Tensor dx_tile = Tensor::activation_view(
        pad.allocate(static_cast<std::size_t>((t.co_e - t.co_b) * (t.r_e - t.r_b) *
                                              s.w_in) *
                     sizeof(T)),
        st.elem, st.layout, t.co_e - t.co_b, t.r_e - t.r_b, s.w_in);
    const WindowGeom g{s.c_out, sl.y1 - sl.y0, s.w_out(),  s.k_h,      s.k_w,
                       sl.pad_top, border_w,   t.r_e - t.r_b, s.w_in};
    convdetail::step_fw<T>(dy_slab, bt_slice, dx_tile, g, st.variant, cctx, pad);
    writeback_act(dx_tile, dx, t.co_b, t.r_b, cctx, log);
  }
}

template <typename T>
void run_wg_tiled(const LayerState& st, const Tensor& dy, Tensor& dw,
                  const TilePlan& plan, Scratchpad& pad, const RunContext& ctx,
                  TransferLog* log) {
  const ConvSpec& s = st.spec;
  RunContext cctx = ctx;
  cctx.arena = &pad;
  constexpr bool f16 = !std::is_same_v<T, float>;
  const bool wide_carry = f16 && plan.wg_acc == F16Acc::F32;
  const index_t wslice = s.c_in * s.k_h * s.k_w;

  // Tiles arrive co-major from the planner; each channel slice owns a master
  // accumulator that lives across its spatial tiles.
  std::size_t i = 0;
  while (i < plan.tiles.size()) {
    const index_t co_b = plan.tiles[i].co_b, co_e = plan.tiles[i].co_e;
    const index_t cnt = co_e - co_b;
    ArenaFrame co_frame(pad);
    [[maybe_unused]] float* master_f32 = nullptr;
    Tensor master;
    if (wide_carry) {
      master_f32 = pad.allocate_n<float>(static_cast<std::size_t>(cnt * wslice));
      std::memset(master_f32, 0, static_cast<std::size_t>(cnt * wslice) * sizeof(float));
    } else {
      master = Tensor::weights_view(
          pad.allocate(static_cast<std::size_t>(cnt * wslice) * sizeof(T)), st.elem,
          st.layout, cnt, s.c_in, s.k_h, s.k_w, st.w.transposed());
    }
    bool first = true;
    for (; i < plan.tiles.size() && plan.tiles[i].co_b == co_b; ++i) {
      const TileRange& t = plan.tiles[i];
      ArenaFrame row_frame(pad);
      const Slab sl = slab_for(t.r_b, t.r_e, s.pad, s.k_h, s.h_in);
      if (sl.y1 <= sl.y0) continue;  // all-padding rows add nothing to dW
      Tensor x_slab = stage_act(st.x_saved, 0, s.c_in, sl.y0, sl.y1, pad, cctx, log);
      Tensor dy_slab = stage_act(dy, co_b, co_e, t.r_b, t.r_e, pad, cctx, log);
      const WindowGeom g{s.c_in,  sl.y1 - sl.y0, s.w_in,     s.k_h,     s.k_w,
                         sl.pad_top, s.pad,      t.r_e - t.r_b, s.w_out()};
      if constexpr (f16) {
        if (wide_carry) {
          Tensor partial = Tensor::weights_view(
              pad.allocate(static_cast<std::size_t>(cnt * wslice) * sizeof(T)),
              st.elem, st.layout, cnt, s.c_in, s.k_h, s.k_w, st.w.transposed());
          convdetail::step_wg<T>(x_slab, dy_slab, partial, g, st.variant, cctx,
                                 pad, false);
          ScopedPhase phase(cctx.profiler, Phase::Copy);
          const T* pp = partial.template data<T>();
          for (index_t e = 0; e < cnt * wslice; ++e) {
            master_f32[e] += half_to_float(pp[e]);
          }
          first = false;
          continue;
        }
      }
      convdetail::step_wg<T>(x_slab, dy_slab, master, g, st.variant, cctx, pad,
                             !first);
      first = false;
    }
    if constexpr (f16) {
      if (wide_carry) {
        // One rounding per element at the end of the reduction.
        ScopedPhase phase(cctx.profiler, Phase::Copy);
        Tensor rounded = Tensor::weights_view(
            pad.allocate(static_cast<std::size_t>(cnt * wslice) * sizeof(T)),
            st.elem, st.layout, cnt, s.c_in, s.k_h, s.k_w, st.w.transposed());
        T* rp = rounded.template data<T>();
        for (index_t e = 0; e < cnt * wslice; ++e) {
          rp[e] = half_from_float(master_f32[e]);
        }
        writeback_w(rounded, dw, co_b, cctx, log);
        continue;
      }
    }
    writeback_w(master, dw, co_b, cctx, log);
  }
}

}  // namespace tiledetail

// ---- public tiled entry points ----------------------------------------------

inline Tensor conv2d_fw_tiled(LayerState& st, const Tensor& x, const TilePlan& plan,
                              Scratchpad& pad, const RunContext& ctx = {},
                              TransferLog* log = nullptr) {
  tiledetail::check_plan(plan, st, StepKind::Fw);
  convdetail::check_act(x, st, st.spec.c_in, st.spec.h_in, st.spec.w_in,
                        "conv2d_fw_tiled");
  {
    ScopedPhase phase(ctx.profiler, Phase::Copy);
    st.x_saved = x.clone();
  }
  st.has_x = true;
  Tensor y = convdetail::alloc_act(ctx, st.elem, st.layout, st.spec.c_out,
                                   st.spec.h_out(), st.spec.w_out());
  if (st.elem == ElemType::F32) {
    tiledetail::run_fw_tiled<float>(st, x, y, plan, pad, ctx, log);
  } else {
    tiledetail::run_fw_tiled<half_t>(st, x, y, plan, pad, ctx, log);
  }
  return y;
}

inline Tensor conv2d_bw_ig_tiled(const LayerState& st, const Tensor& dy,
                                 const TilePlan& plan, Scratchpad& pad,
                                 const RunContext& ctx = {},
                                 TransferLog* log = nullptr) {
  tiledetail::check_plan(plan, st, StepKind::BwIg);
  convdetail::check_act(dy, st, st.spec.c_out, st.spec.h_out(), st.spec.w_out(),
                        "conv2d_bw_ig_tiled");
  Tensor dx = convdetail::alloc_act(ctx, st.elem, st.layout, st.spec.c_in,
                                    st.spec.h_in, st.spec.w_in);
  if (st.elem == ElemType::F32) {
    tiledetail::run_ig_tiled<float>(st, dy, dx, plan, pad, ctx, log);
  } else {
    tiledetail::run_ig_tiled<half_t>(st, dy, dx, plan, pad, ctx, log);
  }
  return dx;
}

inline Tensor conv2d_bw_wg_tiled(const LayerState& st, const Tensor& dy,
                                 const TilePlan& plan, Scratchpad& pad,
                                 const RunContext& ctx = {},
                                 TransferLog* log = nullptr) {
  tiledetail::check_plan(plan, st, StepKind::BwWg);
  check_config(st.has_x, "conv2d_bw_wg_tiled: no saved input (run forward first)");
  convdetail::check_act(dy, st, st.spec.c_out, st.spec.h_out(), st.spec.w_out(),
                        "conv2d_bw_wg_tiled");
  Tensor dw = convdetail::alloc_w(ctx, st.elem, st.layout, st.spec.c_out,
                                  st.spec.c_in, st.spec.k_h, st.spec.k_w,
                                  weights_transposed(st.layout, st.elem));
  if (st.elem == ElemType::F32) {
    tiledetail::run_wg_tiled<float>(st, dy, dw, plan, pad, ctx, log);
  } else {
    tiledetail::run_wg_tiled<half_t>(st, dy, dw, plan, pad, ctx, log);
  }
  return dw;
}

}  // namespace tinytrain
