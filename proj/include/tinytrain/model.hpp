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

// Whole-model training steps for two small on-device benchmark networks:
//
//  resnet8: a CIFAR-scale residual network (stem conv, three residual stages
//  at 16/32/64 channels, global average pool, 10-way classifier). Spatial
//  downsampling uses a 2x2 average pool followed by a stride-1 convolution,
//  which keeps every convolution inside the stride-1 kernel set at the same
//  MAC cost as the strided original (~12.5M forward MACs). Stage shortcuts
//  that change width are 1x1 pointwise convolutions on the pooled input.
//
//  ds_cnn: a keyword-spotting depthwise-separable network on a 1x49x10
//  spectrogram (stem conv + 2x2 ceil max pool to 64x25x5, five
//  depthwise+pointwise blocks at 64 channels, global average pool, 12-way
//  classifier).
//
// train_step runs forward, an MSE loss, full backward, and an SGD update on
// every weighted layer (the stem skips its input gradient — nothing is
// upstream of it). It reports wall time split two ways: by execution phase
// (matrix-multiply / transform / transpose / copy / direct) and by operator
// kind (conv / pointwise / depthwise / fc / other). Lowered layers can run
// through a scratchpad-tiled mode; depthwise and fully connected layers stay
// on the direct path (their working sets are trivially small).

#include <array>
#include <chrono>
#include <memory>
#include <string>

#include "tinytrain/nn.hpp"
#include "tinytrain/tiling.hpp"

namespace tinytrain {

enum class OpKind : std::uint8_t { Conv = 0, Pointwise = 1, Depthwise = 2, Fc = 3, Other = 4 };
inline constexpr int kOpKindCount = 5;

inline const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::Conv:
      return "conv";
    case OpKind::Pointwise:
      return "pointwise";
    case OpKind::Depthwise:
      return "depthwise";
    case OpKind::Fc:
      return "fc";
    default:
      return "other";
  }
}

struct ModelOptions {
  Layout layout = Layout::HWC;
  ElemType elem = ElemType::F32;
  F16Acc f16_acc = F16Acc::Native;
  int workers = 1;
  bool tiled = false;
  std::size_t scratch_bytes = Scratchpad::kDefaultBytes;
  std::uint32_t seed = 1;
};

struct StepStats {
  double loss = 0.0;
  std::uint64_t total_ns = 0;
  std::array<std::uint64_t, kPhaseCount> phase_ns{};
  std::array<std::uint64_t, kOpKindCount> kind_ns{};
  OpCounters counters;
  TransferLog transfers;       // tiled mode only
  std::uint64_t scratch_peak = 0;  // tiled mode only

  std::uint64_t phase_sum() const {
    std::uint64_t s = 0;
    for (auto v : phase_ns) s += v;
    return s;
  }
};

namespace modeldetail {

inline std::uint64_t now_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

// Attributes the enclosed wall time to one operator kind.
class KindScope {
 public:
  KindScope(StepStats* st, OpKind k) : st_(st), k_(k), t0_(now_ns()) {}
  ~KindScope() {
    if (st_ != nullptr) st_->kind_ns[static_cast<int>(k_)] += now_ns() - t0_;
  }
  KindScope(const KindScope&) = delete;
  KindScope& operator=(const KindScope&) = delete;

 private:
  StepStats* st_;
  OpKind k_;
  std::uint64_t t0_;
};

// Runs f() with its wall time booked under OpKind::Other (activations,
// pooling, residual adds, loss).
template <typename F>
auto timed_other(StepStats* st, F&& f) {
  KindScope scope(st, OpKind::Other);
  return f();
}

inline void init_he_uniform(Tensor& w, index_t fan_in, std::uint32_t seed) {
  const float b = std::sqrt(6.0f / static_cast<float>(fan_in));
  fill_uniform(w, seed, -b, b);
}

// A lowered layer inside a model: conv, pointwise, or fc, optionally tiled.
struct ConvNode {
  std::string name;
  OpKind kind = OpKind::Conv;
  LayerState st;
  bool tiled = false;
  Scratchpad* pad = nullptr;
  TilePlan fw_plan, ig_plan, wg_plan;

  void init(std::string n, OpKind k, const ConvSpec& spec, const ModelOptions& opt,
            Scratchpad* scratch, std::uint32_t seed) {
    name = std::move(n);
    kind = k;
    st = make_layer(spec, opt.layout, opt.elem, default_variant(opt.elem));
    init_he_uniform(st.w, spec.c_in * spec.k_h * spec.k_w, seed);
    tiled = opt.tiled;
    pad = scratch;
    if (tiled) {
      fw_plan = plan_tiles(spec, opt.layout, opt.elem, StepKind::Fw, opt.scratch_bytes);
      ig_plan = plan_tiles(spec, opt.layout, opt.elem, StepKind::BwIg, opt.scratch_bytes);
      wg_plan = plan_tiles(spec, opt.layout, opt.elem, StepKind::BwWg, opt.scratch_bytes,
                           opt.f16_acc);
    }
  }

  Tensor fw(const Tensor& x, const RunContext& ctx, StepStats* stats,
            TransferLog* log) {
    KindScope scope(stats, kind);
    return tiled ? conv2d_fw_tiled(st, x, fw_plan, *pad, ctx, log)
                 : conv2d_fw(st, x, ctx);
  }
  Tensor bw_ig(const Tensor& dy, const RunContext& ctx, StepStats* stats,
               TransferLog* log) {
    KindScope scope(stats, kind);
    return tiled ? conv2d_bw_ig_tiled(st, dy, ig_plan, *pad, ctx, log)
                 : conv2d_bw_ig(st, dy, ctx);
  }
  void bw_wg_update(const Tensor& dy, float lr, const RunContext& ctx,
                    StepStats* stats, TransferLog* log) {
    KindScope scope(stats, kind);
    Tensor dw = tiled ? conv2d_bw_wg_tiled(st, dy, wg_plan, *pad, ctx, log)
                      : conv2d_bw_wg(st, dy, ctx);
    sgd_update(st.w, dw, lr, ctx);
  }

  std::uint64_t forward_macs() const { return st.spec.mac_count(); }
};

// Depthwise layers are CHW-only; a model running HWC converts activations at
// the layer boundary (counted as Copy time under the Depthwise kind).
struct DwNode {
  std::string name;
  Layout io_layout = Layout::CHW;
  DwLayer st;

  void init(std::string n, index_t c, index_t h, index_t w, index_t k, index_t pad,
            const ModelOptions& opt, std::uint32_t seed) {
    name = std::move(n);
    io_layout = opt.layout;
    st = make_dw(c, h, w, k, pad, Layout::CHW, opt.elem);
    init_he_uniform(st.w, k * k, seed);
  }

  Tensor cross(const Tensor& t, Layout target, const RunContext& ctx) const {
    ScopedPhase phase(ctx.profiler, Phase::Copy);
    return relayout(t, target);
  }

  Tensor fw(const Tensor& x, const RunContext& ctx, StepStats* stats) {
    KindScope scope(stats, OpKind::Depthwise);
    if (io_layout == Layout::CHW) return dw_fw(st, x, ctx);
    Tensor y = dw_fw(st, cross(x, Layout::CHW, ctx), ctx);
    return cross(y, io_layout, ctx);
  }
  Tensor bw_ig(const Tensor& dy, const RunContext& ctx, StepStats* stats) {
    KindScope scope(stats, OpKind::Depthwise);
    if (io_layout == Layout::CHW) return dw_bw_ig(st, dy, ctx);
    Tensor dx = dw_bw_ig(st, cross(dy, Layout::CHW, ctx), ctx);
    return cross(dx, io_layout, ctx);
  }
  void bw_wg_update(const Tensor& dy, float lr, const RunContext& ctx,
                    StepStats* stats) {
    KindScope scope(stats, OpKind::Depthwise);
    Tensor dw = io_layout == Layout::CHW
                    ? dw_bw_wg(st, dy, ctx)
                    : dw_bw_wg(st, cross(dy, Layout::CHW, ctx), ctx);
    sgd_update(st.w, dw, lr, ctx);
  }

  std::uint64_t forward_macs() const {
    return static_cast<std::uint64_t>(st.c * st.h_out() * st.w_out() * st.k * st.k);
  }
};

}  // namespace modeldetail

// Mean squared error over all output elements; writes dL/dy into dy_out and
// returns the loss. Gradients are computed in float and stored in the
// output's element type.
inline double mse_loss_grad(const Tensor& y, const Tensor& target, Tensor& dy_out,
                            const RunContext& ctx = {}) {
  check_shape(y.count() == target.count() && y.count() == dy_out.count(),
              "mse_loss_grad: shape mismatch");
  ScopedPhase phase(ctx.profiler, Phase::Direct);
  const index_t n = y.count();
  double loss = 0.0;
  const float inv = 2.0f / static_cast<float>(n);
  for (index_t i = 0; i < n; ++i) {
    const float d = y.get_flat(i) - target.get_flat(i);
    loss += static_cast<double>(d) * static_cast<double>(d);
    dy_out.set_flat(i, d * inv);
  }
  return loss / static_cast<double>(n);
}

// ---- resnet8 ------------------------------------------------------------------

class ResNet8 {
 public:
  explicit ResNet8(const ModelOptions& opt) : opt_(opt) {
    if (opt_.tiled) pad_ = std::make_unique<Scratchpad>(opt_.scratch_bytes);
    Scratchpad* sp = pad_.get();
    std::uint32_t s = opt_.seed;
    stem_.init("stem", OpKind::Conv, ConvSpec{3, 32, 32, 16, 3, 3, 1}, opt_, sp, ++s);
    c1a_.init("s1_conv_a", OpKind::Conv, ConvSpec{16, 32, 32, 16, 3, 3, 1}, opt_, sp, ++s);
    c1b_.init("s1_conv_b", OpKind::Conv, ConvSpec{16, 32, 32, 16, 3, 3, 1}, opt_, sp, ++s);
    c2a_.init("s2_conv_a", OpKind::Conv, ConvSpec{16, 16, 16, 32, 3, 3, 1}, opt_, sp, ++s);
    c2b_.init("s2_conv_b", OpKind::Conv, ConvSpec{32, 16, 16, 32, 3, 3, 1}, opt_, sp, ++s);
    sc2_.init("s2_shortcut", OpKind::Pointwise, ConvSpec{16, 16, 16, 32, 1, 1, 0}, opt_, sp, ++s);
    c3a_.init("s3_conv_a", OpKind::Conv, ConvSpec{32, 8, 8, 64, 3, 3, 1}, opt_, sp, ++s);
    c3b_.init("s3_conv_b", OpKind::Conv, ConvSpec{64, 8, 8, 64, 3, 3, 1}, opt_, sp, ++s);
    sc3_.init("s3_shortcut", OpKind::Pointwise, ConvSpec{32, 8, 8, 64, 1, 1, 0}, opt_, sp, ++s);
    fc_.init("classifier", OpKind::Fc, ConvSpec{64, 1, 1, 10, 1, 1, 0}, opt_, sp, ++s);
  }

  std::string name() const { return "resnet8"; }
  int classes() const { return 10; }

  Tensor sample_input(std::uint32_t seed) const {
    Tensor x = Tensor::activation(opt_.elem, opt_.layout, 3, 32, 32);
    fill_uniform(x, seed);
    return x;
  }
  Tensor sample_target(std::uint32_t seed) const {
    Tensor t = Tensor::activation(opt_.elem, opt_.layout, 10, 1, 1);
    t.set_act(seed % 10, 0, 0, 1.0f);
    return t;
  }

  std::uint64_t forward_macs() const {
    return stem_.forward_macs() + c1a_.forward_macs() + c1b_.forward_macs() +
           c2a_.forward_macs() + c2b_.forward_macs() + sc2_.forward_macs() +
           c3a_.forward_macs() + c3b_.forward_macs() + sc3_.forward_macs() +
           fc_.forward_macs();
  }

  StepStats train_step(const Tensor& x, const Tensor& target, float lr) {
    StepStats stats;
    PhaseProfiler prof;
    OpCounters ctr;
    RunContext ctx;
    ctx.exec.workers = opt_.workers;
    ctx.f16_acc = opt_.f16_acc;
    ctx.profiler = &prof;
    ctx.counters = &ctr;
    TransferLog* log = opt_.tiled ? &stats.transfers : nullptr;
    if (pad_) pad_->reset_peak();
    const std::uint64_t t0 = modeldetail::now_ns();

    // ---- forward ----
    Tensor stem_pre = stem_.fw(x, ctx, &stats, log);
    Tensor r0 = modeldetail::timed_other(&stats, [&] { return relu_fw(stem_pre, ctx); });

    Tensor p1 = c1a_.fw(r0, ctx, &stats, log);
    Tensor q1 = modeldetail::timed_other(&stats, [&] { return relu_fw(p1, ctx); });
    Tensor sum1 = c1b_.fw(q1, ctx, &stats, log);
    modeldetail::timed_other(&stats, [&] {
      add_into(sum1, r0, ctx);
      return 0;
    });
    Tensor r1 = modeldetail::timed_other(&stats, [&] { return relu_fw(sum1, ctx); });

    Tensor a2 = modeldetail::timed_other(&stats, [&] { return avgpool_fw(r1, 2, 2, false, ctx); });
    Tensor m1 = c2a_.fw(a2, ctx, &stats, log);
    Tensor mq1 = modeldetail::timed_other(&stats, [&] { return relu_fw(m1, ctx); });
    Tensor sum2 = c2b_.fw(mq1, ctx, &stats, log);
    Tensor sk2 = sc2_.fw(a2, ctx, &stats, log);
    modeldetail::timed_other(&stats, [&] {
      add_into(sum2, sk2, ctx);
      return 0;
    });
    Tensor r2 = modeldetail::timed_other(&stats, [&] { return relu_fw(sum2, ctx); });

    Tensor a3 = modeldetail::timed_other(&stats, [&] { return avgpool_fw(r2, 2, 2, false, ctx); });
    Tensor n1 = c3a_.fw(a3, ctx, &stats, log);
    Tensor nq1 = modeldetail::timed_other(&stats, [&] { return relu_fw(n1, ctx); });
    Tensor sum3 = c3b_.fw(nq1, ctx, &stats, log);
    Tensor sk3 = sc3_.fw(a3, ctx, &stats, log);
    modeldetail::timed_other(&stats, [&] {
      add_into(sum3, sk3, ctx);
      return 0;
    });
    Tensor r3 = modeldetail::timed_other(&stats, [&] { return relu_fw(sum3, ctx); });

    Tensor g = modeldetail::timed_other(&stats, [&] { return global_avg_fw(r3, ctx); });
    Tensor logits = fc_.fw(g, ctx, &stats, log);

    // ---- loss ----
    Tensor dlogits = Tensor::activation(opt_.elem, opt_.layout, 10, 1, 1);
    stats.loss = mse_loss_grad(logits, target, dlogits, ctx);

    // ---- backward + updates ----
    Tensor dg = fc_.bw_ig(dlogits, ctx, &stats, log);
    fc_.bw_wg_update(dlogits, lr, ctx, &stats, log);
    Tensor dr3 = modeldetail::timed_other(&stats, [&] { return global_avg_bw(r3, dg, ctx); });

    Tensor dsum3 = modeldetail::timed_other(&stats, [&] { return relu_bw(sum3, dr3, ctx); });
    Tensor dnq1 = c3b_.bw_ig(dsum3, ctx, &stats, log);
    c3b_.bw_wg_update(dsum3, lr, ctx, &stats, log);
    Tensor dn1 = modeldetail::timed_other(&stats, [&] { return relu_bw(n1, dnq1, ctx); });
    Tensor da3 = c3a_.bw_ig(dn1, ctx, &stats, log);
    c3a_.bw_wg_update(dn1, lr, ctx, &stats, log);
    Tensor da3_sk = sc3_.bw_ig(dsum3, ctx, &stats, log);
    sc3_.bw_wg_update(dsum3, lr, ctx, &stats, log);
    modeldetail::timed_other(&stats, [&] {
      add_into(da3, da3_sk, ctx);
      return 0;
    });
    Tensor dr2 = modeldetail::timed_other(&stats, [&] { return avgpool_bw(r2, da3, 2, 2, false, ctx); });

    Tensor dsum2 = modeldetail::timed_other(&stats, [&] { return relu_bw(sum2, dr2, ctx); });
    Tensor dmq1 = c2b_.bw_ig(dsum2, ctx, &stats, log);
    c2b_.bw_wg_update(dsum2, lr, ctx, &stats, log);
    Tensor dm1 = modeldetail::timed_other(&stats, [&] { return relu_bw(m1, dmq1, ctx); });
    Tensor da2 = c2a_.bw_ig(dm1, ctx, &stats, log);
    c2a_.bw_wg_update(dm1, lr, ctx, &stats, log);
    Tensor da2_sk = sc2_.bw_ig(dsum2, ctx, &stats, log);
    sc2_.bw_wg_update(dsum2, lr, ctx, &stats, log);
    modeldetail::timed_other(&stats, [&] {
      add_into(da2, da2_sk, ctx);
      return 0;
    });
    Tensor dr1 = modeldetail::timed_other(&stats, [&] { return avgpool_bw(r1, da2, 2, 2, false, ctx); });

    Tensor dsum1 = modeldetail::timed_other(&stats, [&] { return relu_bw(sum1, dr1, ctx); });
    Tensor dq1 = c1b_.bw_ig(dsum1, ctx, &stats, log);
    c1b_.bw_wg_update(dsum1, lr, ctx, &stats, log);
    Tensor dp1 = modeldetail::timed_other(&stats, [&] { return relu_bw(p1, dq1, ctx); });
    Tensor dr0 = c1a_.bw_ig(dp1, ctx, &stats, log);
    c1a_.bw_wg_update(dp1, lr, ctx, &stats, log);
    modeldetail::timed_other(&stats, [&] {
      add_into(dr0, dsum1, ctx);  // identity shortcut gradient
      return 0;
    });

    Tensor dstem = modeldetail::timed_other(&stats, [&] { return relu_bw(stem_pre, dr0, ctx); });
    stem_.bw_wg_update(dstem, lr, ctx, &stats, log);  // no upstream: skip ig

    stats.total_ns = modeldetail::now_ns() - t0;
    stats.phase_ns = prof.snapshot();
    stats.counters = ctr;
    if (pad_) stats.scratch_peak = pad_->peak_bytes();
    return stats;
  }

 private:

  ModelOptions opt_;
  std::unique_ptr<Scratchpad> pad_;
  modeldetail::ConvNode stem_, c1a_, c1b_, c2a_, c2b_, sc2_, c3a_, c3b_, sc3_, fc_;
};

// ---- ds_cnn -------------------------------------------------------------------

class DsCnn {
 public:
  static constexpr int kBlocks = 5;

  explicit DsCnn(const ModelOptions& opt) : opt_(opt) {
    if (opt_.tiled) pad_ = std::make_unique<Scratchpad>(opt_.scratch_bytes);
    Scratchpad* sp = pad_.get();
    std::uint32_t s = opt_.seed + 100;
    stem_.init("stem", OpKind::Conv, ConvSpec{1, 49, 10, 64, 3, 3, 1}, opt_, sp, ++s);
    for (int b = 0; b < kBlocks; ++b) {
      dw_[b].init("block" + std::to_string(b) + "_dw", 64, 25, 5, 3, 1, opt_, ++s);
      pw_[b].init("block" + std::to_string(b) + "_pw", OpKind::Pointwise,
                  ConvSpec{64, 25, 5, 64, 1, 1, 0}, opt_, sp, ++s);
    }
    fc_.init("classifier", OpKind::Fc, ConvSpec{64, 1, 1, 12, 1, 1, 0}, opt_, sp, ++s);
  }

  std::string name() const { return "ds_cnn"; }
  int classes() const { return 12; }

  Tensor sample_input(std::uint32_t seed) const {
    Tensor x = Tensor::activation(opt_.elem, opt_.layout, 1, 49, 10);
    fill_uniform(x, seed);
    return x;
  }
  Tensor sample_target(std::uint32_t seed) const {
    Tensor t = Tensor::activation(opt_.elem, opt_.layout, 12, 1, 1);
    t.set_act(seed % 12, 0, 0, 1.0f);
    return t;
  }

  std::uint64_t forward_macs() const {
    std::uint64_t total = stem_.forward_macs() + fc_.forward_macs();
    for (int b = 0; b < kBlocks; ++b) {
      total += dw_[b].forward_macs() + pw_[b].forward_macs();
    }
    return total;
  }

  StepStats train_step(const Tensor& x, const Tensor& target, float lr) {
    StepStats stats;
    PhaseProfiler prof;
    OpCounters ctr;
    RunContext ctx;
    ctx.exec.workers = opt_.workers;
    ctx.f16_acc = opt_.f16_acc;
    ctx.profiler = &prof;
    ctx.counters = &ctr;
    TransferLog* log = opt_.tiled ? &stats.transfers : nullptr;
    if (pad_) pad_->reset_peak();
    const std::uint64_t t0 = modeldetail::now_ns();

    // ---- forward ----
    Tensor stem_pre = stem_.fw(x, ctx, &stats, log);
    Tensor stem_act = modeldetail::timed_other(&stats, [&] { return relu_fw(stem_pre, ctx); });
    Tensor cur = modeldetail::timed_other(&stats, [&] { return maxpool_fw(stem_act, 2, 2, true, ctx); });

    std::array<Tensor, kBlocks> dw_pre, dw_act, pw_pre;
    for (int b = 0; b < kBlocks; ++b) {
      dw_pre[b] = dw_[b].fw(cur, ctx, &stats);
      dw_act[b] = modeldetail::timed_other(&stats, [&] { return relu_fw(dw_pre[b], ctx); });
      pw_pre[b] = pw_[b].fw(dw_act[b], ctx, &stats, log);
      cur = modeldetail::timed_other(&stats, [&] { return relu_fw(pw_pre[b], ctx); });
    }

    Tensor g = modeldetail::timed_other(&stats, [&] { return global_avg_fw(cur, ctx); });
    Tensor logits = fc_.fw(g, ctx, &stats, log);

    // ---- loss ----
    Tensor dlogits = Tensor::activation(opt_.elem, opt_.layout, 12, 1, 1);
    stats.loss = mse_loss_grad(logits, target, dlogits, ctx);

    // ---- backward + updates ----
    Tensor dg = fc_.bw_ig(dlogits, ctx, &stats, log);
    fc_.bw_wg_update(dlogits, lr, ctx, &stats, log);
    Tensor dcur = modeldetail::timed_other(&stats, [&] { return global_avg_bw(cur, dg, ctx); });

    for (int b = kBlocks - 1; b >= 0; --b) {
      Tensor dpw_pre = modeldetail::timed_other(&stats, [&] { return relu_bw(pw_pre[b], dcur, ctx); });
      Tensor ddw_act = pw_[b].bw_ig(dpw_pre, ctx, &stats, log);
      pw_[b].bw_wg_update(dpw_pre, lr, ctx, &stats, log);
      Tensor ddw_pre = modeldetail::timed_other(&stats, [&] { return relu_bw(dw_pre[b], ddw_act, ctx); });
      dcur = dw_[b].bw_ig(ddw_pre, ctx, &stats);
      dw_[b].bw_wg_update(ddw_pre, lr, ctx, &stats);
    }

    Tensor dstem_act =
        modeldetail::timed_other(&stats, [&] { return maxpool_bw(stem_act, dcur, 2, 2, true, ctx); });
    Tensor dstem = modeldetail::timed_other(&stats, [&] { return relu_bw(stem_pre, dstem_act, ctx); });
    stem_.bw_wg_update(dstem, lr, ctx, &stats, log);  // no upstream: skip ig

    stats.total_ns = modeldetail::now_ns() - t0;
    stats.phase_ns = prof.snapshot();
    stats.counters = ctr;
    if (pad_) stats.scratch_peak = pad_->peak_bytes();
    return stats;
  }

 private:

  ModelOptions opt_;
  std::unique_ptr<Scratchpad> pad_;
  modeldetail::ConvNode stem_, fc_;
  std::array<modeldetail::DwNode, kBlocks> dw_;
  std::array<modeldetail::ConvNode, kBlocks> pw_;
};

}  // namespace tinytrain
