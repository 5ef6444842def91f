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

// Measurement harness for the kernels, the per-layer training steps, and the
// whole-model steps. Every benchmark case carries a correctness gate that
// runs before timing: a case whose output disagrees with its reference is
// reported as failed and poisons the run's exit status — a fast wrong kernel
// must never look like a win.
//
// Timing discipline: a few untimed warmup repetitions, then the median of
// the timed repetitions. Counter and phase collection happen on a separate
// untimed repetition so the timed loop runs without instrumentation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tinytrain/model.hpp"

namespace tinytrain {
namespace bench {

struct TimingOptions {
  int reps = 9;
  int warmup = 2;
};

inline std::uint64_t now_ns() { return modeldetail::now_ns(); }

// Median of the timed repetitions of body().
template <typename F>
std::uint64_t median_ns(F&& body, const TimingOptions& t) {
  for (int i = 0; i < t.warmup; ++i) body();
  std::vector<std::uint64_t> samples;
  samples.reserve(static_cast<std::size_t>(t.reps));
  for (int i = 0; i < t.reps; ++i) {
    const std::uint64_t t0 = now_ns();
    body();
    samples.push_back(now_ns() - t0);
  }
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

// Largest elementwise |a-b| / max(1, |b|) between two same-shape tensors.
inline double max_rel_err(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (index_t i = 0; i < a.count(); ++i) {
    const double va = a.get_flat(i);
    const double vb = b.get_flat(i);
    const double rel = std::abs(va - vb) / std::max(1.0, std::abs(vb));
    worst = std::max(worst, rel);
  }
  return worst;
}

// ---- CSV ----------------------------------------------------------------------

// Appends rows to a CSV file; a default-constructed writer discards them.
class CsvWriter {
 public:
  CsvWriter() = default;
  explicit CsvWriter(const std::string& path) {
    if (!path.empty()) {
      out_.open(path, std::ios::out | std::ios::trunc);
      if (!out_) throw IoError("cannot open csv file: " + path);
    }
  }
  bool enabled() const { return out_.is_open(); }
  void row(const std::vector<std::string>& cells) {
    if (!out_.is_open()) return;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

inline std::string fmt_ms(std::uint64_t ns) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << static_cast<double>(ns) / 1e6;
  return os.str();
}

inline std::string fmt_f(double v, int prec = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

// ---- standard case table --------------------------------------------------------

// Layer shapes used throughout the reports: four small 3x3 feature-extractor
// convolutions spanning the channel/spatial trade-off, plus one pointwise
// layer. Batch 1 training shapes.
struct NamedSpec {
  const char* name;
  ConvSpec spec;
};

inline std::vector<NamedSpec> standard_layers() {
  return {
      {"conv_c16_8x8_to16", ConvSpec{16, 8, 8, 16, 3, 3, 1}},
      {"conv_c16_4x4_to32", ConvSpec{16, 4, 4, 32, 3, 3, 1}},
      {"conv_c8_16x16_to8", ConvSpec{8, 16, 16, 8, 3, 3, 1}},
      {"conv_c1_8x8_to16", ConvSpec{1, 8, 8, 16, 3, 3, 1}},
      {"pw_c32_8x8_to64", ConvSpec{32, 8, 8, 64, 1, 1, 0}},
  };
}

// ---- matrix-multiply cases ------------------------------------------------------

struct MmCase {
  index_t n = 128, k = 128, m = 128;
  ElemType elem = ElemType::F32;
  KernelVariant variant = KernelVariant::unrolled(2, 4);
  F16Acc f16_acc = F16Acc::Native;
  int workers = 1;
  std::uint32_t seed = 1;
};

struct MmReport {
  std::uint64_t ns = 0;
  double gmacs = 0.0;  // 1e9 MAC/s at the median
  OpCounters counters;
  double utilization = 0.0;
  bool ok = false;
  double gate_err = 0.0;
};

// Times C = A*B for the case's variant. Gate: scalar variants must agree
// bitwise with the naive kernel at the same element type and accumulation
// mode (they all follow the same k-ordered rounding discipline). The
// paired-lane kernel reduces even and odd k positions in separate chains, so
// under native accumulation its per-MAC roundings drift from the sequential
// chain with growing K; it gates instead on binary32 accumulation, where any
// addressing defect still shows up as an O(1) error but correct dataflow
// leaves only final-rounding noise.
inline MmReport run_mm_case(const MmCase& c, const TimingOptions& t) {
  MmReport rep;
  c.variant.validate(c.elem);
  RunContext ctx;
  ctx.exec.workers = c.workers;
  ctx.f16_acc = c.f16_acc;

  const bool trans = c.variant.form == MmForm::MmT;
  Tensor a = Tensor::matrix(c.elem, c.n, c.k);
  Tensor b = trans ? Tensor::matrix(c.elem, c.m, c.k) : Tensor::matrix(c.elem, c.k, c.m);
  Tensor out = Tensor::matrix(c.elem, c.n, c.m);
  Tensor ref = Tensor::matrix(c.elem, c.n, c.m);
  fill_uniform(a, c.seed);
  fill_uniform(b, c.seed + 1);

  auto run_into = [&](Tensor& dst, const KernelVariant& v, const RunContext& rc) {
    auto go = [&]<typename T>(T) {
      if (trans) {
        mm_t<T>(matrix_of<T>(std::as_const(a)), matrix_of<T>(std::as_const(b)),
                matrix_of<T>(dst), v, rc);
      } else {
        mm<T>(matrix_of<T>(std::as_const(a)), matrix_of<T>(std::as_const(b)),
              matrix_of<T>(dst), v, rc);
      }
    };
    c.elem == ElemType::F32 ? go(float{}) : go(half_t{});
  };

  KernelVariant naive = KernelVariant::naive(trans ? MmForm::MmT : MmForm::Mm);
  if (c.variant.vec == VectorMode::Scalar) {
    run_into(ref, naive, ctx);
    run_into(out, c.variant, ctx);
    rep.ok = bitwise_equal(out, ref);
    rep.gate_err = rep.ok ? 0.0 : max_rel_err(out, ref);
  } else {
    RunContext wide = ctx;
    wide.f16_acc = F16Acc::F32;
    run_into(ref, naive, wide);
    run_into(out, c.variant, wide);
    rep.gate_err = max_rel_err(out, ref);
    rep.ok = rep.gate_err <= 1e-3;
  }

  OpCounters ctr;
  RunContext counted = ctx;
  counted.counters = &ctr;
  run_into(out, c.variant, counted);
  rep.counters = ctr;
  rep.utilization = ctr.utilization();

  rep.ns = median_ns([&] { run_into(out, c.variant, ctx); }, t);
  rep.gmacs = static_cast<double>(ctr.mac) / static_cast<double>(rep.ns);
  return rep;
}

// ---- per-layer training-step cases ----------------------------------------------

struct StepCase {
  std::string name;
  ConvSpec spec;
  StepKind step = StepKind::Fw;
  Layout layout = Layout::HWC;
  ElemType elem = ElemType::F32;
  KernelVariant variant = KernelVariant::unrolled(2, 4);
  F16Acc f16_acc = F16Acc::Native;
  int workers = 1;
  bool tiled = false;
  std::size_t scratch_bytes = Scratchpad::kDefaultBytes;
  std::uint32_t seed = 1;
};

struct StepReport {
  std::uint64_t ns = 0;
  std::array<std::uint64_t, kPhaseCount> phase_ns{};
  OpCounters counters;
  TransferLog transfers;
  std::uint64_t macs = 0;
  double gmacs = 0.0;
  bool ok = false;
  double gate_err = 0.0;
};

namespace benchdetail {

inline Tensor run_step(LayerState& st, const Tensor& x, const Tensor& dy,
                       StepKind step, const RunContext& ctx) {
  switch (step) {
    case StepKind::Fw:
      return conv2d_fw(st, x, ctx);
    case StepKind::BwIg:
      return conv2d_bw_ig(st, dy, ctx);
    default:
      return conv2d_bw_wg(st, dy, ctx);
  }
}

inline Tensor run_step_tiled(LayerState& st, const Tensor& x, const Tensor& dy,
                             const TilePlan& plan, Scratchpad& pad,
                             const RunContext& ctx, TransferLog* log) {
  switch (plan.step) {
    case StepKind::Fw:
      return conv2d_fw_tiled(st, x, plan, pad, ctx, log);
    case StepKind::BwIg:
      return conv2d_bw_ig_tiled(st, dy, plan, pad, ctx, log);
    default:
      return conv2d_bw_wg_tiled(st, dy, plan, pad, ctx, log);
  }
}

}  // namespace benchdetail

// Times one training step of one layer against the naive untiled kernel.
// The gate is bitwise wherever the rounding chains are defined to coincide:
// all of f32, and scalar f16 except the tiled weight gradient (whose
// cross-tile carry re-orders rounding). The remaining f16 cases gate under
// binary32 accumulation with a small relative tolerance — correct dataflow
// leaves only rounding noise there, while an addressing bug shows as O(1).
inline StepReport run_step_case(const StepCase& c, const TimingOptions& t) {
  StepReport rep;
  c.spec.validate();
  c.variant.validate(c.elem);
  RunContext ctx;
  ctx.exec.workers = c.workers;
  ctx.f16_acc = c.f16_acc;

  LayerState st = make_layer(c.spec, c.layout, c.elem, c.variant);
  fill_uniform(st.w, c.seed);
  Tensor x = Tensor::activation(c.elem, c.layout, c.spec.c_in, c.spec.h_in, c.spec.w_in);
  Tensor dy =
      Tensor::activation(c.elem, c.layout, c.spec.c_out, c.spec.h_out(), c.spec.w_out());
  fill_uniform(x, c.seed + 1);
  fill_uniform(dy, c.seed + 2);
  st.x_saved = x.clone();  // backward steps need the saved input
  st.has_x = true;

  // Reference: naive kernel, untiled.
  LayerState st_ref = make_layer(c.spec, c.layout, c.elem, KernelVariant::naive());
  st_ref.w = st.w.clone();
  st_ref.x_saved = x.clone();
  st_ref.has_x = true;
  Tensor ref = benchdetail::run_step(st_ref, x, dy, c.step, ctx);

  TilePlan plan;
  Scratchpad pad(c.tiled ? c.scratch_bytes : 1024);
  if (c.tiled) {
    plan = plan_tiles(c.spec, c.layout, c.elem, c.step, c.scratch_bytes, c.f16_acc);
  }
  auto run_once = [&](const RunContext& rc, TransferLog* log) {
    return c.tiled ? benchdetail::run_step_tiled(st, x, dy, plan, pad, rc, log)
                   : benchdetail::run_step(st, x, dy, c.step, rc);
  };

  const bool exact =
      c.elem == ElemType::F32 ||
      (c.variant.vec == VectorMode::Scalar && !(c.tiled && c.step == StepKind::BwWg));
  if (exact) {
    Tensor got = run_once(ctx, nullptr);
    rep.ok = bitwise_equal(got, ref);
    rep.gate_err = rep.ok ? 0.0 : max_rel_err(got, ref);
  } else {
    RunContext wide = ctx;
    wide.f16_acc = F16Acc::F32;
    Tensor wide_ref = benchdetail::run_step(st_ref, x, dy, c.step, wide);
    Tensor got;
    if (c.tiled) {
      const TilePlan wide_plan =
          plan_tiles(c.spec, c.layout, c.elem, c.step, c.scratch_bytes, F16Acc::F32);
      got = benchdetail::run_step_tiled(st, x, dy, wide_plan, pad, wide, nullptr);
    } else {
      got = benchdetail::run_step(st, x, dy, c.step, wide);
    }
    rep.gate_err = max_rel_err(got, wide_ref);
    rep.ok = rep.gate_err <= 0.02;
  }

  PhaseProfiler prof;
  OpCounters ctr;
  RunContext counted = ctx;
  counted.profiler = &prof;
  counted.counters = &ctr;
  (void)run_once(counted, &rep.transfers);
  rep.phase_ns = prof.snapshot();
  rep.counters = ctr;
  rep.macs = c.spec.mac_count();

  rep.ns = median_ns([&] { (void)run_once(ctx, nullptr); }, t);
  rep.gmacs = static_cast<double>(rep.macs) / static_cast<double>(rep.ns);
  return rep;
}

// ---- whole-model cases ----------------------------------------------------------

struct ModelCase {
  std::string model = "resnet8";  // or "ds_cnn"
  ModelOptions opt;
  int steps = 5;
  float lr = 0.005f;
  std::uint32_t seed = 1;
};

struct ModelReport {
  std::uint64_t median_ns = 0;
  std::array<std::uint64_t, kPhaseCount> phase_ns{};
  std::array<std::uint64_t, kOpKindCount> kind_ns{};
  std::uint64_t kind_total_ns = 0;
  OpCounters counters;
  TransferLog transfers;
  std::uint64_t scratch_peak = 0;
  std::uint64_t forward_macs = 0;
  std::vector<double> losses;
  bool ok = false;
};

// Runs `steps` optimizer steps on one sample and reports the median step
// time with its phase and operator-kind split. Gate: every loss is finite,
// and in f32 the final loss is strictly below the first (the step must
// actually train).
template <typename M>
inline ModelReport run_model_steps(M& model, const ModelCase& c) {
  ModelReport rep;
  rep.forward_macs = model.forward_macs();
  Tensor x = model.sample_input(c.seed + 10);
  Tensor target = model.sample_target(c.seed + 20);

  std::vector<std::uint64_t> times;
  for (int i = 0; i < c.steps; ++i) {
    StepStats st = model.train_step(x, target, c.lr);
    times.push_back(st.total_ns);
    rep.losses.push_back(st.loss);
    if (i == 0) {
      rep.phase_ns = st.phase_ns;
      rep.kind_ns = st.kind_ns;
      rep.counters = st.counters;
      rep.transfers = st.transfers;
      rep.scratch_peak = st.scratch_peak;
    }
  }
  std::sort(times.begin(), times.end());
  rep.median_ns = times[times.size() / 2];
  for (auto v : rep.kind_ns) rep.kind_total_ns += v;

  bool finite = true;
  for (double l : rep.losses) finite = finite && std::isfinite(l);
  const bool trained = rep.losses.back() < rep.losses.front();
  rep.ok = finite && (c.opt.elem == ElemType::F16 || trained);
  return rep;
}

inline ModelReport run_model_case(const ModelCase& c) {
  if (c.model == "resnet8") {
    ResNet8 m(c.opt);
    return run_model_steps(m, c);
  }
  if (c.model == "ds_cnn") {
    DsCnn m(c.opt);
    return run_model_steps(m, c);
  }
  throw ConfigError("unknown model: " + c.model + " (expected resnet8 or ds_cnn)");
}

}  // namespace bench
}  // namespace tinytrain
