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

// tinytrain_bench: measures the training kernels at four levels.
//
//   mm      raw matrix-multiply kernels across unroll variants
//   layer   single-layer training steps (forward / input grad / weight grad)
//   layout  channel-major vs channel-minor side by side, per layer and step
//   model   whole-model optimizer steps (resnet8, ds_cnn)
//
// Every timed case is first checked against a reference; a mismatch marks
// the case FAIL and the process exits non-zero. Timings are medians over
// --reps repetitions after warmup.

#include <cinttypes>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tinytrain/bench.hpp"

namespace tt = tinytrain;
namespace tb = tinytrain::bench;

namespace {

struct CommonFlags {
  std::string elem = "f32";
  std::string layout = "hwc";
  std::string variant;  // empty: per-elem default
  std::string f16_acc = "native";
  std::string f16_flavor = "ieee";
  int workers = 1;
  int reps = 9;
  std::uint32_t seed = 1;
  std::string csv;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_layout = true) {
  cmd->add_option("--elem", f.elem, "element type: f32|f16")
      ->check(CLI::IsMember({"f32", "f16"}));
  if (with_layout) {
    cmd->add_option("--layout", f.layout, "activation layout: chw|hwc")
        ->check(CLI::IsMember({"chw", "hwc"}));
  }
  cmd->add_option("--variant", f.variant,
                  "kernel variant: 1x1|2x2|2x4|4x2|lanes2 (default per elem)");
  cmd->add_option("--f16-acc", f.f16_acc, "f16 accumulation: native|f32")
      ->check(CLI::IsMember({"native", "f32"}));
  cmd->add_option("--f16-flavor", f.f16_flavor, "16-bit format: ieee|bfloat16")
      ->check(CLI::IsMember({"ieee", "bfloat16"}));
  cmd->add_option("--workers", f.workers, "worker threads")->check(CLI::Range(1, 64));
  cmd->add_option("--reps", f.reps, "timed repetitions")->check(CLI::Range(1, 1000));
  cmd->add_option("--seed", f.seed, "rng seed");
  cmd->add_option("--csv", f.csv, "append results to this CSV file");
}

tt::ElemType elem_of(const CommonFlags& f) { return tt::parse_elem(f.elem); }
tt::Layout layout_of(const CommonFlags& f) { return tt::parse_layout(f.layout); }
tt::F16Acc acc_of(const CommonFlags& f) {
  return f.f16_acc == "f32" ? tt::F16Acc::F32 : tt::F16Acc::Native;
}

void apply_flavor(const CommonFlags& f) {
  tt::f16_flavor() = tt::parse_f16_flavor(f.f16_flavor);
}

tt::KernelVariant variant_of(const CommonFlags& f, tt::ElemType e) {
  const tt::MmForm form = e == tt::ElemType::F16 ? tt::MmForm::MmT : tt::MmForm::Mm;
  if (f.variant.empty()) {
    return e == tt::ElemType::F16 ? tt::KernelVariant::f16_lanes2()
                                  : tt::KernelVariant::unrolled(2, 4);
  }
  return tt::parse_variant(f.variant, form);
}

std::vector<tt::KernelVariant> variant_sweep(const CommonFlags& f, tt::ElemType e) {
  if (!f.variant.empty() && f.variant != "all") return {variant_of(f, e)};
  const tt::MmForm form = e == tt::ElemType::F16 ? tt::MmForm::MmT : tt::MmForm::Mm;
  std::vector<tt::KernelVariant> v = {
      tt::KernelVariant::naive(form), tt::KernelVariant::unrolled(2, 2, form),
      tt::KernelVariant::unrolled(2, 4, form), tt::KernelVariant::unrolled(4, 2, form)};
  if (e == tt::ElemType::F16) v.push_back(tt::KernelVariant::f16_lanes2());
  return v;
}

const char* ok_str(bool ok) { return ok ? "ok" : "FAIL"; }

// ---- mm -----------------------------------------------------------------------

struct MmArgs {
  CommonFlags common;
  std::vector<std::int64_t> dims = {128, 128, 128};
};

int run_mm(const MmArgs& a) {
  apply_flavor(a.common);
  const tt::ElemType elem = elem_of(a.common);
  tb::TimingOptions topt;
  topt.reps = a.common.reps;
  tb::CsvWriter csv(a.common.csv);
  csv.row({"kernel", "variant", "elem", "f16_acc", "n", "k", "m", "workers",
           "median_ms", "gmacs", "utilization", "gate"});

  std::printf("matrix multiply  %" PRId64 "x%" PRId64 "x%" PRId64
              "  elem=%s  f16_acc=%s  workers=%d\n",
              a.dims[0], a.dims[1], a.dims[2], a.common.elem.c_str(),
              a.common.f16_acc.c_str(), a.common.workers);
  std::printf("%-8s %10s %10s %12s %6s\n", "variant", "median_ms", "gmac/s",
              "utilization", "gate");

  bool all_ok = true;
  for (const tt::KernelVariant& v : variant_sweep(a.common, elem)) {
    tb::MmCase c;
    c.n = a.dims[0];
    c.k = a.dims[1];
    c.m = a.dims[2];
    c.elem = elem;
    c.variant = v;
    c.f16_acc = acc_of(a.common);
    c.workers = a.common.workers;
    c.seed = a.common.seed;
    const tb::MmReport r = tb::run_mm_case(c, topt);
    all_ok = all_ok && r.ok;
    std::printf("%-8s %10s %10s %12s %6s\n", v.name().c_str(),
                tb::fmt_ms(r.ns).c_str(), tb::fmt_f(r.gmacs).c_str(),
                tb::fmt_f(r.utilization).c_str(), ok_str(r.ok));
    csv.row({"mm", v.name(), a.common.elem, a.common.f16_acc,
             std::to_string(c.n), std::to_string(c.k), std::to_string(c.m),
             std::to_string(c.workers), tb::fmt_ms(r.ns), tb::fmt_f(r.gmacs),
             tb::fmt_f(r.utilization), ok_str(r.ok)});
  }
  return all_ok ? 0 : 1;
}

// ---- layer / layout --------------------------------------------------------------

struct LayerArgs {
  CommonFlags common;
  std::string step = "all";
  std::string config;  // JSON file with custom layer shapes
  bool tiled = false;
  std::size_t scratch = tt::Scratchpad::kDefaultBytes;
  bool dump_plans = false;
};

std::vector<tb::NamedSpec> layer_cases(const LayerArgs& a,
                                       std::vector<std::string>& storage) {
  if (a.config.empty()) return tb::standard_layers();
  std::ifstream in(a.config);
  if (!in) throw tt::IoError("cannot open layer config: " + a.config);
  nlohmann::json j;
  in >> j;
  std::vector<tb::NamedSpec> out;
  storage.reserve(j.size());  // NamedSpec keeps pointers into storage
  for (const auto& e : j) {
    storage.push_back(e.at("name").get<std::string>());
    tt::ConvSpec s{e.at("c_in").get<tt::index_t>(),  e.at("h_in").get<tt::index_t>(),
                   e.at("w_in").get<tt::index_t>(),  e.at("c_out").get<tt::index_t>(),
                   e.at("k_h").get<tt::index_t>(),   e.at("k_w").get<tt::index_t>(),
                   e.at("pad").get<tt::index_t>()};
    out.push_back({storage.back().c_str(), s});
  }
  return out;
}

std::vector<tt::StepKind> steps_of(const std::string& s) {
  if (s == "fw") return {tt::StepKind::Fw};
  if (s == "ig") return {tt::StepKind::BwIg};
  if (s == "wg") return {tt::StepKind::BwWg};
  return {tt::StepKind::Fw, tt::StepKind::BwIg, tt::StepKind::BwWg};
}

int run_layer(const LayerArgs& a) {
  apply_flavor(a.common);
  const tt::ElemType elem = elem_of(a.common);
  const tt::Layout layout = layout_of(a.common);
  tb::TimingOptions topt;
  topt.reps = a.common.reps;
  tb::CsvWriter csv(a.common.csv);
  csv.row({"layer", "step", "layout", "elem", "f16_acc", "variant", "workers",
           "tiled", "median_ms", "gmacs", "mm_ms", "transform_ms", "transpose_ms",
           "copy_ms", "bytes_in", "bytes_out", "gate"});

  std::printf("layer steps  layout=%s elem=%s variant=%s workers=%d%s\n",
              a.common.layout.c_str(), a.common.elem.c_str(),
              variant_of(a.common, elem).name().c_str(), a.common.workers,
              a.tiled ? "  (tiled)" : "");
  std::printf("%-20s %-4s %10s %8s %8s %8s %6s\n", "layer", "step", "median_ms",
              "gmac/s", "mm_ms", "xform_ms", "gate");

  std::vector<std::string> names;
  bool all_ok = true;
  for (const tb::NamedSpec& ns : layer_cases(a, names)) {
    for (tt::StepKind step : steps_of(a.step)) {
      tb::StepCase c;
      c.name = ns.name;
      c.spec = ns.spec;
      c.step = step;
      c.layout = layout;
      c.elem = elem;
      c.variant = variant_of(a.common, elem);
      c.f16_acc = acc_of(a.common);
      c.workers = a.common.workers;
      c.tiled = a.tiled;
      c.scratch_bytes = a.scratch;
      c.seed = a.common.seed;
      const tb::StepReport r = tb::run_step_case(c, topt);
      all_ok = all_ok && r.ok;
      const auto ph = [&](tt::Phase p) {
        return r.phase_ns[static_cast<int>(p)];
      };
      std::printf("%-20s %-4s %10s %8s %8s %8s %6s\n", ns.name,
                  tt::to_string(step), tb::fmt_ms(r.ns).c_str(),
                  tb::fmt_f(r.gmacs).c_str(), tb::fmt_ms(ph(tt::Phase::Mm)).c_str(),
                  tb::fmt_ms(ph(tt::Phase::Transform)).c_str(), ok_str(r.ok));
      csv.row({ns.name, tt::to_string(step), a.common.layout, a.common.elem,
               a.common.f16_acc, c.variant.name(), std::to_string(c.workers),
               a.tiled ? "1" : "0", tb::fmt_ms(r.ns), tb::fmt_f(r.gmacs),
               tb::fmt_ms(ph(tt::Phase::Mm)), tb::fmt_ms(ph(tt::Phase::Transform)),
               tb::fmt_ms(ph(tt::Phase::Transpose)), tb::fmt_ms(ph(tt::Phase::Copy)),
               std::to_string(r.transfers.bytes_in),
               std::to_string(r.transfers.bytes_out), ok_str(r.ok)});
      if (a.tiled && a.dump_plans) {
        const tt::TilePlan plan = tt::plan_tiles(c.spec, c.layout, c.elem, c.step,
                                                 c.scratch_bytes, c.f16_acc);
        std::printf("  plan: %s\n", tt::plan_to_json(plan).c_str());
      }
    }
  }
  return all_ok ? 0 : 1;
}

int run_layout(const LayerArgs& a) {
  apply_flavor(a.common);
  const tt::ElemType elem = elem_of(a.common);
  tb::TimingOptions topt;
  topt.reps = a.common.reps;
  tb::CsvWriter csv(a.common.csv);
  csv.row({"layer", "step", "elem", "variant", "chw_ms", "hwc_ms", "hwc_over_chw",
           "gate"});

  std::printf("layout comparison  elem=%s variant=%s workers=%d\n",
              a.common.elem.c_str(), variant_of(a.common, elem).name().c_str(),
              a.common.workers);
  std::printf("%-20s %-4s %10s %10s %14s %6s\n", "layer", "step", "chw_ms",
              "hwc_ms", "hwc/chw", "gate");

  std::vector<std::string> names;
  bool all_ok = true;
  for (const tb::NamedSpec& ns : layer_cases(a, names)) {
    for (tt::StepKind step : steps_of(a.step)) {
      tb::StepCase c;
      c.name = ns.name;
      c.spec = ns.spec;
      c.step = step;
      c.elem = elem;
      c.variant = variant_of(a.common, elem);
      c.f16_acc = acc_of(a.common);
      c.workers = a.common.workers;
      c.seed = a.common.seed;
      c.layout = tt::Layout::CHW;
      const tb::StepReport r_chw = tb::run_step_case(c, topt);
      c.layout = tt::Layout::HWC;
      const tb::StepReport r_hwc = tb::run_step_case(c, topt);
      const bool ok = r_chw.ok && r_hwc.ok;
      all_ok = all_ok && ok;
      const double ratio =
          static_cast<double>(r_hwc.ns) / std::max<double>(1.0, r_chw.ns);
      std::printf("%-20s %-4s %10s %10s %14s %6s\n", ns.name, tt::to_string(step),
                  tb::fmt_ms(r_chw.ns).c_str(), tb::fmt_ms(r_hwc.ns).c_str(),
                  tb::fmt_f(ratio).c_str(), ok_str(ok));
      csv.row({ns.name, tt::to_string(step), a.common.elem, c.variant.name(),
               tb::fmt_ms(r_chw.ns), tb::fmt_ms(r_hwc.ns), tb::fmt_f(ratio),
               ok_str(ok)});
    }
  }
  return all_ok ? 0 : 1;
}

// ---- model --------------------------------------------------------------------

struct ModelArgs {
  CommonFlags common;
  std::string model = "resnet8";
  int steps = 5;
  float lr = 0.005f;
  bool tiled = false;
  std::size_t scratch = tt::Scratchpad::kDefaultBytes;
};

int run_model(const ModelArgs& a) {
  apply_flavor(a.common);
  tb::ModelCase c;
  c.model = a.model;
  c.opt.layout = layout_of(a.common);
  c.opt.elem = elem_of(a.common);
  c.opt.f16_acc = acc_of(a.common);
  c.opt.workers = a.common.workers;
  c.opt.tiled = a.tiled;
  c.opt.scratch_bytes = a.scratch;
  c.opt.seed = a.common.seed;
  c.steps = a.steps;
  c.lr = a.lr;
  c.seed = a.common.seed;

  const tb::ModelReport r = tb::run_model_case(c);

  std::printf("model=%s layout=%s elem=%s workers=%d%s  fw_macs=%" PRIu64 "\n",
              a.model.c_str(), a.common.layout.c_str(), a.common.elem.c_str(),
              a.common.workers, a.tiled ? " (tiled)" : "", r.forward_macs);
  std::printf("median step: %s ms\n", tb::fmt_ms(r.median_ns).c_str());
  std::printf("loss: first=%.6f last=%.6f (%d steps)\n", r.losses.front(),
              r.losses.back(), a.steps);

  std::printf("by kind:");
  for (int k = 0; k < tt::kOpKindCount; ++k) {
    const double share = 100.0 * static_cast<double>(r.kind_ns[k]) /
                         std::max<double>(1.0, static_cast<double>(r.kind_total_ns));
    std::printf("  %s %.1f%%", tt::to_string(static_cast<tt::OpKind>(k)), share);
  }
  std::printf("\nby phase:");
  std::uint64_t phase_total = 0;
  for (auto v : r.phase_ns) phase_total += v;
  for (int p = 0; p < tt::kPhaseCount; ++p) {
    const double share = 100.0 * static_cast<double>(r.phase_ns[p]) /
                         std::max<double>(1.0, static_cast<double>(phase_total));
    std::printf("  %s %.1f%%", tt::to_string(static_cast<tt::Phase>(p)), share);
  }
  std::printf("\n");
  if (a.tiled) {
    std::printf("scratch peak: %" PRIu64 " B  staged in/out: %" PRIu64 "/%" PRIu64
                " B (%" PRIu64 " transfers)\n",
                r.scratch_peak, r.transfers.bytes_in, r.transfers.bytes_out,
                r.transfers.transfers);
  }
  std::printf("gate: %s\n", ok_str(r.ok));

  tb::CsvWriter csv(a.common.csv);
  csv.row({"model", "layout", "elem", "f16_acc", "workers", "tiled", "median_ms",
           "loss_first", "loss_last", "conv_pct", "pw_pct", "dw_pct", "fc_pct",
           "other_pct", "gate"});
  auto pct = [&](tt::OpKind k) {
    return tb::fmt_f(100.0 * static_cast<double>(r.kind_ns[static_cast<int>(k)]) /
                         std::max<double>(1.0, static_cast<double>(r.kind_total_ns)),
                     1);
  };
  csv.row({a.model, a.common.layout, a.common.elem, a.common.f16_acc,
           std::to_string(a.common.workers), a.tiled ? "1" : "0",
           tb::fmt_ms(r.median_ns), tb::fmt_f(r.losses.front(), 6),
           tb::fmt_f(r.losses.back(), 6), pct(tt::OpKind::Conv),
           pct(tt::OpKind::Pointwise), pct(tt::OpKind::Depthwise),
           pct(tt::OpKind::Fc), pct(tt::OpKind::Other), ok_str(r.ok)});
  return r.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tinytrain benchmark driver"};
  app.require_subcommand(1);

  MmArgs mm_args;
  CLI::App* mm_cmd = app.add_subcommand("mm", "matrix-multiply kernel variants");
  mm_cmd->add_option("--dims", mm_args.dims, "problem size n k m")->expected(3);
  add_common(mm_cmd, mm_args.common, /*with_layout=*/false);

  LayerArgs layer_args;
  CLI::App* layer_cmd = app.add_subcommand("layer", "single-layer training steps");
  layer_cmd->add_option("--step", layer_args.step, "fw|ig|wg|all")
      ->check(CLI::IsMember({"fw", "ig", "wg", "all"}));
  layer_cmd->add_option("--config", layer_args.config,
                        "JSON array of layer shapes (name,c_in,h_in,w_in,c_out,k_h,k_w,pad)");
  layer_cmd->add_flag("--tiled", layer_args.tiled, "run through the scratchpad tiler");
  layer_cmd->add_option("--l1-bytes", layer_args.scratch, "scratchpad budget in bytes");
  layer_cmd->add_flag("--dump-plans", layer_args.dump_plans,
                      "print each tile plan as JSON");
  add_common(layer_cmd, layer_args.common);

  LayerArgs layout_args;
  CLI::App* layout_cmd =
      app.add_subcommand("layout", "channel-major vs channel-minor comparison");
  layout_cmd->add_option("--step", layout_args.step, "fw|ig|wg|all")
      ->check(CLI::IsMember({"fw", "ig", "wg", "all"}));
  layout_cmd->add_option("--config", layout_args.config, "JSON array of layer shapes");
  add_common(layout_cmd, layout_args.common, /*with_layout=*/false);

  ModelArgs model_args;
  CLI::App* model_cmd = app.add_subcommand("model", "whole-model optimizer steps");
  model_cmd->add_option("--model", model_args.model, "resnet8|ds_cnn")
      ->check(CLI::IsMember({"resnet8", "ds_cnn"}));
  model_cmd->add_option("--steps", model_args.steps, "optimizer steps")
      ->check(CLI::Range(1, 1000));
  model_cmd->add_option("--lr", model_args.lr, "learning rate");
  model_cmd->add_flag("--tiled", model_args.tiled, "run lowered layers tiled");
  model_cmd->add_option("--l1-bytes", model_args.scratch, "scratchpad budget in bytes");
  add_common(model_cmd, model_args.common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (mm_cmd->parsed()) return run_mm(mm_args);
    if (layer_cmd->parsed()) return run_layer(layer_args);
    if (layout_cmd->parsed()) return run_layout(layout_args);
    if (model_cmd->parsed()) return run_model(model_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
