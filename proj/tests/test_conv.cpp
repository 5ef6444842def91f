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

// Convolution training-step verification: forward against the direct
// double-precision oracle, both backward passes against the oracle and
// against central finite differences, the pointwise and fully-connected
// degenerate forms, weight-storage conventions, cross-layout/variant
// agreement, and the SGD update rule down to a convex toy that must descend.

#include <gtest/gtest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "tinytrain/conv.hpp"

namespace tt = tinytrain;

namespace {

constexpr tt::Layout kLayouts[] = {tt::Layout::CHW, tt::Layout::HWC};
constexpr tt::ElemType kElems[] = {tt::ElemType::F32, tt::ElemType::F16};

tt::Tensor rand_act(tt::ElemType e, tt::Layout l, const tt::ConvSpec& s,
                    std::uint32_t seed) {
  tt::Tensor t = tt::Tensor::activation(e, l, s.c_in, s.h_in, s.w_in);
  tt::fill_uniform(t, seed);
  return t;
}

tt::Tensor rand_dy(tt::ElemType e, tt::Layout l, const tt::ConvSpec& s,
                   std::uint32_t seed) {
  tt::Tensor t = tt::Tensor::activation(e, l, s.c_out, s.h_out(), s.w_out());
  tt::fill_uniform(t, seed);
  return t;
}

TEST(ConvFw, IdentityFilterPassesInputThrough) {
  const tt::ConvSpec s{1, 4, 5, 1, 1, 1, 0};
  for (const tt::Layout layout : kLayouts) {
    for (const tt::ElemType elem : kElems) {
      tt::LayerState st = tt::make_layer(s, layout, elem);
      st.w.set_w(0, 0, 0, 0, 1.0f);
      tt::Tensor x = rand_act(elem, layout, s, 1u);
      tt::Tensor y = tt::conv2d_fw(st, x);
      EXPECT_TRUE(tt::bitwise_equal(y, x));
    }
  }
}

TEST(ConvFw, OnesFilterSumsItsWindow) {
  // 3x3 ones against a 2x2 ones filter: each of the 4 windows sums to 4.
  const tt::ConvSpec s{1, 3, 3, 1, 2, 2, 0};
  tt::LayerState st = tt::make_layer(s, tt::Layout::HWC, tt::ElemType::F32);
  for (tt::index_t i = 0; i < 4; ++i) st.w.set_flat(i, 1.0f);
  tt::Tensor x = tt::Tensor::activation(tt::ElemType::F32, tt::Layout::HWC, 1, 3, 3);
  for (tt::index_t i = 0; i < 9; ++i) x.set_flat(i, 1.0f);
  tt::Tensor y = tt::conv2d_fw(st, x);
  ASSERT_EQ(y.h(), 2);
  ASSERT_EQ(y.w(), 2);
  for (tt::index_t i = 0; i < 4; ++i) EXPECT_EQ(y.get_flat(i), 4.0f);
}

TEST(ConvFw, OperandTableCoversEveryStorageCombination) {
  // One mid-size geometry through all four (layout, elem) pairs; each must
  // match the oracle and carry the storage convention of its column.
  const tt::ConvSpec s{5, 7, 6, 4, 3, 3, 1};
  for (const tt::Layout layout : kLayouts) {
    for (const tt::ElemType elem : kElems) {
      tt::LayerState st = tt::make_layer(s, layout, elem);
      EXPECT_EQ(st.w.transposed(),
                layout == tt::Layout::HWC && elem == tt::ElemType::F16);
      tt::fill_uniform(st.w, 11u);
      tt::Tensor x = rand_act(elem, layout, s, 21u);
      tt::Tensor y = tt::conv2d_fw(st, x);
      const ttest::Grid3 want =
          ttest::conv_fw_ref(ttest::from_w(st.w), ttest::from_act(x), s.pad);
      const ttest::Diff d = ttest::diff_act(y, want);
      if (elem == tt::ElemType::F32) {
        EXPECT_LE(d.max_abs, 1e-5);
      } else {
        EXPECT_LE(d.max_rel, 1e-2);
      }
    }
  }
}

TEST(ConvFw, Conv1ClassShapeMatchesOracle) {
  // The 16-channel 8x8 k3 pad1 shape; K = 144 accumulation steps.
  const tt::ConvSpec s{16, 8, 8, 16, 3, 3, 1};
  tt::LayerState st = tt::make_layer(s, tt::Layout::HWC, tt::ElemType::F32);
  tt::fill_uniform(st.w, 5u);
  tt::Tensor x = rand_act(tt::ElemType::F32, tt::Layout::HWC, s, 6u);
  tt::Tensor y = tt::conv2d_fw(st, x);
  const ttest::Grid3 want =
      ttest::conv_fw_ref(ttest::from_w(st.w), ttest::from_act(x), s.pad);
  EXPECT_LE(ttest::diff_act(y, want).max_abs, 1e-4);
}

TEST(ConvFw, VariantChoiceNeverChangesScalarBits) {
  const tt::ConvSpec s{3, 6, 7, 5, 2, 2, 0};
  for (const tt::Layout layout : kLayouts) {
    for (const tt::ElemType elem : kElems) {
      tt::Tensor x = rand_act(elem, layout, s, 31u);
      tt::LayerState ref_st =
          tt::make_layer(s, layout, elem, tt::KernelVariant::naive());
      tt::fill_uniform(ref_st.w, 32u);
      tt::Tensor ref = tt::conv2d_fw(ref_st, x);
      for (const auto& uv : {tt::Unroll{2, 2}, tt::Unroll{2, 4}, tt::Unroll{4, 2}}) {
        tt::LayerState st =
            tt::make_layer(s, layout, elem, tt::KernelVariant::unrolled(uv.u, uv.v));
        tt::fill_uniform(st.w, 32u);
        tt::Tensor y = tt::conv2d_fw(st, x);
        EXPECT_TRUE(tt::bitwise_equal(y, ref));
      }
      if (elem == tt::ElemType::F16) {
        tt::LayerState st =
            tt::make_layer(s, layout, elem, tt::KernelVariant::f16_lanes2());
        tt::fill_uniform(st.w, 32u);
        tt::Tensor y = tt::conv2d_fw(st, x);
        const ttest::Diff d =
            ttest::diff_act(y, ttest::from_act(ref));
        EXPECT_LE(d.max_rel, 1e-2);  // paired lanes split the chain
      }
    }
  }
}

TEST(ConvIg, ScalarWeightScalesGradient) {
  const tt::ConvSpec s{1, 4, 4, 1, 1, 1, 0};
  tt::LayerState st = tt::make_layer(s, tt::Layout::CHW, tt::ElemType::F32);
  st.w.set_w(0, 0, 0, 0, -2.5f);
  tt::Tensor dy = rand_dy(tt::ElemType::F32, tt::Layout::CHW, s, 3u);
  tt::Tensor dx = tt::conv2d_bw_ig(st, dy);
  for (tt::index_t i = 0; i < dx.count(); ++i) {
    EXPECT_EQ(dx.get_flat(i), -2.5f * dy.get_flat(i));
  }
}

TEST(ConvIg, MatchesOracleAcrossGeometries) {
  ttest::GeomRng rng(101u);
  for (int i = 0; i < 12; ++i) {
    const tt::ConvSpec s = rng.next_spec();
    for (const tt::Layout layout : kLayouts) {
      tt::LayerState st = tt::make_layer(s, layout, tt::ElemType::F32);
      tt::fill_uniform(st.w, static_cast<std::uint32_t>(200 + i));
      tt::Tensor dy = rand_dy(tt::ElemType::F32, layout, s, 300u + i);
      tt::Tensor dx = tt::conv2d_bw_ig(st, dy);
      const ttest::Grid3 want = ttest::conv_ig_ref(
          ttest::from_w(st.w), ttest::from_act(dy), s.pad, s.h_in, s.w_in);
      ASSERT_LE(ttest::diff_act(dx, want).max_abs, 1e-5) << s.to_string();
    }
  }
}

TEST(ConvIg, SingleChannelFiniteDifferenceCheck) {
  const tt::ConvSpec s{1, 5, 5, 1, 2, 2, 0};
  tt::LayerState st = tt::make_layer(s, tt::Layout::HWC, tt::ElemType::F32);
  tt::fill_uniform(st.w, 7u);
  tt::Tensor x = rand_act(tt::ElemType::F32, tt::Layout::HWC, s, 8u);
  tt::Tensor y = tt::conv2d_fw(st, x);
  tt::Tensor dy = rand_dy(tt::ElemType::F32, tt::Layout::HWC, s, 9u);
  tt::Tensor dx = tt::conv2d_bw_ig(st, dy);
  const ttest::Grid3 fd = ttest::fd_input_grad(
      ttest::from_w(st.w), ttest::from_act(x), ttest::from_act(dy), s.pad, 1e-3);
  EXPECT_LE(ttest::diff_act(dx, fd).max_rel, 1e-3);
  (void)y;
}

TEST(ConvIg, AllStorageCombinationsAgree) {
  const tt::ConvSpec s{4, 6, 6, 3, 3, 3, 1};
  // Build one logical problem, run it through every storage combination,
  // and require agreement within the half-precision tolerance.
  tt::LayerState ref_st = tt::make_layer(s, tt::Layout::CHW, tt::ElemType::F32);
  tt::fill_uniform(ref_st.w, 51u);
  tt::Tensor ref_dy = rand_dy(tt::ElemType::F32, tt::Layout::CHW, s, 52u);
  const ttest::Grid3 ref = ttest::from_act(tt::conv2d_bw_ig(ref_st, ref_dy));
  for (const tt::Layout layout : kLayouts) {
    for (const tt::ElemType elem : kElems) {
      tt::LayerState st = tt::make_layer(s, layout, elem);
      // Same logical weights, re-homed into this storage.
      for (tt::index_t o = 0; o < s.c_out; ++o) {
        for (tt::index_t i = 0; i < s.c_in; ++i) {
          for (tt::index_t a = 0; a < s.k_h; ++a) {
            for (tt::index_t b = 0; b < s.k_w; ++b) {
              st.w.set_w(o, i, a, b, ref_st.w.get_w(o, i, a, b));
            }
          }
        }
      }
      tt::Tensor dy = tt::Tensor::activation(elem, layout, s.c_out, s.h_out(),
                                             s.w_out());
      for (tt::index_t c = 0; c < s.c_out; ++c) {
        for (tt::index_t yy = 0; yy < s.h_out(); ++yy) {
          for (tt::index_t xx = 0; xx < s.w_out(); ++xx) {
            dy.set_act(c, yy, xx, ref_dy.get_act(c, yy, xx));
          }
        }
      }
      tt::Tensor dx = tt::conv2d_bw_ig(st, dy);
      const ttest::Diff d = ttest::diff_act(dx, ref);
      EXPECT_LE(d.max_rel, 1e-2) << static_cast<int>(layout) << "/"
                                 << static_cast<int>(elem);
    }
  }
}

TEST(ConvWg, ZeroInputMeansZeroGradient) {
  const tt::ConvSpec s{3, 5, 5, 2, 2, 2, 0};
  for (const tt::Layout layout : kLayouts) {
    for (const tt::ElemType elem : kElems) {
      tt::LayerState st = tt::make_layer(s, layout, elem);
      tt::fill_uniform(st.w, 61u);
      tt::Tensor x = tt::Tensor::activation(elem, layout, s.c_in, s.h_in, s.w_in);
      (void)tt::conv2d_fw(st, x);  // saves the zero input
      tt::Tensor dy = rand_dy(elem, layout, s, 62u);
      tt::Tensor dw = tt::conv2d_bw_wg(st, dy);
      EXPECT_EQ(dw.transposed(), st.w.transposed());
      for (tt::index_t i = 0; i < dw.count(); ++i) EXPECT_EQ(dw.get_flat(i), 0.0f);
    }
  }
}

TEST(ConvWg, SingleWeightIsPlainReduction) {
  // C_I = C_O = 1, k = 1: dW is the scalar sum over all pixels of X * dY.
  const tt::ConvSpec s{1, 6, 7, 1, 1, 1, 0};
  tt::LayerState st = tt::make_layer(s, tt::Layout::CHW, tt::ElemType::F32);
  tt::fill_uniform(st.w, 71u);
  tt::Tensor x = rand_act(tt::ElemType::F32, tt::Layout::CHW, s, 72u);
  (void)tt::conv2d_fw(st, x);
  tt::Tensor dy = rand_dy(tt::ElemType::F32, tt::Layout::CHW, s, 73u);
  tt::Tensor dw = tt::conv2d_bw_wg(st, dy);
  double want = 0.0;
  for (tt::index_t i = 0; i < x.count(); ++i) {
    want += static_cast<double>(x.get_flat(i)) * static_cast<double>(dy.get_flat(i));
  }
  EXPECT_NEAR(dw.get_flat(0), want, 1e-5);
}

TEST(ConvWg, MatchesOracleAcrossGeometries) {
  ttest::GeomRng rng(111u);
  for (int i = 0; i < 12; ++i) {
    const tt::ConvSpec s = rng.next_spec();
    for (const tt::Layout layout : kLayouts) {
      tt::LayerState st = tt::make_layer(s, layout, tt::ElemType::F32);
      tt::fill_uniform(st.w, static_cast<std::uint32_t>(400 + i));
      tt::Tensor x = rand_act(tt::ElemType::F32, layout, s, 500u + i);
      (void)tt::conv2d_fw(st, x);
      tt::Tensor dy = rand_dy(tt::ElemType::F32, layout, s, 600u + i);
      tt::Tensor dw = tt::conv2d_bw_wg(st, dy);
      const ttest::Grid4 want = ttest::conv_wg_ref(
          ttest::from_act(x), ttest::from_act(dy), s.k_h, s.k_w, s.pad);
      ASSERT_LE(ttest::diff_w(dw, want).max_abs, 1e-4) << s.to_string();
    }
  }
}

TEST(ConvWg, SingleInputChannelFiniteDifferenceCheck) {
  // The C_I = 1 class: transforms dominate there, and the gradient must
  // still match d(loss)/dW from central differences.
  const tt::ConvSpec s{1, 8, 8, 16, 3, 3, 1};
  tt::LayerState st = tt::make_layer(s, tt::Layout::HWC, tt::ElemType::F32);
  tt::fill_uniform(st.w, 81u);
  tt::Tensor x = rand_act(tt::ElemType::F32, tt::Layout::HWC, s, 82u);
  (void)tt::conv2d_fw(st, x);
  tt::Tensor dy = rand_dy(tt::ElemType::F32, tt::Layout::HWC, s, 83u);
  tt::Tensor dw = tt::conv2d_bw_wg(st, dy);
  const ttest::Grid4 fd = ttest::fd_weight_grad(
      ttest::from_w(st.w), ttest::from_act(x), ttest::from_act(dy), s.pad, 1e-3);
  EXPECT_LE(ttest::diff_w(dw, fd).max_rel, 1e-3);
}

TEST(ConvWg, RequiresForwardFirst) {
  tt::LayerState st =
      tt::make_layer(tt::ConvSpec{2, 4, 4, 2, 2, 2, 0}, tt::Layout::HWC,
                     tt::ElemType::F32);
  tt::Tensor dy = rand_dy(tt::ElemType::F32, tt::Layout::HWC, st.spec, 1u);
  EXPECT_THROW(tt::conv2d_bw_wg(st, dy), tt::ConfigError);
}

TEST(ConvWg, TransposedStorageCoherence) {
  // Half-precision HWC keeps W and dW transposed. Untransposing both and
  // replaying the step on the plain binary32 HWC path must reproduce the
  // same logical tensors within half tolerance.
  const tt::ConvSpec s{4, 6, 6, 5, 3, 3, 1};
  tt::LayerState f16_st = tt::make_layer(s, tt::Layout::HWC, tt::ElemType::F16);
  tt::fill_uniform(f16_st.w, 91u);
  ASSERT_TRUE(f16_st.w.transposed());
  tt::Tensor x16 = rand_act(tt::ElemType::F16, tt::Layout::HWC, s, 92u);
  tt::Tensor y16 = tt::conv2d_fw(f16_st, x16);
  tt::Tensor dy16 = rand_dy(tt::ElemType::F16, tt::Layout::HWC, s, 93u);
  tt::Tensor dw16 = tt::conv2d_bw_wg(f16_st, dy16);
  ASSERT_TRUE(dw16.transposed());

  tt::LayerState f32_st = tt::make_layer(s, tt::Layout::HWC, tt::ElemType::F32);
  f32_st.w = tt::convert(tt::weights_as(f16_st.w, tt::Layout::HWC, false),
                         tt::ElemType::F32);
  ASSERT_FALSE(f32_st.w.transposed());
  tt::Tensor y32 = tt::conv2d_fw(f32_st, tt::convert(x16, tt::ElemType::F32));
  tt::Tensor dw32 =
      tt::conv2d_bw_wg(f32_st, tt::convert(dy16, tt::ElemType::F32));

  const ttest::Diff dy_diff = ttest::diff_act(y16, ttest::from_act(y32));
  EXPECT_LE(dy_diff.max_rel, 1e-2);
  const ttest::Diff dw_diff = ttest::diff_w(
      tt::weights_as(dw16, tt::Layout::HWC, false), ttest::from_w(dw32));
  EXPECT_LE(dw_diff.max_rel, 5e-2);  // the WG reduction is long (H*W terms)
}

TEST(Pointwise, EqualsConvAtKernelOne) {
  const tt::ConvSpec s{6, 5, 5, 4, 1, 1, 0};
  for (const tt::Layout layout : kLayouts) {
    for (const tt::ElemType elem : kElems) {
      tt::LayerState a = tt::make_layer(s, layout, elem);
      tt::fill_uniform(a.w, 95u);
      tt::LayerState b = tt::make_layer(s, layout, elem);
      tt::fill_uniform(b.w, 95u);
      tt::Tensor x = rand_act(elem, layout, s, 96u);
      tt::Tensor y_conv = tt::conv2d_fw(a, x);
      tt::Tensor y_pw = tt::pointwise_fw(b, x);
      EXPECT_TRUE(tt::bitwise_equal(y_pw, y_conv));
      tt::Tensor dy = rand_dy(elem, layout, s, 97u);
      EXPECT_TRUE(tt::bitwise_equal(tt::pointwise_bw_ig(b, dy),
                                    tt::conv2d_bw_ig(a, dy)));
      EXPECT_TRUE(tt::bitwise_equal(tt::pointwise_bw_wg(b, dy),
                                    tt::conv2d_bw_wg(a, dy)));
    }
  }
}

TEST(Pointwise, WideChannelShapeMatchesOracle) {
  const tt::ConvSpec s{32, 8, 8, 64, 1, 1, 0};
  tt::LayerState st = tt::make_layer(s, tt::Layout::CHW, tt::ElemType::F32);
  tt::fill_uniform(st.w, 14u);
  tt::Tensor x = rand_act(tt::ElemType::F32, tt::Layout::CHW, s, 15u);
  tt::Tensor y = tt::pointwise_fw(st, x);
  const ttest::Grid3 want =
      ttest::conv_fw_ref(ttest::from_w(st.w), ttest::from_act(x), 0);
  EXPECT_LE(ttest::diff_act(y, want).max_abs, 1e-5);
}

TEST(Pointwise, ChannelIdentityWeightsPassThrough) {
  const tt::ConvSpec s{5, 4, 6, 5, 1, 1, 0};
  for (const tt::Layout layout : kLayouts) {
    tt::LayerState st = tt::make_layer(s, layout, tt::ElemType::F32);
    for (tt::index_t o = 0; o < 5; ++o) {
      for (tt::index_t i = 0; i < 5; ++i) {
        st.w.set_w(o, i, 0, 0, o == i ? 1.0f : 0.0f);
      }
    }
    tt::Tensor x = rand_act(tt::ElemType::F32, layout, s, 17u);
    tt::Tensor y = tt::pointwise_fw(st, x);
    for (tt::index_t c = 0; c < 5; ++c) {
      for (tt::index_t yy = 0; yy < 4; ++yy) {
        for (tt::index_t xx = 0; xx < 6; ++xx) {
          EXPECT_EQ(y.get_act(c, yy, xx), x.get_act(c, yy, xx));
        }
      }
    }
  }
}

TEST(Pointwise, RejectsNonPointwiseSpecs) {
  tt::LayerState st = tt::make_layer(tt::ConvSpec{2, 4, 4, 2, 2, 2, 0},
                                     tt::Layout::HWC, tt::ElemType::F32);
  tt::Tensor x = rand_act(tt::ElemType::F32, tt::Layout::HWC, st.spec, 1u);
  EXPECT_THROW(tt::pointwise_fw(st, x), tt::ConfigError);
}

TEST(Fc, IdentityWeightsPassVectorThrough) {
  tt::LayerState st = tt::make_fc(4, 4, tt::Layout::HWC, tt::ElemType::F32);
  for (tt::index_t o = 0; o < 4; ++o) {
    for (tt::index_t i = 0; i < 4; ++i) st.w.set_w(o, i, 0, 0, o == i ? 1.0f : 0.0f);
  }
  tt::Tensor x = tt::Tensor::activation(tt::ElemType::F32, tt::Layout::HWC, 4, 1, 1);
  tt::fill_uniform(x, 3u);
  tt::Tensor y = tt::fc_fw(st, x);
  for (tt::index_t c = 0; c < 4; ++c) EXPECT_EQ(y.get_act(c, 0, 0), x.get_act(c, 0, 0));
}

TEST(Fc, HandComputedMatrixVectorProduct) {
  // x = [1, 2] against rows [1,0], [0,1], [1,1] gives y = [1, 2, 3].
  tt::LayerState st = tt::make_fc(2, 3, tt::Layout::CHW, tt::ElemType::F32);
  const float rows[3][2] = {{1, 0}, {0, 1}, {1, 1}};
  for (tt::index_t o = 0; o < 3; ++o) {
    for (tt::index_t i = 0; i < 2; ++i) st.w.set_w(o, i, 0, 0, rows[o][i]);
  }
  tt::Tensor x = tt::Tensor::activation(tt::ElemType::F32, tt::Layout::CHW, 2, 1, 1);
  x.set_act(0, 0, 0, 1.0f);
  x.set_act(1, 0, 0, 2.0f);
  tt::Tensor y = tt::fc_fw(st, x);
  EXPECT_EQ(y.get_act(0, 0, 0), 1.0f);
  EXPECT_EQ(y.get_act(1, 0, 0), 2.0f);
  EXPECT_EQ(y.get_act(2, 0, 0), 3.0f);
}

TEST(Fc, WeightGradientIsOuterProduct) {
  tt::LayerState st = tt::make_fc(3, 2, tt::Layout::HWC, tt::ElemType::F32);
  tt::fill_uniform(st.w, 4u);
  tt::Tensor x = tt::Tensor::activation(tt::ElemType::F32, tt::Layout::HWC, 3, 1, 1);
  tt::fill_uniform(x, 5u);
  (void)tt::fc_fw(st, x);
  tt::Tensor dy = tt::Tensor::activation(tt::ElemType::F32, tt::Layout::HWC, 2, 1, 1);
  tt::fill_uniform(dy, 6u);
  tt::Tensor dw = tt::fc_bw_wg(st, dy);
  for (tt::index_t o = 0; o < 2; ++o) {
    for (tt::index_t i = 0; i < 3; ++i) {
      // One pixel means one product per weight: exact equality.
      EXPECT_EQ(dw.get_w(o, i, 0, 0), dy.get_act(o, 0, 0) * x.get_act(i, 0, 0));
    }
  }
  const ttest::Grid4 fd = ttest::fd_weight_grad(
      ttest::from_w(st.w), ttest::from_act(x), ttest::from_act(dy), 0, 1e-3);
  EXPECT_LE(ttest::diff_w(dw, fd).max_rel, 1e-3);
}

TEST(Fc, InputGradientIsTransposedMap) {
  tt::LayerState st = tt::make_fc(3, 2, tt::Layout::CHW, tt::ElemType::F32);
  tt::fill_uniform(st.w, 7u);
  tt::Tensor dy = tt::Tensor::activation(tt::ElemType::F32, tt::Layout::CHW, 2, 1, 1);
  tt::fill_uniform(dy, 8u);
  tt::Tensor dx = tt::fc_bw_ig(st, dy);
  for (tt::index_t i = 0; i < 3; ++i) {
    double want = 0.0;
    for (tt::index_t o = 0; o < 2; ++o) {
      want += static_cast<double>(st.w.get_w(o, i, 0, 0)) *
              static_cast<double>(dy.get_act(o, 0, 0));
    }
    EXPECT_NEAR(dx.get_act(i, 0, 0), want, 1e-6);
  }
}

TEST(Sgd, ZeroRateChangesNothing) {
  tt::Tensor w = tt::Tensor::weights(tt::ElemType::F16, tt::Layout::HWC, 3, 2, 2, 2,
                                     true);
  tt::fill_uniform(w, 9u);
  tt::Tensor before = w.clone();
  tt::Tensor dw = tt::Tensor::weights(tt::ElemType::F16, tt::Layout::HWC, 3, 2, 2, 2,
                                      true);
  tt::fill_uniform(dw, 10u);
  tt::sgd_update(w, dw, 0.0f);
  EXPECT_TRUE(tt::bitwise_equal(w, before));
}

TEST(Sgd, DescendsByRateTimesGradient) {
  tt::Tensor w = tt::Tensor::weights(tt::ElemType::F32, tt::Layout::CHW, 1, 1, 1, 1,
                                     false);
  tt::Tensor dw = w.clone();
  w.set_flat(0, 1.0f);
  dw.set_flat(0, 2.0f);
  tt::sgd_update(w, dw, 0.5f);
  EXPECT_EQ(w.get_flat(0), 0.0f);
}

TEST(Sgd, StorageMismatchThrows) {
  tt::Tensor w = tt::Tensor::weights(tt::ElemType::F32, tt::Layout::HWC, 2, 2, 1, 1,
                                     false);
  tt::Tensor dwt = tt::Tensor::weights(tt::ElemType::F32, tt::Layout::HWC, 2, 2, 1, 1,
                                       true);
  EXPECT_THROW(tt::sgd_update(w, dwt, 0.1f), tt::ConfigError);
}

TEST(Sgd, ConvexToyDescendsMonotonically) {
  // One fully connected output neuron fitting a constant target by least
  // squares: with a safe rate the loss must drop strictly every step.
  tt::LayerState st = tt::make_fc(2, 1, tt::Layout::CHW, tt::ElemType::F32);
  st.w.set_w(0, 0, 0, 0, 0.1f);
  st.w.set_w(0, 1, 0, 0, 0.2f);
  tt::Tensor x = tt::Tensor::activation(tt::ElemType::F32, tt::Layout::CHW, 2, 1, 1);
  x.set_act(0, 0, 0, 1.0f);
  x.set_act(1, 0, 0, -0.5f);
  const float target = 3.0f;
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 20; ++step) {
    tt::Tensor y = tt::fc_fw(st, x);
    const double err = static_cast<double>(y.get_act(0, 0, 0)) - target;
    const double loss = err * err;
    ASSERT_LT(loss, prev) << "step " << step;
    prev = loss;
    tt::Tensor dy =
        tt::Tensor::activation(tt::ElemType::F32, tt::Layout::CHW, 1, 1, 1);
    dy.set_act(0, 0, 0, static_cast<float>(2.0 * err));
    tt::Tensor dw = tt::fc_bw_wg(st, dy);
    tt::sgd_update(st.w, dw, 0.1f);
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(Conv, ShapeGuardsThrow) {
  const tt::ConvSpec s{2, 4, 4, 3, 2, 2, 0};
  tt::LayerState st = tt::make_layer(s, tt::Layout::HWC, tt::ElemType::F32);
  tt::Tensor bad_x =
      tt::Tensor::activation(tt::ElemType::F32, tt::Layout::HWC, 3, 4, 4);
  EXPECT_THROW(tt::conv2d_fw(st, bad_x), tt::ShapeError);
  tt::Tensor wrong_layout =
      tt::Tensor::activation(tt::ElemType::F32, tt::Layout::CHW, 2, 4, 4);
  EXPECT_THROW(tt::conv2d_fw(st, wrong_layout), tt::ConfigError);
  tt::Tensor bad_dy =
      tt::Tensor::activation(tt::ElemType::F32, tt::Layout::HWC, 3, 4, 4);
  EXPECT_THROW(tt::conv2d_bw_ig(st, bad_dy), tt::ShapeError);
  EXPECT_THROW(
      tt::make_layer(s, tt::Layout::HWC, tt::ElemType::F32,
                     tt::KernelVariant::f16_lanes2()),
      tt::ConfigError);
}

}  // namespace
