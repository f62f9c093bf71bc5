/* Copyright 2026 The CAFe Segmentation Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cafe/layout.hpp"
#include "cafe/ops.hpp"
#include "test_util.hpp"

namespace cafe {
namespace {

using testing::check_gradients;
using testing::random_tensor;

TEST(Tensor, RejectsMismatchedShape) {
  EXPECT_THROW(Tensor<float>({2, 3}, std::vector<float>(5)), ShapeError);
}

TEST(Tensor, BackwardAccumulatesThroughSharedInputs) {
  Tensor<double> x({2}, {1.5, -2.0}, true);
  Tensor<double> y = ops::sum_all(ops::mul(x, x));
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -4.0);
}

TEST(Tensor, NoGradGuardSkipsGraph) {
  Tensor<double> x({2}, {1.0, 2.0}, true);
  NoGradGuard guard;
  Tensor<double> y = ops::sum_all(x);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Ops, LinearMatchesLoop) {
  Rng rng(1);
  auto x = random_tensor<double>({3, 4}, rng);
  auto w = random_tensor<double>({2, 4}, rng);
  auto b = random_tensor<double>({2}, rng);
  auto y = ops::linear(x, w, b);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t o = 0; o < 2; ++o) {
      double acc = b.values()[o];
      for (std::size_t i = 0; i < 4; ++i) acc += x.values()[r * 4 + i] * w.values()[o * 4 + i];
      EXPECT_NEAR(y.values()[r * 2 + o], acc, 1e-12);
    }
}

TEST(Ops, BmmTransposeMatchesLoop) {
  Rng rng(2);
  auto a = random_tensor<double>({2, 3, 4}, rng);
  auto b = random_tensor<double>({2, 5, 4}, rng);
  auto c = ops::bmm(a, b, true);
  ASSERT_EQ(c.shape(), (Shape{2, 3, 5}));
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        double acc = 0;
        for (std::size_t k = 0; k < 4; ++k) acc += a.values()[(s * 3 + i) * 4 + k] * b.values()[(s * 5 + j) * 4 + k];
        EXPECT_NEAR(c.values()[(s * 3 + i) * 5 + j], acc, 1e-12);
      }
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(3);
  auto x = random_tensor<double>({4, 6}, rng, 5.0);
  auto y = ops::softmax_last(x);
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 6; ++c) s += y.values()[r * 6 + c];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ops, LayerNormStandardizes) {
  Rng rng(4);
  auto x = random_tensor<double>({3, 8}, rng, 3.0);
  auto y = ops::layer_norm(x, Tensor<double>::full({8}, 1.0), Tensor<double>::zeros({8}));
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < 8; ++c) mean += y.values()[r * 8 + c] / 8;
    for (std::size_t c = 0; c < 8; ++c) var += std::pow(y.values()[r * 8 + c] - mean, 2) / 8;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-3);
  }
}

TEST(Ops, L2NormalizeRejectsZeroRow) {
  Tensor<double> x({2, 2}, {1.0, 0.0, 0.0, 0.0});
  EXPECT_THROW(ops::l2_normalize_last(x), DegenerateError);
}

TEST(Ops, CrossEntropyUniformScoresGiveLogM) {
  auto labels = std::make_shared<const std::vector<int>>(std::vector<int>{0, 2, 1, 2});
  auto l = ops::cross_entropy(Tensor<double>::zeros({3, 4}), labels, 255);
  EXPECT_NEAR(l.item(), std::log(3.0), 1e-15);
}

TEST(Ops, CrossEntropyAllIgnoredIsZero) {
  auto labels = std::make_shared<const std::vector<int>>(std::vector<int>{255, 255});
  Tensor<double> s({2, 2}, {1, 2, 3, 4}, true);
  auto l = ops::cross_entropy(s, labels, 255);
  EXPECT_EQ(l.item(), 0.0);
}

// Every differentiable op against central differences on a random input.
TEST(Ops, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  auto x = random_tensor<double>({2, 3, 4}, rng, 1.0, true);
  auto w = random_tensor<double>({5, 4}, rng, 1.0, true);
  auto b = random_tensor<double>({5}, rng, 1.0, true);
  auto g = random_tensor<double>({5}, rng, 1.0, true);
  auto beta = random_tensor<double>({5}, rng, 1.0, true);
  auto y = random_tensor<double>({2, 4, 5}, rng, 1.0, true);
  auto weights = random_tensor<double>({2 * 3 * 5}, rng);
  auto simple = [&] {
    auto h = ops::layer_norm(ops::gelu(ops::linear(x, w, b)), g, beta);
    auto att = ops::softmax_last(ops::bmm(h, y, true));
    auto z = ops::add(ops::bmm(att, y), ops::elu_plus_one(h));
    z = ops::l2_normalize_last(ops::sub(z, ops::scale(h, 0.3)));
    return ops::sum_all(ops::mul(z.reshape({30}), weights));
  };
  auto r = check_gradients({{"x", x}, {"w", w}, {"b", b}, {"g", g}, {"beta", beta}, {"y", y}}, simple);
  EXPECT_LT(r.max_rel_error, 1e-5) << r.worst;
}

TEST(Ops, DivRowsAndMeanRowsGradients) {
  Rng rng(6);
  auto a = random_tensor<double>({2, 3, 4}, rng, 1.0, true);
  auto d = Tensor<double>({2, 3, 1}, {1.5, 2.0, 0.7, 1.1, 3.0, 0.9}, true);
  auto weights = random_tensor<double>({4}, rng);
  auto loss = [&] {
    auto q = ops::div_rows(a, d).reshape({6, 4});
    return ops::sum_all(ops::mul(ops::mean_rows(q), weights));
  };
  auto r = check_gradients({{"a", a}, {"d", d}}, loss);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Ops, CrossEntropyGradientMatchesFiniteDifferences) {
  Rng rng(7);
  auto s = random_tensor<double>({3, 4}, rng, 2.0, true);
  auto labels = std::make_shared<const std::vector<int>>(std::vector<int>{2, 255, 0, 1});
  auto r = check_gradients({{"s", s}}, [&] { return ops::cross_entropy(s, labels, 255); });
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Ops, SparseMixAndGatherGradients) {
  Rng rng(8);
  auto x = random_tensor<double>({2, 3, 2}, rng, 1.0, true);
  auto mutable_plan = std::make_shared<ops::SparseMixPlan<double>>();
  auto& plan_ref = *mutable_plan;
  plan_ref.sources = 3;
  plan_ref.outputs = 4;
  plan_ref.taps = 2;
  plan_ref.index = {0, 1, 1, 2, 2, 0, 0, 0};
  plan_ref.weight = {0.25, 0.75, 0.5, 0.5, 1.0, 0.0, 0.6, 0.4};
  std::shared_ptr<const ops::SparseMixPlan<double>> plan = mutable_plan;
  auto map = std::make_shared<const std::vector<ops::Index>>(std::vector<ops::Index>{3, -1, 0, 5, 5, 11});
  auto weights = random_tensor<double>({16}, rng);
  auto loss = [&] {
    auto m = ops::sparse_mix(x, plan, 2).reshape({16});
    auto g = ops::gather(x, {6}, map);
    return ops::add(ops::sum_all(ops::mul(m, weights)), ops::sum_all(ops::mul(g, g)));
  };
  auto r = check_gradients({{"x", x}}, loss);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Layout, PermuteMatchesIndexing) {
  Rng rng(9);
  auto x = random_tensor<double>({2, 3, 4}, rng);
  auto y = layout::apply(x, layout::permute({2, 3, 4}, {2, 0, 1}));
  ASSERT_EQ(y.shape(), (Shape{4, 2, 3}));
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t c = 0; c < 4; ++c)
        EXPECT_EQ(y.values()[(c * 2 + a) * 3 + b], x.values()[(a * 3 + b) * 4 + c]);
}

TEST(Layout, Im2colConvolutionMatchesDirectLoop) {
  Rng rng(10);
  const std::size_t B = 2, H = 3, W = 4, C = 2, O = 3;
  auto x = random_tensor<double>({B, H, W, C}, rng);
  auto w = random_tensor<double>({O, 9 * C}, rng);
  auto y = ops::linear(layout::apply(x, layout::im2col3x3(B, H, W, C)), w, Tensor<double>());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j)
        for (std::size_t o = 0; o < O; ++o) {
          double acc = 0;
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int yy = static_cast<int>(i) + ky - 1, xx = static_cast<int>(j) + kx - 1;
              if (yy < 0 || xx < 0 || yy >= int(H) || xx >= int(W)) continue;
              for (std::size_t c = 0; c < C; ++c)
                acc += w.values()[o * 9 * C + (ky * 3 + kx) * C + c] *
                       x.values()[((b * H + yy) * W + xx) * C + c];
            }
          EXPECT_NEAR(y.values()[((b * H + i) * W + j) * O + o], acc, 1e-12);
        }
}

class WindowRoundTrip : public ::testing::TestWithParam<std::tuple<int, int, int, int>> {};

TEST_P(WindowRoundTrip, PartitionThenMergeIsIdentity) {
  const auto [h, w, win, shift] = GetParam();
  Rng rng(11);
  auto x = random_tensor<double>({2, std::size_t(h), std::size_t(w), 3}, rng);
  const auto g = layout::window_geometry(h, w, win, shift);
  auto parts = layout::apply(x, layout::partition_windows(2, g, 3));
  EXPECT_EQ(parts.dim(0), 2 * g.num_windows());
  auto back = layout::apply(parts, layout::merge_windows(2, g, 3));
  EXPECT_EQ(back.values(), x.values());
}

INSTANTIATE_TEST_SUITE_P(Grids, WindowRoundTrip,
                         ::testing::Values(std::make_tuple(4, 4, 2, 0), std::make_tuple(4, 4, 2, 1),
                                           std::make_tuple(5, 7, 3, 1), std::make_tuple(6, 6, 3, 1),
                                           std::make_tuple(2, 3, 4, 0), std::make_tuple(8, 8, 4, 2)));

TEST(Layout, ShiftedMaskBlocksOnlyAcrossRegions) {
  const auto g = layout::window_geometry(4, 4, 2, 1);
  const auto mask = layout::shifted_window_mask<double>(g, -1.0);
  // The first window lies entirely in region (0, 0): no masking.
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(mask[i], 0.0);
  // The last window straddles four regions: each token sees only itself.
  const std::size_t last = 3 * 16;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(mask[last + i * 4 + j], i == j ? 0.0 : -1.0);
}

TEST(Layout, RelativeBiasIndexDependsOnOffsetOnly) {
  const std::size_t win = 3;
  const auto g = layout::relative_position_bias(win, 1);
  const auto& m = *g.map;
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j)
      for (std::size_t k = 0; k < 9; ++k)
        for (std::size_t l = 0; l < 9; ++l) {
          const bool same_offset = (long(i / 3) - long(j / 3) == long(k / 3) - long(l / 3)) &&
                                   (long(i % 3) - long(j % 3) == long(k % 3) - long(l % 3));
          EXPECT_EQ(m[i * 9 + j] == m[k * 9 + l], same_offset);
        }
}

}  // namespace
}  // namespace cafe
