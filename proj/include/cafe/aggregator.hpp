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
#pragma once

// Cost aggregation network: a shared-weight class-wise projection lifts each
// cost map to d_agg channels, then every aggregation block runs a Swin
// window-attention pair on each class slice independently followed by
// per-pixel attention across classes.
//
// Volumes are stored class-major as [M, h, w, d_agg]; ProjectedCostVolume::at
// exposes the (j, k, i, c) view.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "cafe/cost_volume.hpp"
#include "cafe/error.hpp"
#include "cafe/layout.hpp"
#include "cafe/nn.hpp"
#include "cafe/ops.hpp"
#include "cafe/tensor.hpp"

namespace cafe {

enum class AttentionVariant { kFull, kLinear };

inline const char* attention_variant_name(AttentionVariant v) {
  return v == AttentionVariant::kFull ? "full" : "linear";
}

struct AggregatorConfig {
  std::size_t d_agg = 128;
  std::size_t num_blocks = 6;
  std::size_t window_size = 7;
  std::size_t num_heads = 4;
  std::size_t mlp_ratio = 4;
  AttentionVariant attention_variant = AttentionVariant::kFull;
  bool shift_second = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_blocks < 1) throw ConfigError("aggregator: num_blocks must be >= 1");
    if (d_agg == 0) throw ConfigError("aggregator: d_agg must be positive");
    if (window_size == 0) throw ConfigError("aggregator: window_size must be positive");
    if (num_heads == 0 || d_agg % num_heads != 0) {
      throw ConfigError("aggregator: d_agg must be divisible by num_heads");
    }
    if (mlp_ratio == 0) throw ConfigError("aggregator: mlp_ratio must be positive");
  }

  bool operator==(const AggregatorConfig&) const = default;
};

template <typename T>
struct ProjectedCostVolume {
  Tensor<T> values;  // [M, h, w, d]
  std::size_t classes = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  T at(std::size_t j, std::size_t k, std::size_t i, std::size_t c) const {
    return values.values()[((i * height + j) * width + k) * channels + c];
  }
  // Number of activation elements held by the volume.
  std::size_t element_count() const { return values.numel(); }
};

namespace detail {

template <typename T>
constexpr T attention_mask_value() {
  return static_cast<T>(-1e30);
}

// Multi-head scaled dot-product or linearized attention over groups of
// tokens. x: [G, n, D] -> [G, n, D] (before the output projection).
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& qkv, std::size_t groups, std::size_t tokens,
                               std::size_t heads, std::size_t head_dim, AttentionVariant variant,
                               const Tensor<T>& bias, const Tensor<T>& mask) {
  Tensor<T> q = layout::apply(qkv, layout::split_heads(groups, tokens, heads, head_dim, 0));
  Tensor<T> k = layout::apply(qkv, layout::split_heads(groups, tokens, heads, head_dim, 1));
  Tensor<T> v = layout::apply(qkv, layout::split_heads(groups, tokens, heads, head_dim, 2));
  Tensor<T> out;
  if (variant == AttentionVariant::kFull) {
    Tensor<T> scores = ops::scale(ops::bmm(q, k, true), T(1) / std::sqrt(T(head_dim)));
    if (bias.defined()) scores = ops::add_broadcast(scores, bias);
    if (mask.defined()) scores = ops::add_broadcast(scores, mask);
    out = ops::bmm(ops::softmax_last(scores), v);
  } else {
    // phi(q) (phi(k)^T v) / (phi(q) . sum_j phi(k_j)), phi = elu + 1.
    const std::size_t b = groups * heads;
    Tensor<T> fq = ops::elu_plus_one(q);
    Tensor<T> fk = ops::elu_plus_one(k);
    Tensor<T> fk_t = layout::apply(fk, layout::permute({b, tokens, head_dim}, {0, 2, 1}));
    Tensor<T> kv = ops::bmm(fk_t, v);  // [b, dh, dh]
    Tensor<T> numer = ops::bmm(fq, kv);  // [b, n, dh]
    Tensor<T> ones = Tensor<T>::full({b, 1, tokens}, T(1));
    Tensor<T> ksum = ops::bmm(ones, fk);  // [b, 1, dh]
    Tensor<T> denom = ops::bmm(fq, ksum, true);  // [b, n, 1]
    out = ops::div_rows(numer, denom);
  }
  return layout::apply(out, layout::merge_heads(groups, tokens, heads, head_dim));
}

}  // namespace detail

template <typename T>
struct WindowAttention {
  Linear<T> qkv;
  Linear<T> proj;
  Tensor<T> relative_bias;  // [(2w-1)^2, heads]

  void collect(const std::string& prefix, ParamList<T>& out) const {
    qkv.collect(prefix + ".qkv", ParamGroup::kHead, out);
    proj.collect(prefix + ".proj", ParamGroup::kHead, out);
    out.push_back({prefix + ".relative_bias", relative_bias, ParamGroup::kHead});
  }
};

template <typename T>
struct SwinBlock {
  LayerNorm<T> norm1;
  WindowAttention<T> attn;
  LayerNorm<T> norm2;
  Mlp<T> mlp;
  bool shifted = false;

  void collect(const std::string& prefix, ParamList<T>& out) const {
    norm1.collect(prefix + ".norm1", ParamGroup::kHead, out);
    attn.collect(prefix + ".attn", out);
    norm2.collect(prefix + ".norm2", ParamGroup::kHead, out);
    mlp.collect(prefix + ".mlp", ParamGroup::kHead, out);
  }
};

template <typename T>
struct ClassAttentionBlock {
  LayerNorm<T> norm1;
  Linear<T> qkv;
  Linear<T> proj;
  LayerNorm<T> norm2;
  Mlp<T> mlp;

  void collect(const std::string& prefix, ParamList<T>& out) const {
    norm1.collect(prefix + ".norm1", ParamGroup::kHead, out);
    qkv.collect(prefix + ".qkv", ParamGroup::kHead, out);
    proj.collect(prefix + ".proj", ParamGroup::kHead, out);
    norm2.collect(prefix + ".norm2", ParamGroup::kHead, out);
    mlp.collect(prefix + ".mlp", ParamGroup::kHead, out);
  }
};

template <typename T>
struct AggregationBlock {
  SwinBlock<T> swin[2];
  ClassAttentionBlock<T> class_attn;
};

template <typename T>
class Aggregator {
 public:
  explicit Aggregator(AggregatorConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed ^ 0x41474752ULL);
    const std::size_t d = cfg_.d_agg;
    const std::size_t hidden = d * cfg_.mlp_ratio;
    conv1_ = Linear<T>::make(9, d, std::sqrt(2.0 / 9.0), rng);
    conv2_ = Linear<T>::make(9 * d, d, std::sqrt(2.0 / (9.0 * static_cast<double>(d))), rng);
    const std::size_t span = 2 * cfg_.window_size - 1;
    for (std::size_t b = 0; b < cfg_.num_blocks; ++b) {
      AggregationBlock<T> block;
      for (std::size_t s = 0; s < 2; ++s) {
        auto& sw = block.swin[s];
        sw.norm1 = LayerNorm<T>::make(d);
        sw.attn.qkv = Linear<T>::make(d, 3 * d, 0.02, rng);
        sw.attn.proj = Linear<T>::make(d, d, 0.02, rng);
        sw.attn.relative_bias = normal_param<T>({span * span, cfg_.num_heads}, 0.02, rng);
        sw.norm2 = LayerNorm<T>::make(d);
        sw.mlp = Mlp<T>::make(d, hidden, rng);
        sw.shifted = (s == 1) && cfg_.shift_second;
      }
      auto& ca = block.class_attn;
      ca.norm1 = LayerNorm<T>::make(d);
      ca.qkv = Linear<T>::make(d, 3 * d, 0.02, rng);
      ca.proj = Linear<T>::make(d, d, 0.02, rng);
      ca.norm2 = LayerNorm<T>::make(d);
      ca.mlp = Mlp<T>::make(d, hidden, rng);
      blocks_.push_back(std::move(block));
    }
  }

  const AggregatorConfig& config() const { return cfg_; }
  std::vector<AggregationBlock<T>>& blocks() { return blocks_; }
  const std::vector<AggregationBlock<T>>& blocks() const { return blocks_; }
  Linear<T>& conv1() { return conv1_; }
  Linear<T>& conv2() { return conv2_; }

  void collect(ParamList<T>& out) const {
    conv1_.collect("agg.proj.conv1", ParamGroup::kHead, out);
    conv2_.collect("agg.proj.conv2", ParamGroup::kHead, out);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const std::string p = "agg.block" + std::to_string(b);
      blocks_[b].swin[0].collect(p + ".swin0", out);
      blocks_[b].swin[1].collect(p + ".swin1", out);
      blocks_[b].class_attn.collect(p + ".class", out);
    }
  }

  // Two same-padded 3x3 convolutions (1 -> d -> d) with GELU between, the
  // same weights for every class slice.
  ProjectedCostVolume<T> project_classwise(const CostVolume<T>& v) const {
    const std::size_t m = v.classes, h = v.height, w = v.width, d = cfg_.d_agg;
    Tensor<T> slices = layout::apply(v.values.reshape({h, w, m}), layout::permute({h, w, m}, {2, 0, 1}))
                           .reshape({m, h, w, 1});
    Tensor<T> x = conv1_(layout::apply(slices, layout::im2col3x3(m, h, w, 1)));
    x = ops::gelu(x).reshape({m, h, w, d});
    x = conv2_(layout::apply(x, layout::im2col3x3(m, h, w, d))).reshape({m, h, w, d});
    return {x, m, h, w, d};
  }

  // Shift actually applied by a block: none when one window covers the grid.
  std::size_t effective_shift(const SwinBlock<T>& block, std::size_t h, std::size_t w) const {
    if (!block.shifted) return 0;
    if (h <= cfg_.window_size && w <= cfg_.window_size) return 0;
    return cfg_.window_size / 2;
  }

  // One Swin block on every class slice independently.
  Tensor<T> swin_forward(const SwinBlock<T>& block, const Tensor<T>& x, std::size_t m,
                         std::size_t h, std::size_t w) const {
    const std::size_t d = cfg_.d_agg, heads = cfg_.num_heads, dh = d / heads;
    const auto geom = layout::window_geometry(h, w, cfg_.window_size, effective_shift(block, h, w));
    const std::size_t groups = m * geom.num_windows();
    const std::size_t n = geom.tokens();

    Tensor<T> windows = layout::apply(block.norm1(x), layout::partition_windows(m, geom, d));
    Tensor<T> qkv = block.attn.qkv(windows);
    Tensor<T> bias = layout::apply(block.attn.relative_bias,
                                   layout::relative_position_bias(cfg_.window_size, heads));
    Tensor<T> mask;
    if (geom.shift) {
      const auto base = layout::shifted_window_mask(geom, detail::attention_mask_value<T>());
      std::vector<T> expanded;
      expanded.reserve(geom.num_windows() * heads * n * n);
      for (std::size_t win = 0; win < geom.num_windows(); ++win)
        for (std::size_t hd = 0; hd < heads; ++hd)
          expanded.insert(expanded.end(), base.begin() + win * n * n, base.begin() + (win + 1) * n * n);
      mask = Tensor<T>({geom.num_windows(), heads, n, n}, std::move(expanded));
    }
    Tensor<T> attn = detail::multi_head_attention(qkv, groups, n, heads, dh, AttentionVariant::kFull,
                                                  bias, mask);
    Tensor<T> back = layout::apply(block.attn.proj(attn), layout::merge_windows(m, geom, d));
    Tensor<T> y = ops::add(x, back);
    return ops::add(y, block.mlp(block.norm2(y)));
  }

  // Swin pair on each class slice; slices never exchange information.
  ProjectedCostVolume<T> spatial_aggregate(const AggregationBlock<T>& block,
                                           const ProjectedCostVolume<T>& v) const {
    Tensor<T> x = swin_forward(block.swin[0], v.values, v.classes, v.height, v.width);
    x = swin_forward(block.swin[1], x, v.classes, v.height, v.width);
    return {x, v.classes, v.height, v.width, v.channels};
  }

  // Attention over the M class tokens of each pixel, without positional
  // encoding, then a per-token MLP. Both residual.
  ProjectedCostVolume<T> class_attend(const AggregationBlock<T>& block,
                                      const ProjectedCostVolume<T>& v) const {
    const std::size_t m = v.classes, h = v.height, w = v.width, d = v.channels;
    const std::size_t heads = cfg_.num_heads, dh = d / heads;
    const auto& ca = block.class_attn;
    Tensor<T> pixels = layout::apply(v.values, layout::permute({m, h, w, d}, {1, 2, 0, 3}))
                           .reshape({h * w, m, d});
    Tensor<T> qkv = ca.qkv(ca.norm1(pixels));
    Tensor<T> attn = detail::multi_head_attention(qkv, h * w, m, heads, dh, cfg_.attention_variant,
                                                  Tensor<T>(), Tensor<T>());
    Tensor<T> back = layout::apply(ca.proj(attn).reshape({h, w, m, d}),
                                   layout::permute({h, w, m, d}, {2, 0, 1, 3}));
    Tensor<T> y = ops::add(v.values, back);
    y = ops::add(y, ca.mlp(ca.norm2(y)));
    return {y, m, h, w, d};
  }

  ProjectedCostVolume<T> aggregate(const CostVolume<T>& v) const {
    ProjectedCostVolume<T> x = project_classwise(v);
    for (const auto& block : blocks_) {
      x = spatial_aggregate(block, x);
      x = class_attend(block, x);
    }
    return x;
  }

  // Zeroes every attention output projection and MLP output layer, turning
  // each block into the identity map.
  void zero_residual_branches() {
    for (auto& block : blocks_) {
      for (auto& sw : block.swin) {
        sw.attn.proj.zero();
        sw.mlp.fc2.zero();
      }
      block.class_attn.proj.zero();
      block.class_attn.mlp.fc2.zero();
    }
  }

 private:
  AggregatorConfig cfg_;
  Linear<T> conv1_;
  Linear<T> conv2_;
  std::vector<AggregationBlock<T>> blocks_;
};

}  // namespace cafe
