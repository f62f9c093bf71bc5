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

// Class-wise guided upsampling of aggregated cost features to image
// resolution, shared 1x1 channel reduction to per-class scores, and argmax.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "cafe/aggregator.hpp"
#include "cafe/error.hpp"
#include "cafe/image.hpp"
#include "cafe/nn.hpp"
#include "cafe/ops.hpp"
#include "cafe/tensor.hpp"

namespace cafe {

// Training-free, channel-preserving upsampler: (image H x W, features
// [B, h, w, C]) -> [B, H, W, C]. Implementations hold no trainable state.
template <typename T>
class GuidedUpsampler {
 public:
  virtual ~GuidedUpsampler() = default;
  virtual Tensor<T> upsample(const Image& guide, const Tensor<T>& features) const = 0;
};

struct JointBilateralConfig {
  // Colour-similarity bandwidth in [0, 1] RGB units; <= 0 disables the
  // colour term (pure bilinear-style interpolation).
  double sigma_color = 0.1;
  // Support of the separable tent kernel in low-resolution cells. 1 makes
  // the spatial term exactly bilinear.
  double radius = 1.0;

  bool operator==(const JointBilateralConfig&) const = default;
};

// Each high-resolution pixel is a normalized, non-negative mix of nearby
// low-resolution cells, weighted by a spatial tent kernel times a Gaussian on
// the distance between the pixel's colour and the cell's mean colour.
template <typename T>
class JointBilateralUpsampler final : public GuidedUpsampler<T> {
 public:
  explicit JointBilateralUpsampler(JointBilateralConfig cfg = {}) : cfg_(cfg) {
    if (!(cfg_.radius > 0.0)) throw ConfigError("upsampler radius must be positive");
  }

  const JointBilateralConfig& config() const { return cfg_; }

  std::shared_ptr<const ops::SparseMixPlan<T>> plan(const Image& guide, std::size_t h,
                                                    std::size_t w) const {
    const std::size_t H = guide.height, W = guide.width;
    if (h == 0 || w == 0 || h > H || w > W) {
      throw ShapeError("upsampler: feature grid " + std::to_string(h) + "x" + std::to_string(w) +
                       " larger than guide " + std::to_string(H) + "x" + std::to_string(W));
    }
    // Mean guide colour over each cell's pixel footprint.
    std::vector<double> cell(h * w * 3, 0.0);
    std::vector<double> count(h * w, 0.0);
    for (std::size_t y = 0; y < H; ++y) {
      const std::size_t j = std::min(h - 1, y * h / H);
      for (std::size_t x = 0; x < W; ++x) {
        const std::size_t k = std::min(w - 1, x * w / W);
        for (std::size_t c = 0; c < 3; ++c) cell[(j * w + k) * 3 + c] += guide.at(y, x, c);
        count[j * w + k] += 1.0;
      }
    }
    for (std::size_t i = 0; i < h * w; ++i)
      for (std::size_t c = 0; c < 3; ++c) cell[i * 3 + c] /= std::max(count[i], 1.0);

    const long reach = static_cast<long>(std::ceil(cfg_.radius));
    const std::size_t side = static_cast<std::size_t>(2 * reach + 1);
    auto p = std::make_shared<ops::SparseMixPlan<T>>();
    p->sources = h * w;
    p->outputs = H * W;
    p->taps = side * side;
    p->index.assign(p->outputs * p->taps, 0);
    p->weight.assign(p->outputs * p->taps, T(0));
    const bool use_color = cfg_.sigma_color > 0.0 && std::isfinite(cfg_.sigma_color);
    const double inv2s2 = use_color ? 1.0 / (2.0 * cfg_.sigma_color * cfg_.sigma_color) : 0.0;

    std::vector<double> spatial(p->taps), joint(p->taps);
    std::vector<std::size_t> src(p->taps);
    for (std::size_t y = 0; y < H; ++y) {
      const double sy = source_coord(y, H, h);
      for (std::size_t x = 0; x < W; ++x) {
        const double sx = source_coord(x, W, w);
        const long cy = static_cast<long>(std::floor(sy));
        const long cx = static_cast<long>(std::floor(sx));
        double spatial_sum = 0.0, joint_sum = 0.0;
        std::size_t t = 0;
        for (long dy = -reach; dy <= reach; ++dy) {
          for (long dx = -reach; dx <= reach; ++dx, ++t) {
            const long j = cy + dy, k = cx + dx;
            spatial[t] = joint[t] = 0.0;
            src[t] = 0;
            if (j < 0 || k < 0 || j >= static_cast<long>(h) || k >= static_cast<long>(w)) continue;
            const double wy = tent(static_cast<double>(j) - sy);
            const double wx = tent(static_cast<double>(k) - sx);
            const double ws = wy * wx;
            if (ws <= 0.0) continue;
            src[t] = static_cast<std::size_t>(j) * w + static_cast<std::size_t>(k);
            double wc = 1.0;
            if (use_color) {
              double dist2 = 0.0;
              for (std::size_t c = 0; c < 3; ++c) {
                const double diff = guide.at(y, x, c) - cell[src[t] * 3 + c];
                dist2 += diff * diff;
              }
              wc = std::exp(-dist2 * inv2s2);
            }
            spatial[t] = ws;
            joint[t] = ws * wc;
            spatial_sum += ws;
            joint_sum += ws * wc;
          }
        }
        // Colour weights can all underflow; fall back to the spatial kernel.
        const bool joint_ok = joint_sum > 1e-12;
        const auto& chosen = joint_ok ? joint : spatial;
        const double norm = joint_ok ? joint_sum : spatial_sum;
        const std::size_t o = y * W + x;
        for (std::size_t tt = 0; tt < p->taps; ++tt) {
          p->index[o * p->taps + tt] = src[tt];
          p->weight[o * p->taps + tt] = static_cast<T>(chosen[tt] / norm);
        }
      }
    }
    return p;
  }

  Tensor<T> upsample(const Image& guide, const Tensor<T>& features) const override {
    if (features.rank() != 4) throw ShapeError("upsampler expects [B, h, w, C] features");
    const std::size_t b = features.dim(0), h = features.dim(1), w = features.dim(2),
                      c = features.dim(3);
    auto pl = plan(guide, h, w);
    return ops::sparse_mix(features, pl, c).reshape({b, guide.height, guide.width, c});
  }

 private:
  // Half-pixel-centred source position, clamped into the grid.
  static double source_coord(std::size_t out_i, std::size_t out_n, std::size_t in_n) {
    const double s = (static_cast<double>(out_i) + 0.5) * static_cast<double>(in_n) /
                         static_cast<double>(out_n) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in_n - 1));
  }

  double tent(double d) const { return std::max(0.0, 1.0 - std::abs(d) / cfg_.radius); }

  JointBilateralConfig cfg_;
};

// V_up(i) = U(image, v[:, :, i, :]) for every class at once: [M, H, W, d].
template <typename T>
Tensor<T> upsample_classwise(const Image& image, const ProjectedCostVolume<T>& v,
                             const GuidedUpsampler<T>& up) {
  if (image.height < v.height || image.width < v.width) {
    throw ShapeError("upsample: image is smaller than the feature grid");
  }
  Tensor<T> out = up.upsample(image, v.values.reshape({v.classes, v.height, v.width, v.channels}));
  const Shape want{v.classes, image.height, image.width, v.channels};
  if (out.shape() != want) {
    throw ContractError("guided upsampler returned " + shape_str(out.shape()) + ", expected " +
                        shape_str(want));
  }
  return out;
}

// 1x1 convolution d_agg -> 1 with weights shared across classes.
template <typename T>
struct ReductionHead {
  Linear<T> conv;

  static ReductionHead make(std::size_t channels, Rng& rng) {
    return {Linear<T>::make(channels, 1, 1.0 / std::sqrt(static_cast<double>(channels)), rng)};
  }

  // [..., d] -> [...]
  Tensor<T> operator()(const Tensor<T>& features) const {
    Shape s = features.shape();
    s.pop_back();
    return conv(features).reshape(s);
  }

  void collect(ParamList<T>& out) const { conv.collect("head.reduce", ParamGroup::kHead, out); }
};

template <typename T>
Tensor<T> reduce_channels(const Tensor<T>& feature_map, const ReductionHead<T>& head) {
  return head(feature_map);
}

// Per-pixel class scores, class-major [M, H, W].
template <typename T>
struct ScoreMaps {
  Tensor<T> values;
  std::size_t classes = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  T at(std::size_t i, std::size_t y, std::size_t x) const {
    return values.values()[(i * height + y) * width + x];
  }
};

enum class ReduceOrder { kReduceAfterUp, kReduceBeforeUp };

inline const char* reduce_order_name(ReduceOrder o) {
  return o == ReduceOrder::kReduceAfterUp ? "reduce_after_up" : "reduce_before_up";
}

template <typename T>
ScoreMaps<T> score_maps(const Image& image, const ProjectedCostVolume<T>& v,
                        const GuidedUpsampler<T>& up, const ReductionHead<T>& head,
                        ReduceOrder order) {
  Tensor<T> scores;
  if (order == ReduceOrder::kReduceAfterUp) {
    scores = head(upsample_classwise(image, v, up));
  } else {
    Tensor<T> reduced = head(v.values).reshape({v.classes, v.height, v.width, 1});
    scores = upsample_classwise(image, ProjectedCostVolume<T>{reduced, v.classes, v.height, v.width, 1}, up);
  }
  return {scores.reshape({v.classes, image.height, image.width}), v.classes, image.height, image.width};
}

// Argmax over the class axis of class-major scores; ties go to the lowest
// class index.
template <typename T>
SegmentationMask argmax_classes(const std::vector<T>& scores, std::size_t classes,
                                std::size_t height, std::size_t width) {
  if (scores.size() != classes * height * width) throw ShapeError("argmax: size mismatch");
  SegmentationMask mask(height, width);
  const std::size_t plane = height * width;
  for (std::size_t p = 0; p < plane; ++p) {
    std::size_t best = 0;
    T best_v = scores[p];
    for (std::size_t i = 1; i < classes; ++i) {
      if (scores[i * plane + p] > best_v) {
        best_v = scores[i * plane + p];
        best = i;
      }
    }
    mask.labels[p] = static_cast<int>(best);
  }
  return mask;
}

template <typename T>
SegmentationMask argmax_classes(const ScoreMaps<T>& s) {
  return argmax_classes(s.values.values(), s.classes, s.height, s.width);
}

template <typename T>
SegmentationMask predict(const Image& image, const ProjectedCostVolume<T>& v,
                         const GuidedUpsampler<T>& up, const ReductionHead<T>& head,
                         ReduceOrder order = ReduceOrder::kReduceAfterUp) {
  return argmax_classes(score_maps(image, v, up, head, order));
}

}  // namespace cafe
