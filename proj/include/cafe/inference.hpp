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

// Full-image prediction: resize to the evaluation size, tile with
// overlapping windows, average overlapping scores, argmax, resize back.

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "cafe/error.hpp"
#include "cafe/image.hpp"
#include "cafe/model.hpp"
#include "cafe/upsample_head.hpp"

namespace cafe {

struct SlidingWindowConfig {
  std::size_t eval_resolution = 512;  // 0 keeps the input size
  std::size_t window = 224;
  std::size_t stride = 112;

  void validate() const {
    if (window == 0) throw ConfigError("sliding window: window must be positive");
    if (eval_resolution != 0 && window > eval_resolution) {
      throw ConfigError("sliding window: window " + std::to_string(window) + " exceeds eval_resolution " +
                        std::to_string(eval_resolution));
    }
    if (stride < 1 || stride > window) {
      throw ConfigError("sliding window: stride must lie in [1, window]");
    }
  }
};

inline std::vector<std::size_t> window_positions(std::size_t extent, std::size_t window, std::size_t stride) {
  if (window > extent) throw ValidationError("window_positions: window larger than extent");
  if (stride == 0) throw ValidationError("window_positions: stride must be positive");
  std::vector<std::size_t> out;
  const std::size_t last = extent - window;
  for (std::size_t p = 0;; p += stride) {
    const std::size_t q = std::min(p, last);
    if (out.empty() || out.back() != q) out.push_back(q);
    if (q == last) break;
  }
  return out;
}

// Class-major scores for one image: values [M * height * width].
template <typename T>
struct DenseScores {
  std::vector<T> values;
  std::size_t classes = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

template <typename T>
using ScoreFunction = std::function<DenseScores<T>(const Image&)>;

template <typename T>
struct SlidingWindowResult {
  SegmentationMask mask;        // original resolution
  DenseScores<T> merged;        // evaluation resolution, before argmax
  std::vector<int> coverage;    // windows covering each evaluation pixel
};

template <typename T>
SlidingWindowResult<T> predict_full_detailed(const Image& image, const ScoreFunction<T>& score,
                                             const SlidingWindowConfig& cfg) {
  cfg.validate();
  if (image.empty()) throw ValidationError("predict_full: empty image");
  const Image resized =
      cfg.eval_resolution ? resize_bilinear(image, cfg.eval_resolution, cfg.eval_resolution) : image;
  std::size_t off_y = 0, off_x = 0;
  const Image padded = reflect_pad_to(resized, cfg.window, cfg.window, off_y, off_x);
  const std::size_t H = padded.height, W = padded.width;

  const auto ys = window_positions(H, cfg.window, cfg.stride);
  const auto xs = window_positions(W, cfg.window, cfg.stride);
  std::vector<T> sum;
  std::vector<int> count(H * W, 0);
  std::size_t classes = 0;
  for (std::size_t y0 : ys) {
    for (std::size_t x0 : xs) {
      const DenseScores<T> s = score(crop(padded, y0, x0, cfg.window, cfg.window));
      if (s.height != cfg.window || s.width != cfg.window || s.values.size() != s.classes * s.height * s.width) {
        throw ContractError("predict_full: score function returned a wrongly shaped map");
      }
      if (sum.empty()) {
        classes = s.classes;
        sum.assign(classes * H * W, T(0));
      } else if (s.classes != classes) {
        throw ContractError("predict_full: class count changed between windows");
      }
      for (std::size_t i = 0; i < classes; ++i) {
        for (std::size_t y = 0; y < cfg.window; ++y) {
          const T* src = &s.values[(i * cfg.window + y) * cfg.window];
          T* dst = &sum[(i * H + y0 + y) * W + x0];
          for (std::size_t x = 0; x < cfg.window; ++x) dst[x] += src[x];
        }
      }
      for (std::size_t y = 0; y < cfg.window; ++y) {
        for (std::size_t x = 0; x < cfg.window; ++x) ++count[(y0 + y) * W + x0 + x];
      }
    }
  }

  SlidingWindowResult<T> r;
  const std::size_t h = resized.height, w = resized.width;
  r.merged = {std::vector<T>(classes * h * w), classes, h, w};
  r.coverage.resize(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = (y + off_y) * W + x + off_x;
      r.coverage[y * w + x] = count[p];
      for (std::size_t i = 0; i < classes; ++i) {
        r.merged.values[(i * h + y) * w + x] = sum[i * H * W + p] / static_cast<T>(count[p]);
      }
    }
  }
  r.mask = resize_nearest(argmax_classes(r.merged.values, classes, h, w), image.height, image.width);
  return r;
}

template <typename T>
SegmentationMask predict_full(const Image& image, const ScoreFunction<T>& score, const SlidingWindowConfig& cfg) {
  return predict_full_detailed(image, score, cfg).mask;
}

// Score function of a model for a fixed set of class embeddings.
template <typename T>
ScoreFunction<T> model_scorer(const CafeModel<T>& model, Tensor<T> embeddings) {
  return [&model, embeddings](const Image& img) {
    NoGradGuard guard;
    const ScoreMaps<T> s = model.scores(img, embeddings);
    return DenseScores<T>{s.values.values(), s.classes, s.height, s.width};
  };
}

template <typename T>
SegmentationMask predict_full(const Image& image, const CafeModel<T>& model, const Tensor<T>& embeddings,
                              const SlidingWindowConfig& cfg) {
  return predict_full(image, model_scorer(model, embeddings), cfg);
}

}  // namespace cafe
