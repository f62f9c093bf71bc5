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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cafe/error.hpp"

namespace cafe {

inline constexpr int kIgnoreLabel = 255;

// Interleaved RGB image, row-major, channel values nominally in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> rgb;  // height * width * 3

  Image() = default;
  Image(std::size_t h, std::size_t w, float fill = 0.f) : height(h), width(w), rgb(h * w * 3, fill) {}

  float& at(std::size_t y, std::size_t x, std::size_t c) { return rgb[(y * width + x) * 3 + c]; }
  float at(std::size_t y, std::size_t x, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }
  bool empty() const { return height == 0 || width == 0; }
  bool operator==(const Image&) const = default;
};

// Integer label map; `ignore_label` marks pixels excluded from loss and metrics.
struct SegmentationMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<int> labels;
  int ignore_label = kIgnoreLabel;

  SegmentationMask() = default;
  SegmentationMask(std::size_t h, std::size_t w, int fill = 0)
      : height(h), width(w), labels(h * w, fill) {}

  int& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  int at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  std::size_t size() const { return labels.size(); }
  bool operator==(const SegmentationMask&) const = default;
};

namespace detail {

// Half-pixel-centred source coordinate, clamped to the valid range.
inline void bilinear_taps(std::size_t out_i, std::size_t out_n, std::size_t in_n,
                          std::size_t& i0, std::size_t& i1, double& frac) {
  double src = (static_cast<double>(out_i) + 0.5) * static_cast<double>(in_n) /
                   static_cast<double>(out_n) - 0.5;
  src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
  i0 = static_cast<std::size_t>(std::floor(src));
  i1 = std::min(i0 + 1, in_n - 1);
  frac = src - static_cast<double>(i0);
}

// Mirror index into [0, n) without repeating the edge sample.
inline std::size_t reflect_index(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * static_cast<long>(n) - 2;
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<long>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace detail

inline Image resize_bilinear(const Image& in, std::size_t out_h, std::size_t out_w) {
  if (in.empty() || out_h == 0 || out_w == 0) throw ShapeError("resize_bilinear: empty image");
  if (in.height == out_h && in.width == out_w) return in;
  Image out(out_h, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    std::size_t y0, y1;
    double fy;
    detail::bilinear_taps(y, out_h, in.height, y0, y1, fy);
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t x0, x1;
      double fx;
      detail::bilinear_taps(x, out_w, in.width, x0, x1, fx);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = in.at(y0, x0, c) * (1 - fx) + in.at(y0, x1, c) * fx;
        const double bot = in.at(y1, x0, c) * (1 - fx) + in.at(y1, x1, c) * fx;
        out.at(y, x, c) = static_cast<float>(top * (1 - fy) + bot * fy);
      }
    }
  }
  return out;
}

inline SegmentationMask resize_nearest(const SegmentationMask& in, std::size_t out_h,
                                       std::size_t out_w) {
  if (in.height == out_h && in.width == out_w) return in;
  SegmentationMask out(out_h, out_w);
  out.ignore_label = in.ignore_label;
  for (std::size_t y = 0; y < out_h; ++y) {
    const std::size_t sy = std::min(in.height - 1, y * in.height / out_h);
    for (std::size_t x = 0; x < out_w; ++x) {
      const std::size_t sx = std::min(in.width - 1, x * in.width / out_w);
      out.at(y, x) = in.at(sy, sx);
    }
  }
  return out;
}

inline Image crop(const Image& in, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  if (y0 + h > in.height || x0 + w > in.width) throw ShapeError("crop outside image");
  Image out(h, w);
  for (std::size_t y = 0; y < h; ++y)
    std::copy_n(in.rgb.begin() + ((y0 + y) * in.width + x0) * 3, w * 3,
                out.rgb.begin() + y * w * 3);
  return out;
}

// Reflect-pads so the result is at least min_h x min_w, keeping the
// original centred. Offsets of the original inside the result are returned.
inline Image reflect_pad_to(const Image& in, std::size_t min_h, std::size_t min_w,
                            std::size_t& off_y, std::size_t& off_x) {
  const std::size_t out_h = std::max(in.height, min_h);
  const std::size_t out_w = std::max(in.width, min_w);
  off_y = (out_h - in.height) / 2;
  off_x = (out_w - in.width) / 2;
  Image out(out_h, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const std::size_t sy = detail::reflect_index(static_cast<long>(y) - static_cast<long>(off_y), in.height);
    for (std::size_t x = 0; x < out_w; ++x) {
      const std::size_t sx = detail::reflect_index(static_cast<long>(x) - static_cast<long>(off_x), in.width);
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = in.at(sy, sx, c);
    }
  }
  return out;
}

}  // namespace cafe
