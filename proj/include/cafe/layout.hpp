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

// Index maps for ops::gather. Each builder returns the output shape together
// with, for every output element, the flat source index (or -1 for zero).

#include <cstddef>
#include <memory>
#include <vector>

#include "cafe/error.hpp"
#include "cafe/ops.hpp"
#include "cafe/tensor.hpp"

namespace cafe::layout {

using ops::Index;
using ops::IndexMap;

struct Gather {
  Shape shape;
  IndexMap map;
};

// Generic axis permutation: out axis i is input axis perm[i].
inline Gather permute(const Shape& in, const std::vector<std::size_t>& perm) {
  if (perm.size() != in.size()) throw ShapeError("permute: rank mismatch");
  const std::size_t rank = in.size();
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) out[i] = in.at(perm[i]);
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  auto map = std::make_shared<std::vector<Index>>(shape_numel(in));
  std::vector<std::size_t> counter(rank, 0);
  for (std::size_t flat = 0; flat < map->size(); ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += counter[i] * in_stride[perm[i]];
    (*map)[flat] = static_cast<Index>(src);
    for (std::size_t i = rank; i-- > 0;) {
      if (++counter[i] < out[i]) break;
      counter[i] = 0;
    }
  }
  return {out, map};
}

template <typename T>
Tensor<T> apply(const Tensor<T>& x, const Gather& g) {
  return ops::gather(x, g.shape, g.map);
}

// 3x3 same-padded patches of a channel-last [B, H, W, C] grid, as rows of
// an im2col matrix [B*H*W, 9*C] ordered (ky, kx, c).
inline Gather im2col3x3(std::size_t batch, std::size_t height, std::size_t width,
                        std::size_t channels) {
  auto map = std::make_shared<std::vector<Index>>();
  map->reserve(batch * height * width * 9 * channels);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x)
        for (int ky = -1; ky <= 1; ++ky)
          for (int kx = -1; kx <= 1; ++kx) {
            const long sy = static_cast<long>(y) + ky;
            const long sx = static_cast<long>(x) + kx;
            const bool inside = sy >= 0 && sx >= 0 && sy < static_cast<long>(height) &&
                                sx < static_cast<long>(width);
            for (std::size_t c = 0; c < channels; ++c) {
              map->push_back(inside ? static_cast<Index>(
                                          ((b * height + sy) * width + sx) * channels + c)
                                    : Index{-1});
            }
          }
  return {{batch * height * width, 9 * channels}, map};
}

// Geometry of a (possibly shifted) window partition over a zero-padded grid.
struct WindowGeometry {
  std::size_t height = 0, width = 0;            // unpadded grid
  std::size_t padded_h = 0, padded_w = 0;       // next multiples of window
  std::size_t window = 0;
  std::size_t shift = 0;
  std::size_t windows_y() const { return padded_h / window; }
  std::size_t windows_x() const { return padded_w / window; }
  std::size_t num_windows() const { return windows_y() * windows_x(); }
  std::size_t tokens() const { return window * window; }
};

inline WindowGeometry window_geometry(std::size_t height, std::size_t width,
                                      std::size_t window, std::size_t shift) {
  if (window == 0) throw ShapeError("window size must be positive");
  WindowGeometry g;
  g.height = height;
  g.width = width;
  g.window = window;
  g.padded_h = (height + window - 1) / window * window;
  g.padded_w = (width + window - 1) / window * window;
  g.shift = shift;
  return g;
}

// Position on the padded grid that lands at shifted-grid coordinate (sy, sx)
// after the cyclic roll by -shift.
inline std::pair<std::size_t, std::size_t> unshift(const WindowGeometry& g,
                                                   std::size_t sy, std::size_t sx) {
  return {(sy + g.shift) % g.padded_h, (sx + g.shift) % g.padded_w};
}

// [B, H, W, C] -> [B * nW, window*window, C]: pad, roll by -shift, partition.
inline Gather partition_windows(std::size_t batch, const WindowGeometry& g,
                                std::size_t channels) {
  const std::size_t n = g.tokens();
  auto map = std::make_shared<std::vector<Index>>();
  map->reserve(batch * g.num_windows() * n * channels);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t wy = 0; wy < g.windows_y(); ++wy)
      for (std::size_t wx = 0; wx < g.windows_x(); ++wx)
        for (std::size_t iy = 0; iy < g.window; ++iy)
          for (std::size_t ix = 0; ix < g.window; ++ix) {
            const auto [py, px] = unshift(g, wy * g.window + iy, wx * g.window + ix);
            const bool inside = py < g.height && px < g.width;
            for (std::size_t c = 0; c < channels; ++c) {
              map->push_back(inside ? static_cast<Index>(
                                          ((b * g.height + py) * g.width + px) * channels + c)
                                    : Index{-1});
            }
          }
  return {{batch * g.num_windows(), n, channels}, map};
}

// Inverse of partition_windows restricted to the unpadded grid.
inline Gather merge_windows(std::size_t batch, const WindowGeometry& g,
                            std::size_t channels) {
  const std::size_t n = g.tokens();
  auto map = std::make_shared<std::vector<Index>>();
  map->reserve(batch * g.height * g.width * channels);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t y = 0; y < g.height; ++y)
      for (std::size_t x = 0; x < g.width; ++x) {
        const std::size_t sy = (y + g.padded_h - g.shift % g.padded_h) % g.padded_h;
        const std::size_t sx = (x + g.padded_w - g.shift % g.padded_w) % g.padded_w;
        const std::size_t win = (sy / g.window) * g.windows_x() + sx / g.window;
        const std::size_t tok = (sy % g.window) * g.window + sx % g.window;
        const std::size_t base = ((b * g.num_windows() + win) * n + tok) * channels;
        for (std::size_t c = 0; c < channels; ++c) map->push_back(static_cast<Index>(base + c));
      }
  return {{batch, g.height, g.width, channels}, map};
}

// Additive attention mask for shifted windows, [nW, n, n]: tokens that come
// from different regions of the rolled grid must not attend to each other.
template <typename T>
std::vector<T> shifted_window_mask(const WindowGeometry& g, T blocked) {
  const std::size_t n = g.tokens();
  std::vector<T> mask(g.num_windows() * n * n, T(0));
  if (g.shift == 0) return mask;
  auto region = [&](std::size_t v, std::size_t padded) -> std::size_t {
    if (v < padded - g.window) return 0;
    if (v < padded - g.shift) return 1;
    return 2;
  };
  for (std::size_t wy = 0; wy < g.windows_y(); ++wy)
    for (std::size_t wx = 0; wx < g.windows_x(); ++wx) {
      const std::size_t win = wy * g.windows_x() + wx;
      std::vector<std::size_t> label(n);
      for (std::size_t iy = 0; iy < g.window; ++iy)
        for (std::size_t ix = 0; ix < g.window; ++ix) {
          const std::size_t sy = wy * g.window + iy;
          const std::size_t sx = wx * g.window + ix;
          label[iy * g.window + ix] = region(sy, g.padded_h) * 3 + region(sx, g.padded_w);
        }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (label[i] != label[j]) mask[(win * n + i) * n + j] = blocked;
    }
  return mask;
}

// Index into a [(2w-1)^2, heads] relative-position table for every
// (head, query, key) triple of a window, giving a [heads, n, n] bias.
inline Gather relative_position_bias(std::size_t window, std::size_t heads) {
  const std::size_t n = window * window;
  const std::size_t span = 2 * window - 1;
  auto map = std::make_shared<std::vector<Index>>();
  map->reserve(heads * n * n);
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t dy = i / window + window - 1 - j / window;
        const std::size_t dx = i % window + window - 1 - j % window;
        map->push_back(static_cast<Index>((dy * span + dx) * heads + h));
      }
  return {{heads, n, n}, map};
}

// [R*n, 3*D] fused qkv rows (layout: which, head, dh) -> one of q/k/v as
// [R*heads, n, dh].
inline Gather split_heads(std::size_t groups, std::size_t tokens, std::size_t heads,
                          std::size_t head_dim, std::size_t which) {
  const std::size_t d = heads * head_dim;
  auto map = std::make_shared<std::vector<Index>>();
  map->reserve(groups * tokens * d);
  for (std::size_t r = 0; r < groups; ++r)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < tokens; ++i)
        for (std::size_t c = 0; c < head_dim; ++c)
          map->push_back(static_cast<Index>((r * tokens + i) * 3 * d + which * d +
                                            h * head_dim + c));
  return {{groups * heads, tokens, head_dim}, map};
}

// [R*heads, n, dh] -> [R, n, heads*dh].
inline Gather merge_heads(std::size_t groups, std::size_t tokens, std::size_t heads,
                          std::size_t head_dim) {
  auto map = std::make_shared<std::vector<Index>>();
  map->reserve(groups * tokens * heads * head_dim);
  for (std::size_t r = 0; r < groups; ++r)
    for (std::size_t i = 0; i < tokens; ++i)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t c = 0; c < head_dim; ++c)
          map->push_back(static_cast<Index>(((r * heads + h) * tokens + i) * head_dim + c));
  return {{groups, tokens, heads * head_dim}, map};
}

}  // namespace cafe::layout
