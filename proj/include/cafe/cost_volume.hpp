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

// Class-wise cosine-similarity cost volume between dense image descriptors
// and class text embeddings.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cafe/error.hpp"
#include "cafe/image_io.hpp"
#include "cafe/ops.hpp"
#include "cafe/tensor.hpp"

namespace cafe {

template <typename T>
T cosine_sim(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_sim: dimension mismatch");
  T dot = T(0), na = T(0), nb = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > T(0)) || !(nb > T(0))) throw DegenerateError("cosine_sim: zero-magnitude vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Raw cosine scores laid out [h, w, M]; class axis in vocabulary order.
template <typename T>
struct CostVolume {
  Tensor<T> values;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 0;

  T at(std::size_t j, std::size_t k, std::size_t i) const {
    return values.values()[(j * width + k) * classes + i];
  }
};

// field: [h*w, 2D] descriptors; embeddings: [M, 2D].
template <typename T>
CostVolume<T> build_cost_volume(const Tensor<T>& field, std::size_t height, std::size_t width,
                                const Tensor<T>& embeddings) {
  if (field.rank() != 2 || field.dim(0) != height * width) {
    throw ShapeError("cost volume: field " + shape_str(field.shape()) + " is not a " +
                     std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  if (embeddings.rank() != 2 || embeddings.dim(0) == 0) {
    throw ShapeError("cost volume: embeddings must be [M, dim] with M >= 1");
  }
  if (embeddings.dim(1) != field.dim(1)) {
    throw ShapeError("cost volume: descriptor width " + std::to_string(field.dim(1)) +
                     " != embedding width " + std::to_string(embeddings.dim(1)));
  }
  const std::size_t m = embeddings.dim(0);
  const std::size_t d = field.dim(1);
  Tensor<T> f = ops::l2_normalize_last(field).reshape({1, height * width, d});
  Tensor<T> t = ops::l2_normalize_last(embeddings).reshape({1, m, d});
  Tensor<T> v = ops::bmm(f, t, /*transpose_b=*/true).reshape({height, width, m});
  return {v, height, width, m};
}

// Min-max normalizes one map to 8 bits; a constant map becomes mid-gray.
template <typename T>
std::vector<std::uint8_t> normalize_to_gray(std::span<const T> values) {
  std::vector<std::uint8_t> out(values.size(), 128);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double u = (static_cast<double>(values[i]) - static_cast<double>(*lo)) / range;
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0));
  }
  return out;
}

// Writes one grayscale image per class: `<dir>/costmap_<i>.<ext>`. `maps`
// is class-major [M, H, W].
template <typename T>
void export_class_maps(const std::vector<T>& maps, std::size_t classes, std::size_t height,
                       std::size_t width, const std::string& dir, const std::string& ext = "png") {
  if (maps.size() != classes * height * width) throw ShapeError("export: map size mismatch");
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < classes; ++i) {
    std::span<const T> slice(maps.data() + i * height * width, height * width);
    io::Raster r{height, width, 1, normalize_to_gray(slice)};
    io::write_raster((std::filesystem::path(dir) / ("costmap_" + std::to_string(i) + "." + ext)).string(), r);
  }
}

// Exports the raw cost volume.
template <typename T>
void export_costmaps(const CostVolume<T>& v, const std::string& dir, const std::string& ext = "png") {
  std::vector<T> maps(v.classes * v.height * v.width);
  for (std::size_t j = 0; j < v.height; ++j)
    for (std::size_t k = 0; k < v.width; ++k)
      for (std::size_t i = 0; i < v.classes; ++i)
        maps[(i * v.height + j) * v.width + k] = v.at(j, k, i);
  export_class_maps(maps, v.classes, v.height, v.width, dir, ext);
}

}  // namespace cafe
