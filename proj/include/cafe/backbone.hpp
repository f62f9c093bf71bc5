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

// Vision/text encoder interfaces, global and dense descriptor pooling, and
// the seeded toy encoders used when no pretrained backbone is available.

#include <cctype>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cafe/error.hpp"
#include "cafe/image.hpp"
#include "cafe/nn.hpp"
#include "cafe/ops.hpp"
#include "cafe/tensor.hpp"

namespace cafe {

// Encoder output: a global token plus an h x w grid of patch tokens, all of
// width D.
template <typename T>
struct VisionFeatures {
  Tensor<T> cls;      // [D]
  Tensor<T> patches;  // [h*w, D], row-major over the grid
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t patch_size = 0;

  std::size_t dim() const { return cls.numel(); }
  std::size_t num_patches() const { return grid_h * grid_w; }
};

// Which backbone parts receive gradient updates.
struct FreezePolicy {
  bool last_two_vision_blocks_trainable = true;
  bool text_encoder_trainable = false;

  bool operator==(const FreezePolicy&) const = default;
};

// Vision encoder contract. Adapters for pretrained backbones implement this.
template <typename T>
class VisionEncoder {
 public:
  virtual ~VisionEncoder() = default;
  virtual VisionFeatures<T> encode(const Image& image) const = 0;
  virtual std::size_t patch_size() const = 0;
  virtual std::size_t dim() const = 0;  // D
  virtual void collect(ParamList<T>& out) const = 0;
};

// Text encoder contract: prompts -> [P, 2D].
template <typename T>
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual Tensor<T> encode(const std::vector<std::string>& prompts) const = 0;
  virtual std::size_t dim() const = 0;  // 2D
  virtual void collect(ParamList<T>& out) const = 0;
};

inline void check_patch_grid(const Image& image, std::size_t patch) {
  if (patch == 0 || image.empty() || image.height % patch || image.width % patch) {
    throw ShapeError("image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                     " is not divisible into " + std::to_string(patch) + "px patches");
  }
}

// g = [cls; mean of patch tokens], width 2D.
template <typename T>
Tensor<T> pool_global(const VisionFeatures<T>& f) {
  Tensor<T> mean = ops::mean_rows(f.patches);
  return ops::concat_last(f.cls.reshape({1, f.dim()}), mean.reshape({1, f.dim()})).reshape({2 * f.dim()});
}

// Per-patch analogue of pool_global: cell (j, k) = [cls; f_(j,k)], giving
// [h*w, 2D].
template <typename T>
Tensor<T> dense_descriptors(const VisionFeatures<T>& f) {
  const std::size_t n = f.num_patches();
  const std::size_t d = f.dim();
  auto map = std::make_shared<std::vector<ops::Index>>(n * d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) (*map)[r * d + c] = static_cast<ops::Index>(c);
  Tensor<T> cls_rows = ops::gather(f.cls, {n, d}, map);
  return ops::concat_last(cls_rows, f.patches);
}

struct ToyVisionConfig {
  std::size_t patch_size = 16;
  std::size_t dim = 32;  // D
  std::uint64_t seed = 0;
};

// Patchify -> fixed random projection to D -> trainable residual linear
// layer standing in for the final vision blocks. The global token is the
// seeded constant plus the mean patch projection, passed through the same
// trainable layer.
template <typename T>
class ToyVisionEncoder final : public VisionEncoder<T> {
 public:
  explicit ToyVisionEncoder(ToyVisionConfig cfg) : cfg_(cfg) {
    if (cfg_.patch_size == 0 || cfg_.dim == 0) throw ValidationError("toy vision encoder: zero size");
    Rng rng(cfg_.seed ^ 0x5649534fULL);
    const std::size_t in = cfg_.patch_size * cfg_.patch_size * 3;
    std::vector<T> w(cfg_.dim * in);
    for (auto& v : w) v = static_cast<T>(rng.normal() / std::sqrt(static_cast<double>(in)) * 4.0);
    projection_ = Tensor<T>({cfg_.dim, in}, std::move(w));
    std::vector<T> c(cfg_.dim);
    for (auto& v : c) v = static_cast<T>(rng.normal());
    cls_seed_ = Tensor<T>({1, cfg_.dim}, std::move(c));
    tail_ = Linear<T>::make(cfg_.dim, cfg_.dim, 0.02, rng);
  }

  VisionFeatures<T> encode(const Image& image) const override {
    check_patch_grid(image, cfg_.patch_size);
    const std::size_t p = cfg_.patch_size;
    const std::size_t gh = image.height / p;
    const std::size_t gw = image.width / p;
    const std::size_t in = p * p * 3;
    std::vector<T> cols(gh * gw * in);
    for (std::size_t j = 0; j < gh; ++j)
      for (std::size_t k = 0; k < gw; ++k) {
        T* dst = cols.data() + (j * gw + k) * in;
        for (std::size_t y = 0; y < p; ++y)
          for (std::size_t x = 0; x < p; ++x)
            for (std::size_t c = 0; c < 3; ++c)
              *dst++ = static_cast<T>(image.at(j * p + y, k * p + x, c)) - T(0.5);
      }
    Tensor<T> pixels({gh * gw, in}, std::move(cols));
    Tensor<T> projected = ops::linear(pixels, projection_, Tensor<T>());
    Tensor<T> patches = ops::add(projected, tail_(projected));
    Tensor<T> cls_in = ops::add(cls_seed_, ops::mean_rows(projected).reshape({1, cfg_.dim}));
    Tensor<T> cls = ops::add(cls_in, tail_(cls_in)).reshape({cfg_.dim});
    return {cls, patches, gh, gw, p};
  }

  std::size_t patch_size() const override { return cfg_.patch_size; }
  std::size_t dim() const override { return cfg_.dim; }
  void collect(ParamList<T>& out) const override {
    tail_.collect("vision.tail", ParamGroup::kVision, out);
  }

  const ToyVisionConfig& config() const { return cfg_; }
  Linear<T>& tail() { return tail_; }

 private:
  ToyVisionConfig cfg_;
  Tensor<T> projection_;
  Tensor<T> cls_seed_;
  Linear<T> tail_;
};

struct ToyTextConfig {
  std::size_t dim = 64;  // 2D
  std::size_t buckets = 4096;
  std::size_t token_dim = 64;
  std::uint64_t seed = 0;
};

// Lower-cases and splits on whitespace.
inline std::vector<std::string> tokenize(const std::string& prompt) {
  std::vector<std::string> tokens;
  std::istringstream in(prompt);
  std::string tok;
  while (in >> tok) {
    for (auto& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    tokens.push_back(tok);
  }
  return tokens;
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s, std::uint64_t basis = 0xcbf29ce484222325ULL) {
  std::uint64_t h = basis;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Whitespace tokens hashed into a seeded embedding table, mean-pooled,
// projected to 2D by a fixed matrix, then a trainable residual linear layer.
template <typename T>
class ToyTextEncoder final : public TextEncoder<T> {
 public:
  explicit ToyTextEncoder(ToyTextConfig cfg) : cfg_(cfg) {
    if (cfg_.dim == 0 || cfg_.buckets == 0 || cfg_.token_dim == 0) {
      throw ValidationError("toy text encoder: zero size");
    }
    Rng rng(cfg_.seed ^ 0x54455854ULL);
    table_.resize(cfg_.buckets * cfg_.token_dim);
    for (auto& v : table_) v = rng.normal();
    projection_.resize(cfg_.dim * cfg_.token_dim);
    for (auto& v : projection_) v = rng.normal() / std::sqrt(static_cast<double>(cfg_.token_dim));
    tail_ = Linear<T>::make(cfg_.dim, cfg_.dim, 0.02, rng);
  }

  Tensor<T> encode(const std::vector<std::string>& prompts) const override {
    std::vector<T> base(prompts.size() * cfg_.dim);
    std::vector<double> pooled(cfg_.token_dim);
    for (std::size_t p = 0; p < prompts.size(); ++p) {
      const auto tokens = tokenize(prompts[p]);
      if (tokens.empty()) throw ValidationError("text prompt is empty");
      std::fill(pooled.begin(), pooled.end(), 0.0);
      for (const auto& tok : tokens) {
        const std::size_t bucket = fnv1a(tok, 0xcbf29ce484222325ULL ^ cfg_.seed) % cfg_.buckets;
        for (std::size_t i = 0; i < cfg_.token_dim; ++i) pooled[i] += table_[bucket * cfg_.token_dim + i];
      }
      for (auto& v : pooled) v /= static_cast<double>(tokens.size());
      for (std::size_t o = 0; o < cfg_.dim; ++o) {
        double acc = 0.0;
        for (std::size_t i = 0; i < cfg_.token_dim; ++i) acc += projection_[o * cfg_.token_dim + i] * pooled[i];
        base[p * cfg_.dim + o] = static_cast<T>(acc);
      }
    }
    Tensor<T> x({prompts.size(), cfg_.dim}, std::move(base));
    return ops::add(x, tail_(x));
  }

  Tensor<T> encode_one(const std::string& prompt) const {
    return encode({prompt}).reshape({cfg_.dim});
  }

  std::size_t dim() const override { return cfg_.dim; }
  void collect(ParamList<T>& out) const override {
    tail_.collect("text.tail", ParamGroup::kText, out);
  }

  const ToyTextConfig& config() const { return cfg_; }
  Linear<T>& tail() { return tail_; }

 private:
  ToyTextConfig cfg_;
  std::vector<double> table_;
  std::vector<double> projection_;
  Linear<T> tail_;
};

}  // namespace cafe
