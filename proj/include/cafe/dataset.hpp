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

// Image/mask dataset directories and a seeded synthetic generator.
//
// Layout: images/<name>.<ext> paired with masks/<name>.<ext>, where masks are
// single-channel class indices and 255 marks ignored pixels.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cafe/error.hpp"
#include "cafe/image.hpp"
#include "cafe/image_io.hpp"
#include "cafe/nn.hpp"
#include "cafe/vocab.hpp"

namespace cafe {

struct TrainingSample {
  Image image;
  SegmentationMask mask;
};

struct DatasetEntry {
  std::string name;
  std::string image_path;
  std::optional<std::string> mask_path;
};

// Lists images sorted by name and pairs each with its mask if present.
inline std::vector<DatasetEntry> list_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  const fs::path images = root / "images";
  if (!fs::is_directory(root)) throw ValidationError("dataset directory " + dir + " does not exist");
  if (!fs::is_directory(images)) throw ValidationError("dataset directory " + dir + " has no images/ folder");
  std::vector<DatasetEntry> out;
  for (const auto& e : fs::directory_iterator(images)) {
    if (!e.is_regular_file() || !io::is_supported_image(e.path().string())) continue;
    DatasetEntry d;
    d.name = e.path().stem().string();
    d.image_path = e.path().string();
    for (const char* ext : {".png", ".pgm", ".ppm"}) {
      const fs::path m = root / "masks" / (d.name + ext);
      if (fs::is_regular_file(m)) {
        d.mask_path = m.string();
        break;
      }
    }
    out.push_back(std::move(d));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

// Loads every sample with a mask; images without one are skipped.
inline std::vector<TrainingSample> load_dataset(const std::string& dir, std::size_t* skipped = nullptr) {
  std::vector<TrainingSample> out;
  std::size_t missing = 0;
  for (const auto& e : list_dataset(dir)) {
    if (!e.mask_path) {
      ++missing;
      continue;
    }
    TrainingSample s{io::read_image(e.image_path), io::read_mask(*e.mask_path)};
    if (s.image.height != s.mask.height || s.image.width != s.mask.width) {
      throw ValidationError("mask " + *e.mask_path + " does not match its image size");
    }
    out.push_back(std::move(s));
  }
  if (skipped) *skipped = missing;
  return out;
}

struct SyntheticConfig {
  std::size_t count = 16;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t classes = 3;  // class 0 is the background
  std::size_t shapes_per_image = 3;
  double noise = 0.03;
  std::uint64_t seed = 0;
};

inline constexpr std::array<std::string_view, 8> kSyntheticClassNames = {
    "background", "red disc", "green block", "blue stripe", "yellow blob", "purple tile", "cyan ring", "orange patch"};

inline const std::array<std::array<float, 3>, 8>& synthetic_colors() {
  static const std::array<std::array<float, 3>, 8> c = {{{0.45f, 0.45f, 0.45f},
                                                         {0.85f, 0.15f, 0.15f},
                                                         {0.15f, 0.75f, 0.2f},
                                                         {0.15f, 0.25f, 0.85f},
                                                         {0.9f, 0.85f, 0.15f},
                                                         {0.6f, 0.2f, 0.7f},
                                                         {0.1f, 0.8f, 0.8f},
                                                         {0.95f, 0.55f, 0.1f}}};
  return c;
}

inline ClassVocabulary synthetic_vocabulary(std::size_t classes) {
  if (classes < 2 || classes > kSyntheticClassNames.size()) {
    throw ValidationError("synthetic data supports 2.." + std::to_string(kSyntheticClassNames.size()) + " classes");
  }
  return ClassVocabulary(std::vector<std::string>(kSyntheticClassNames.begin(),
                                                  kSyntheticClassNames.begin() + static_cast<long>(classes)));
}

// Flat-coloured discs and rectangles on a grey background with Gaussian
// pixel noise. Every foreground class appears in every image.
inline std::vector<TrainingSample> generate_synthetic(const SyntheticConfig& cfg) {
  synthetic_vocabulary(cfg.classes);
  if (cfg.height < 8 || cfg.width < 8) throw ValidationError("synthetic images must be at least 8x8");
  Rng rng(cfg.seed);
  const auto& colors = synthetic_colors();
  std::vector<TrainingSample> out;
  for (std::size_t n = 0; n < cfg.count; ++n) {
    TrainingSample s{Image(cfg.height, cfg.width), SegmentationMask(cfg.height, cfg.width, 0)};
    const std::size_t shapes = std::max(cfg.shapes_per_image, cfg.classes - 1);
    for (std::size_t k = 0; k < shapes; ++k) {
      const int cls = static_cast<int>(1 + k % (cfg.classes - 1));
      const double h = static_cast<double>(cfg.height), w = static_cast<double>(cfg.width);
      const double cy = rng.uniform(0.15, 0.85) * h, cx = rng.uniform(0.15, 0.85) * w;
      const double ry = rng.uniform(0.12, 0.25) * h, rx = rng.uniform(0.12, 0.25) * w;
      const bool disc = rng.uniform() < 0.5;
      for (std::size_t y = 0; y < cfg.height; ++y) {
        for (std::size_t x = 0; x < cfg.width; ++x) {
          const double dy = (static_cast<double>(y) + 0.5 - cy) / ry;
          const double dx = (static_cast<double>(x) + 0.5 - cx) / rx;
          const bool inside = disc ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
          if (inside) s.mask.at(y, x) = cls;
        }
      }
    }
    for (std::size_t y = 0; y < cfg.height; ++y) {
      for (std::size_t x = 0; x < cfg.width; ++x) {
        const auto& col = colors[static_cast<std::size_t>(s.mask.at(y, x))];
        for (std::size_t c = 0; c < 3; ++c) {
          const double v = col[c] + cfg.noise * rng.normal();
          s.image.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Writes samples as images/NNNN.png and masks/NNNN.png under `dir`.
inline void write_dataset(const std::string& dir, const std::vector<TrainingSample>& samples) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "%04zu.png", i);
    io::write_image((fs::path(dir) / "images" / name).string(), samples[i].image);
    io::write_mask((fs::path(dir) / "masks" / name).string(), samples[i].mask);
  }
}

}  // namespace cafe
