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

// Reading and writing 8-bit images: PNG through libpng, binary PGM/PPM
// natively. Single-channel files hold class-index masks or cost maps.

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "cafe/error.hpp"
#include "cafe/image.hpp"

namespace cafe::io {

struct Raster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;  // 1 or 3
  std::vector<std::uint8_t> data;
};

namespace detail {

inline std::string lower_ext(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline Raster read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);
  std::array<unsigned char, 8> sig{};
  if (std::fread(sig.data(), 1, 8, fp.get()) != 8 || png_sig_cmp(sig.data(), 0, 8)) {
    throw IoError(path + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialization failed");
  }
  Raster r;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  r.width = png_get_image_width(png, info);
  r.height = png_get_image_height(png, info);
  r.channels = png_get_channels(png, info);
  if (r.channels != 1 && r.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported PNG channel layout in " + path);
  }
  r.data.resize(r.height * r.width * r.channels);
  rows.resize(r.height);
  for (std::size_t y = 0; y < r.height; ++y) rows[y] = r.data.data() + y * r.width * r.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return r;
}

inline void write_png(const std::string& path, const Raster& r) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height), 8,
               r.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < r.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(r.data.data() + y * r.width * r.channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline Raster read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6") throw IoError(path + ": only binary P5/P6 supported");
  auto next_int = [&]() {
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      long v = -1;
      in >> v;
      if (!in || v < 0) throw IoError(path + ": malformed header");
      return static_cast<std::size_t>(v);
    }
  };
  Raster r;
  r.width = next_int();
  r.height = next_int();
  if (next_int() != 255) throw IoError(path + ": only maxval 255 supported");
  in.get();
  r.channels = magic == "P5" ? 1 : 3;
  r.data.resize(r.width * r.height * r.channels);
  in.read(reinterpret_cast<char*>(r.data.data()), static_cast<std::streamsize>(r.data.size()));
  if (!in) throw IoError(path + ": truncated pixel data");
  return r;
}

inline void write_pnm(const std::string& path, const Raster& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << (r.channels == 1 ? "P5" : "P6") << '\n' << r.width << ' ' << r.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(r.data.data()), static_cast<std::streamsize>(r.data.size()));
}

}  // namespace detail

inline bool is_supported_image(const std::string& path) {
  const auto ext = detail::lower_ext(path);
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

inline Raster read_raster(const std::string& path) {
  const auto ext = detail::lower_ext(path);
  if (ext == ".png") return detail::read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return detail::read_pnm(path);
  throw IoError("unsupported image format: " + path);
}

inline void write_raster(const std::string& path, const Raster& r) {
  if (r.channels != 1 && r.channels != 3) throw IoError("raster must have 1 or 3 channels");
  const auto ext = detail::lower_ext(path);
  if (ext == ".png") return detail::write_png(path, r);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return detail::write_pnm(path, r);
  throw IoError("unsupported image format: " + path);
}

inline Image read_image(const std::string& path) {
  Raster r = read_raster(path);
  Image img(r.height, r.width);
  for (std::size_t i = 0; i < r.height * r.width; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      img.rgb[i * 3 + c] = static_cast<float>(r.data[i * r.channels + (r.channels == 1 ? 0 : c)]) / 255.f;
  return img;
}

inline void write_image(const std::string& path, const Image& img) {
  Raster r{img.height, img.width, 3, std::vector<std::uint8_t>(img.rgb.size())};
  for (std::size_t i = 0; i < img.rgb.size(); ++i) {
    const float v = std::clamp(img.rgb[i], 0.f, 1.f);
    r.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.f));
  }
  write_raster(path, r);
}

inline SegmentationMask read_mask(const std::string& path, int ignore_label = kIgnoreLabel) {
  Raster r = read_raster(path);
  if (r.channels != 1) throw IoError(path + ": masks must be single-channel");
  SegmentationMask m(r.height, r.width);
  m.ignore_label = ignore_label;
  for (std::size_t i = 0; i < r.data.size(); ++i) m.labels[i] = r.data[i];
  return m;
}

// Class indices as 8-bit pixel values; the ignore label must fit in 8 bits.
inline void write_mask(const std::string& path, const SegmentationMask& m) {
  Raster r{m.height, m.width, 1, std::vector<std::uint8_t>(m.labels.size())};
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    const int v = m.labels[i];
    if (v < 0 || v > 255) throw IoError("mask label " + std::to_string(v) + " does not fit in 8 bits");
    r.data[i] = static_cast<std::uint8_t>(v);
  }
  write_raster(path, r);
}

using Rgb8 = std::array<std::uint8_t, 3>;

// Deterministic, well-separated display colors; index 255 renders black.
inline std::vector<Rgb8> default_palette(std::size_t classes) {
  static constexpr std::array<Rgb8, 12> kBase = {{{128, 64, 128}, {70, 70, 70}, {107, 142, 35},
                                                  {0, 130, 0}, {0, 0, 142}, {220, 20, 60},
                                                  {250, 170, 30}, {70, 130, 180}, {152, 251, 152},
                                                  {190, 153, 153}, {255, 255, 0}, {119, 11, 32}}};
  std::vector<Rgb8> out;
  for (std::size_t i = 0; i < classes; ++i) {
    if (i < kBase.size()) {
      out.push_back(kBase[i]);
    } else {
      const std::uint32_t h = static_cast<std::uint32_t>(i) * 2654435761u;
      out.push_back({static_cast<std::uint8_t>(h >> 24), static_cast<std::uint8_t>(h >> 16),
                     static_cast<std::uint8_t>(h >> 8)});
    }
  }
  return out;
}

inline Raster render_mask(const SegmentationMask& m, const std::vector<Rgb8>& palette) {
  Raster r{m.height, m.width, 3, std::vector<std::uint8_t>(m.labels.size() * 3, 0)};
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    const int v = m.labels[i];
    if (v >= 0 && static_cast<std::size_t>(v) < palette.size()) {
      for (std::size_t c = 0; c < 3; ++c) r.data[i * 3 + c] = palette[v][c];
    }
  }
  return r;
}

// Sidecar palette: "index<TAB>r g b<TAB>class name" per line.
inline void write_palette(const std::string& path, const std::vector<Rgb8>& palette,
                          const std::vector<std::string>& names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (std::size_t i = 0; i < palette.size(); ++i) {
    out << i << '\t' << int(palette[i][0]) << ' ' << int(palette[i][1]) << ' ' << int(palette[i][2]);
    if (i < names.size()) out << '\t' << names[i];
    out << '\n';
  }
}

}  // namespace cafe::io
