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

// Scalar reference implementations of the attention blocks.

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "cafe/aggregator.hpp"

namespace cafe::testing {

using Vec = std::vector<double>;

inline Vec layer_norm(const Vec& x, const Tensor<double>& g, const Tensor<double>& b) {
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size();
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / std::sqrt(var + 1e-5) * g.values()[i] + b.values()[i];
  return out;
}

inline Vec affine(const Linear<double>& l, const Vec& x) {
  const std::size_t out = l.weight.dim(0), in = l.weight.dim(1);
  Vec y(out);
  for (std::size_t o = 0; o < out; ++o) {
    double acc = l.bias.values()[o];
    for (std::size_t i = 0; i < in; ++i) acc += l.weight.values()[o * in + i] * x[i];
    y[o] = acc;
  }
  return y;
}

inline Vec mlp(const Mlp<double>& m, const Vec& x) {
  Vec h = affine(m.fc1, x);
  for (double& v : h) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  return affine(m.fc2, h);
}

inline Vec add(const Vec& a, const Vec& b) {
  Vec c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

// Dense attention over `tokens` with an optional pairwise bias; returns the
// concatenated head outputs.
inline Vec attend(const std::vector<Vec>& qkv, std::size_t query, std::size_t heads, std::size_t d,
           const std::function<double(std::size_t, std::size_t, std::size_t)>& bias,
           const std::function<bool(std::size_t, std::size_t)>& allowed, bool linear) {
  const std::size_t dh = d / heads;
  Vec out(d, 0.0);
  for (std::size_t h = 0; h < heads; ++h) {
    auto q = [&](std::size_t t, std::size_t c) { return qkv[t][h * dh + c]; };
    auto k = [&](std::size_t t, std::size_t c) { return qkv[t][d + h * dh + c]; };
    auto v = [&](std::size_t t, std::size_t c) { return qkv[t][2 * d + h * dh + c]; };
    const std::size_t n = qkv.size();
    Vec w(n, 0.0);
    if (!linear) {
      double mx = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        if (!allowed(query, j)) continue;
        double s = 0;
        for (std::size_t c = 0; c < dh; ++c) s += q(query, c) * k(j, c);
        w[j] = s / std::sqrt(double(dh)) + bias(h, query, j);
        mx = std::max(mx, w[j]);
      }
      double z = 0;
      for (std::size_t j = 0; j < n; ++j) {
        w[j] = allowed(query, j) ? std::exp(w[j] - mx) : 0.0;
        z += w[j];
      }
      for (double& x : w) x /= z;
    } else {
      auto phi = [](double x) { return x > 0 ? x + 1 : std::exp(x); };
      double z = 0;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t c = 0; c < dh; ++c) s += phi(q(query, c)) * phi(k(j, c));
        w[j] = s;
        z += s;
      }
      for (double& x : w) x /= z;
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < dh; ++c) out[h * dh + c] += w[j] * v(j, c);
  }
  return out;
}

// Brute-force Swin block on one [h, w, d] slice: explicit zero padding,
// cyclic shift, region masking and relative position bias.
inline std::vector<Vec> swin_oracle(const SwinBlock<double>& b, const std::vector<Vec>& x, std::size_t h, std::size_t w,
                             std::size_t win, std::size_t shift, std::size_t heads) {
  const std::size_t d = x[0].size();
  const std::size_t ph = (h + win - 1) / win * win, pw = (w + win - 1) / win * win;
  // Normed tokens on the padded grid; padding is zero after the norm.
  std::vector<Vec> qkv(ph * pw);
  for (std::size_t y = 0; y < ph; ++y)
    for (std::size_t xx = 0; xx < pw; ++xx) {
      Vec n = (y < h && xx < w) ? layer_norm(x[y * w + xx], b.norm1.gamma, b.norm1.beta) : Vec(d, 0.0);
      qkv[y * pw + xx] = affine(b.attn.qkv, n);
    }
  auto region = [&](std::size_t v, std::size_t p) { return shift == 0 ? 0 : (v < p - win ? 0 : v < p - shift ? 1 : 2); };
  std::vector<Vec> out(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx) {
      const std::size_t sy = (y + ph - shift) % ph, sx = (xx + pw - shift) % pw;
      const std::size_t wy = sy / win, wx = sx / win;
      std::vector<Vec> tokens;
      std::vector<std::pair<std::size_t, std::size_t>> shifted;
      std::size_t query = 0;
      for (std::size_t iy = 0; iy < win; ++iy)
        for (std::size_t ix = 0; ix < win; ++ix) {
          const std::size_t ty = wy * win + iy, tx = wx * win + ix;
          if (ty == sy && tx == sx) query = tokens.size();
          tokens.push_back(qkv[((ty + shift) % ph) * pw + (tx + shift) % pw]);
          shifted.emplace_back(ty, tx);
        }
      const std::size_t span = 2 * win - 1;
      auto bias = [&](std::size_t hd, std::size_t i, std::size_t j) {
        const std::size_t dy = shifted[i].first - shifted[j].first + win - 1;
        const std::size_t dx = shifted[i].second - shifted[j].second + win - 1;
        return b.attn.relative_bias.values()[(dy * span + dx) * heads + hd];
      };
      auto allowed = [&](std::size_t i, std::size_t j) {
        return region(shifted[i].first, ph) == region(shifted[j].first, ph) &&
               region(shifted[i].second, pw) == region(shifted[j].second, pw);
      };
      Vec a = affine(b.attn.proj, attend(tokens, query, heads, d, bias, allowed, false));
      Vec yv = add(x[y * w + xx], a);
      out[y * w + xx] = add(yv, mlp(b.mlp, layer_norm(yv, b.norm2.gamma, b.norm2.beta)));
    }
  return out;
}

}  // namespace cafe::testing
