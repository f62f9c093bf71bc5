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

// Differentiable operations over Tensor<T>. Every op computes its forward
// value eagerly and records a closure that accumulates into the parents'
// gradient buffers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <vector>

#include "cafe/error.hpp"
#include "cafe/tensor.hpp"

namespace cafe::ops {

using Index = std::ptrdiff_t;
using IndexMap = std::shared_ptr<const std::vector<Index>>;

namespace detail {

template <typename T>
using Node = cafe::detail::Node<T>;

template <typename T>
inline bool wants(const Node<T>& self, std::size_t parent) {
  return self.parents[parent]->requires_grad;
}

inline void require_same_numel(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": element count mismatch (" +
                     std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace detail

// out[i] = x[map[i]], or 0 where map[i] < 0. Covers permutes, padding,
// cropping, window partitioning and im2col.
template <typename T>
Tensor<T> gather(const Tensor<T>& x, Shape out_shape, IndexMap map) {
  detail::require_same_numel(shape_numel(out_shape), map->size(), "gather");
  const auto& in = x.values();
  std::vector<T> out(map->size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Index j = (*map)[i];
    if (j >= static_cast<Index>(in.size())) {
      throw ShapeError("gather: index out of range");
    }
    out[i] = j < 0 ? T(0) : in[static_cast<std::size_t>(j)];
  }
  return cafe::detail::make_result<T>(
      std::move(out_shape), std::move(out), {x},
      [map](detail::Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < map->size(); ++i) {
          const Index j = (*map)[i];
          if (j >= 0) g[static_cast<std::size_t>(j)] += self.grad[i];
        }
      });
}

// [R, Da] ++ [R, Db] -> [R, Da + Db] along the last axis.
template <typename T>
Tensor<T> concat_last(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t da = a.shape().back();
  const std::size_t db = b.shape().back();
  const std::size_t rows = a.numel() / da;
  if (b.numel() / db != rows) throw ShapeError("concat_last: row mismatch");
  Shape shape = a.shape();
  shape.back() = da + db;
  std::vector<T> out(rows * (da + db));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.values().begin() + r * da, da, out.begin() + r * (da + db));
    std::copy_n(b.values().begin() + r * db, db,
                out.begin() + r * (da + db) + da);
  }
  return cafe::detail::make_result<T>(
      std::move(shape), std::move(out), {a, b},
      [rows, da, db](detail::Node<T>& self) {
        const std::size_t w = da + db;
        if (detail::wants(self, 0)) {
          auto& g = self.parents[0]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < da; ++c) g[r * da + c] += self.grad[r * w + c];
        }
        if (detail::wants(self, 1)) {
          auto& g = self.parents[1]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < db; ++c)
              g[r * db + c] += self.grad[r * w + da + c];
        }
      });
}

// y = x W^T + b over the last axis. W is [out, in]; b may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias) {
  if (weight.rank() != 2) throw ShapeError("linear: weight must be 2-D");
  const std::size_t out_f = weight.dim(0);
  const std::size_t in_f = weight.dim(1);
  if (x.shape().back() != in_f) {
    throw ShapeError("linear: input " + shape_str(x.shape()) +
                     " does not match weight " + shape_str(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != out_f) throw ShapeError("linear: bias size");
  const std::size_t rows = x.numel() / in_f;
  Shape shape = x.shape();
  shape.back() = out_f;

  const auto& xv = x.values();
  const auto& wv = weight.values();
  std::vector<T> out(rows * out_f);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv.data() + r * in_f;
    for (std::size_t o = 0; o < out_f; ++o) {
      const T* wo = wv.data() + o * in_f;
      T acc = has_bias ? bias.values()[o] : T(0);
      for (std::size_t i = 0; i < in_f; ++i) acc += xr[i] * wo[i];
      out[r * out_f + o] = acc;
    }
  }
  std::vector<Tensor<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return cafe::detail::make_result<T>(
      std::move(shape), std::move(out), std::move(inputs),
      [rows, in_f, out_f, has_bias](detail::Node<T>& self) {
        const auto& gy = self.grad;
        const auto& xv = self.parents[0]->value;
        const auto& wv = self.parents[1]->value;
        if (detail::wants(self, 0)) {
          auto& gx = self.parents[0]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r) {
            T* gxr = gx.data() + r * in_f;
            for (std::size_t o = 0; o < out_f; ++o) {
              const T go = gy[r * out_f + o];
              if (go == T(0)) continue;
              const T* wo = wv.data() + o * in_f;
              for (std::size_t i = 0; i < in_f; ++i) gxr[i] += go * wo[i];
            }
          }
        }
        if (detail::wants(self, 1)) {
          auto& gw = self.parents[1]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r) {
            const T* xr = xv.data() + r * in_f;
            for (std::size_t o = 0; o < out_f; ++o) {
              const T go = gy[r * out_f + o];
              if (go == T(0)) continue;
              T* gwo = gw.data() + o * in_f;
              for (std::size_t i = 0; i < in_f; ++i) gwo[i] += go * xr[i];
            }
          }
        }
        if (has_bias && detail::wants(self, 2)) {
          auto& gb = self.parents[2]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < out_f; ++o) gb[o] += gy[r * out_f + o];
        }
      });
}

// Batched matmul: [B, n, k] x [B, k, m] -> [B, n, m]. With transpose_b the
// second operand is laid out [B, m, k].
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false) {
  if (a.rank() != 3 || b.rank() != 3) throw ShapeError("bmm: rank-3 inputs");
  const std::size_t batch = a.dim(0), n = a.dim(1), k = a.dim(2);
  const std::size_t m = transpose_b ? b.dim(1) : b.dim(2);
  const std::size_t kb = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != batch || kb != k) {
    throw ShapeError("bmm: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<T> out(batch * n * m, T(0));
  for (std::size_t s = 0; s < batch; ++s) {
    const T* A = av.data() + s * n * k;
    const T* B = bv.data() + s * k * m;
    T* C = out.data() + s * n * m;
    for (std::size_t i = 0; i < n; ++i) {
      if (transpose_b) {
        for (std::size_t j = 0; j < m; ++j) {
          T acc = T(0);
          for (std::size_t p = 0; p < k; ++p) acc += A[i * k + p] * B[j * k + p];
          C[i * m + j] = acc;
        }
      } else {
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = A[i * k + p];
          for (std::size_t j = 0; j < m; ++j) C[i * m + j] += aip * B[p * m + j];
        }
      }
    }
  }
  return cafe::detail::make_result<T>(
      {batch, n, m}, std::move(out), {a, b},
      [batch, n, k, m, transpose_b](detail::Node<T>& self) {
        const auto& gc = self.grad;
        const auto& av = self.parents[0]->value;
        const auto& bv = self.parents[1]->value;
        const bool ga_on = detail::wants(self, 0);
        const bool gb_on = detail::wants(self, 1);
        T* ga = ga_on ? self.parents[0]->grad_buffer().data() : nullptr;
        T* gb = gb_on ? self.parents[1]->grad_buffer().data() : nullptr;
        for (std::size_t s = 0; s < batch; ++s) {
          const T* A = av.data() + s * n * k;
          const T* B = bv.data() + s * k * m;
          const T* G = gc.data() + s * n * m;
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
              const T g = G[i * m + j];
              if (g == T(0)) continue;
              for (std::size_t p = 0; p < k; ++p) {
                const std::size_t bi = transpose_b ? j * k + p : p * m + j;
                if (ga_on) ga[s * n * k + i * k + p] += g * B[bi];
                if (gb_on) gb[s * k * m + bi] += g * A[i * k + p];
              }
            }
          }
        }
      });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_numel(a.numel(), b.numel(), "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return cafe::detail::make_result<T>(
      a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
        for (std::size_t p = 0; p < 2; ++p) {
          if (!detail::wants(self, p)) continue;
          auto& g = self.parents[p]->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_numel(a.numel(), b.numel(), "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return cafe::detail::make_result<T>(
      a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
        if (detail::wants(self, 0)) {
          auto& g = self.parents[0]->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (detail::wants(self, 1)) {
          auto& g = self.parents[1]->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
      });
}

// out[i] = a[i] + b[i % b.numel()]: b repeats over a's leading axes.
template <typename T>
Tensor<T> add_broadcast(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t nb = b.numel();
  if (nb == 0 || a.numel() % nb != 0) {
    throw ShapeError("add_broadcast: " + shape_str(b.shape()) +
                     " does not tile " + shape_str(a.shape()));
  }
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i % nb];
  return cafe::detail::make_result<T>(
      a.shape(), std::move(out), {a, b}, [nb](detail::Node<T>& self) {
        if (detail::wants(self, 0)) {
          auto& g = self.parents[0]->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (detail::wants(self, 1)) {
          auto& g = self.parents[1]->grad_buffer();
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % nb] += self.grad[i];
        }
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_numel(a.numel(), b.numel(), "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return cafe::detail::make_result<T>(
      a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
        const auto& av = self.parents[0]->value;
        const auto& bv = self.parents[1]->value;
        if (detail::wants(self, 0)) {
          auto& g = self.parents[0]->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
        }
        if (detail::wants(self, 1)) {
          auto& g = self.parents[1]->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
        }
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * factor;
  return cafe::detail::make_result<T>(
      a.shape(), std::move(out), {a}, [factor](detail::Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
      });
}

// Gaussian error linear unit, erf form.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.values()[i];
    out[i] = T(0.5) * v * (T(1) + std::erf(v * T(kInvSqrt2)));
  }
  return cafe::detail::make_result<T>(
      x.shape(), std::move(out), {x}, [](detail::Node<T>& self) {
        constexpr double kInvSqrt2 = 0.70710678118654752440;
        constexpr double kInvSqrt2Pi = 0.39894228040143267794;
        const auto& xv = self.parents[0]->value;
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const T v = xv[i];
          const T cdf = T(0.5) * (T(1) + std::erf(v * T(kInvSqrt2)));
          const T pdf = T(kInvSqrt2Pi) * std::exp(T(-0.5) * v * v);
          g[i] += self.grad[i] * (cdf + v * pdf);
        }
      });
}

// elu(x) + 1, the positive feature map used by linear attention.
template <typename T>
Tensor<T> elu_plus_one(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.values()[i];
    out[i] = v > T(0) ? v + T(1) : std::exp(v);
  }
  return cafe::detail::make_result<T>(
      x.shape(), std::move(out), {x}, [](detail::Node<T>& self) {
        const auto& xv = self.parents[0]->value;
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const T v = xv[i];
          g[i] += self.grad[i] * (v > T(0) ? T(1) : std::exp(v));
        }
      });
}

// Normalizes over the last axis, then applies gamma/beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5)) {
  const std::size_t d = x.shape().back();
  if (gamma.numel() != d || beta.numel() != d) throw ShapeError("layer_norm: affine size");
  const std::size_t rows = x.numel() / d;
  const auto& xv = x.values();
  std::vector<T> out(x.numel());
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv.data() + r * d;
    T mean = T(0);
    for (std::size_t i = 0; i < d; ++i) mean += xr[i];
    mean /= T(d);
    T var = T(0);
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= T(d);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t i = 0; i < d; ++i) {
      const T h = (xr[i] - mean) * is;
      (*xhat)[r * d + i] = h;
      out[r * d + i] = h * gamma.values()[i] + beta.values()[i];
    }
  }
  return cafe::detail::make_result<T>(
      x.shape(), std::move(out), {x, gamma, beta},
      [d, rows, xhat, inv_std](detail::Node<T>& self) {
        const auto& gy = self.grad;
        const auto& gv = self.parents[1]->value;
        if (detail::wants(self, 0)) {
          auto& gx = self.parents[0]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_g = T(0), mean_gh = T(0);
            for (std::size_t i = 0; i < d; ++i) {
              const T gh = gy[r * d + i] * gv[i];
              mean_g += gh;
              mean_gh += gh * (*xhat)[r * d + i];
            }
            mean_g /= T(d);
            mean_gh /= T(d);
            for (std::size_t i = 0; i < d; ++i) {
              const T gh = gy[r * d + i] * gv[i];
              gx[r * d + i] +=
                  (*inv_std)[r] * (gh - mean_g - (*xhat)[r * d + i] * mean_gh);
            }
          }
        }
        if (detail::wants(self, 1)) {
          auto& gg = self.parents[1]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < d; ++i) gg[i] += gy[r * d + i] * (*xhat)[r * d + i];
        }
        if (detail::wants(self, 2)) {
          auto& gb = self.parents[2]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < d; ++i) gb[i] += gy[r * d + i];
        }
      });
}

// Numerically stable softmax over the last axis.
template <typename T>
Tensor<T> softmax_last(const Tensor<T>& x) {
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.values().data() + r * d;
    T* yr = out.data() + r * d;
    const T mx = *std::max_element(xr, xr + d);
    T sum = T(0);
    for (std::size_t i = 0; i < d; ++i) {
      yr[i] = std::exp(xr[i] - mx);
      sum += yr[i];
    }
    for (std::size_t i = 0; i < d; ++i) yr[i] /= sum;
  }
  return cafe::detail::make_result<T>(
      x.shape(), std::move(out), {x}, [d, rows](detail::Node<T>& self) {
        const auto& y = self.value;
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          T dot = T(0);
          for (std::size_t i = 0; i < d; ++i) dot += self.grad[r * d + i] * y[r * d + i];
          for (std::size_t i = 0; i < d; ++i)
            g[r * d + i] += y[r * d + i] * (self.grad[r * d + i] - dot);
        }
      });
}

// Unit-normalizes each row of the last axis. A zero row is an error.
template <typename T>
Tensor<T> l2_normalize_last(const Tensor<T>& x) {
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  std::vector<T> out(x.numel());
  auto norms = std::make_shared<std::vector<T>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.values().data() + r * d;
    T sq = T(0);
    for (std::size_t i = 0; i < d; ++i) sq += xr[i] * xr[i];
    const T n = std::sqrt(sq);
    if (!(n > T(0)) || !std::isfinite(n)) {
      throw DegenerateError("cannot normalize a zero-magnitude vector (row " +
                            std::to_string(r) + ")");
    }
    (*norms)[r] = n;
    for (std::size_t i = 0; i < d; ++i) out[r * d + i] = xr[i] / n;
  }
  return cafe::detail::make_result<T>(
      x.shape(), std::move(out), {x}, [d, rows, norms](detail::Node<T>& self) {
        const auto& y = self.value;
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          T dot = T(0);
          for (std::size_t i = 0; i < d; ++i) dot += self.grad[r * d + i] * y[r * d + i];
          for (std::size_t i = 0; i < d; ++i)
            g[r * d + i] += (self.grad[r * d + i] - y[r * d + i] * dot) / (*norms)[r];
        }
      });
}

// Mean over the leading axis: [R, ...] -> [...].
template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  if (x.rank() < 2) throw ShapeError("mean_rows: need rank >= 2");
  const std::size_t rows = x.dim(0);
  const std::size_t width = x.numel() / rows;
  Shape shape(x.shape().begin() + 1, x.shape().end());
  std::vector<T> out(width, T(0));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < width; ++i) out[i] += x.values()[r * width + i];
  for (auto& v : out) v /= T(rows);
  return cafe::detail::make_result<T>(
      std::move(shape), std::move(out), {x}, [rows, width](detail::Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t i = 0; i < width; ++i)
            g[r * width + i] += self.grad[i] / T(rows);
      });
}

// a[r, :] / b[r] for a of shape [..., d] and b holding one value per row.
template <typename T>
Tensor<T> div_rows(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t d = a.shape().back();
  const std::size_t rows = a.numel() / d;
  detail::require_same_numel(rows, b.numel(), "div_rows");
  std::vector<T> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < d; ++i) out[r * d + i] = a.values()[r * d + i] / b.values()[r];
  return cafe::detail::make_result<T>(
      a.shape(), std::move(out), {a, b}, [d, rows](detail::Node<T>& self) {
        const auto& av = self.parents[0]->value;
        const auto& bv = self.parents[1]->value;
        if (detail::wants(self, 0)) {
          auto& g = self.parents[0]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < d; ++i) g[r * d + i] += self.grad[r * d + i] / bv[r];
        }
        if (detail::wants(self, 1)) {
          auto& g = self.parents[1]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r) {
            T acc = T(0);
            for (std::size_t i = 0; i < d; ++i) acc += self.grad[r * d + i] * av[r * d + i];
            g[r] -= acc / (bv[r] * bv[r]);
          }
        }
      });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  T acc = T(0);
  for (const T v : x.values()) acc += v;
  return cafe::detail::make_result<T>({1}, {acc}, {x}, [](detail::Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

// Fixed sparse linear resampling shared by every batch slice:
// out[b, o, c] = sum_k weight[o, k] * x[b, index[o, k], c].
template <typename T>
struct SparseMixPlan {
  std::size_t sources = 0;   // S
  std::size_t outputs = 0;   // O
  std::size_t taps = 0;      // K entries per output
  std::vector<std::size_t> index;
  std::vector<T> weight;
};

template <typename T>
Tensor<T> sparse_mix(const Tensor<T>& x, std::shared_ptr<const SparseMixPlan<T>> plan,
                     std::size_t channels) {
  const std::size_t per_batch = plan->sources * channels;
  if (per_batch == 0 || x.numel() % per_batch != 0) {
    throw ShapeError("sparse_mix: input " + shape_str(x.shape()) +
                     " incompatible with plan sources");
  }
  const std::size_t batch = x.numel() / per_batch;
  std::vector<T> out(batch * plan->outputs * channels, T(0));
  const auto& xv = x.values();
  for (std::size_t b = 0; b < batch; ++b) {
    const T* src = xv.data() + b * per_batch;
    T* dst = out.data() + b * plan->outputs * channels;
    for (std::size_t o = 0; o < plan->outputs; ++o) {
      for (std::size_t k = 0; k < plan->taps; ++k) {
        const T w = plan->weight[o * plan->taps + k];
        if (w == T(0)) continue;
        const T* s = src + plan->index[o * plan->taps + k] * channels;
        for (std::size_t c = 0; c < channels; ++c) dst[o * channels + c] += w * s[c];
      }
    }
  }
  return cafe::detail::make_result<T>(
      {batch, plan->outputs, channels}, std::move(out), {x},
      [plan, batch, channels, per_batch](detail::Node<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t b = 0; b < batch; ++b) {
          T* gs = g.data() + b * per_batch;
          const T* gd = self.grad.data() + b * plan->outputs * channels;
          for (std::size_t o = 0; o < plan->outputs; ++o) {
            for (std::size_t k = 0; k < plan->taps; ++k) {
              const T w = plan->weight[o * plan->taps + k];
              if (w == T(0)) continue;
              T* s = gs + plan->index[o * plan->taps + k] * channels;
              for (std::size_t c = 0; c < channels; ++c) s[c] += w * gd[o * channels + c];
            }
          }
        }
      });
}

// Mean softmax cross-entropy over pixels whose label is not `ignore_label`.
// Scores are class-major [M, P]. With no valid pixel the result is 0 and no
// gradient flows.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& scores, std::shared_ptr<const std::vector<int>> labels,
                        int ignore_label) {
  if (scores.rank() != 2) throw ShapeError("cross_entropy: scores must be [M, P]");
  const std::size_t classes = scores.dim(0);
  const std::size_t pixels = scores.dim(1);
  if (labels->size() != pixels) throw ShapeError("cross_entropy: label count");
  const auto& sv = scores.values();
  auto probs = std::make_shared<std::vector<T>>(classes * pixels, T(0));
  std::size_t valid = 0;
  T total = T(0);
  for (std::size_t p = 0; p < pixels; ++p) {
    const int y = (*labels)[p];
    if (y == ignore_label) continue;
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ValidationError("cross_entropy: label " + std::to_string(y) +
                            " outside [0, " + std::to_string(classes) + ")");
    }
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t m = 0; m < classes; ++m) mx = std::max(mx, sv[m * pixels + p]);
    T sum = T(0);
    for (std::size_t m = 0; m < classes; ++m) {
      const T e = std::exp(sv[m * pixels + p] - mx);
      (*probs)[m * pixels + p] = e;
      sum += e;
    }
    for (std::size_t m = 0; m < classes; ++m) (*probs)[m * pixels + p] /= sum;
    total += std::log(sum) + mx - sv[static_cast<std::size_t>(y) * pixels + p];
    ++valid;
  }
  const T loss = valid ? total / T(valid) : T(0);
  return cafe::detail::make_result<T>(
      {1}, {loss}, {scores},
      [labels, probs, classes, pixels, valid, ignore_label](detail::Node<T>& self) {
        if (!valid) return;
        auto& g = self.parents[0]->grad_buffer();
        const T s = self.grad[0] / T(valid);
        for (std::size_t p = 0; p < pixels; ++p) {
          const int y = (*labels)[p];
          if (y == ignore_label) continue;
          for (std::size_t m = 0; m < classes; ++m) {
            T d = (*probs)[m * pixels + p];
            if (static_cast<int>(m) == y) d -= T(1);
            g[m * pixels + p] += s * d;
          }
        }
      });
}

}  // namespace cafe::ops
