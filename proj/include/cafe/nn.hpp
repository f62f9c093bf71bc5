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
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cafe/ops.hpp"
#include "cafe/tensor.hpp"

namespace cafe {

// Seeded generator with a platform-independent normal transform, so that
// parameter initialization is reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Components with independent learning rates and freezing switches.
enum class ParamGroup { kHead, kVision, kText };

inline const char* param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kHead: return "head";
    case ParamGroup::kVision: return "vision";
    case ParamGroup::kText: return "text";
  }
  return "?";
}

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
  ParamGroup group;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

template <typename T>
Tensor<T> normal_param(Shape shape, double stddev, Rng& rng) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.normal() * stddev);
  return Tensor<T>(std::move(shape), std::move(v), true);
}

template <typename T>
Tensor<T> constant_param(Shape shape, T value) {
  std::vector<T> v(shape_numel(shape), value);
  return Tensor<T>(std::move(shape), std::move(v), true);
}

template <typename T>
struct Linear {
  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]

  static Linear make(std::size_t in, std::size_t out, double stddev, Rng& rng) {
    return {normal_param<T>({out, in}, stddev, rng), constant_param<T>({out}, T(0))};
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return ops::linear(x, weight, bias); }

  void collect(const std::string& prefix, ParamGroup group, ParamList<T>& out) const {
    out.push_back({prefix + ".weight", weight, group});
    out.push_back({prefix + ".bias", bias, group});
  }

  void zero() {
    std::fill(weight.mutable_values().begin(), weight.mutable_values().end(), T(0));
    std::fill(bias.mutable_values().begin(), bias.mutable_values().end(), T(0));
  }
};

template <typename T>
struct LayerNorm {
  Tensor<T> gamma;
  Tensor<T> beta;

  static LayerNorm make(std::size_t dim) {
    return {constant_param<T>({dim}, T(1)), constant_param<T>({dim}, T(0))};
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return ops::layer_norm(x, gamma, beta); }

  void collect(const std::string& prefix, ParamGroup group, ParamList<T>& out) const {
    out.push_back({prefix + ".gamma", gamma, group});
    out.push_back({prefix + ".beta", beta, group});
  }
};

// Two-layer perceptron with GELU, hidden width = ratio * dim.
template <typename T>
struct Mlp {
  Linear<T> fc1;
  Linear<T> fc2;

  static Mlp make(std::size_t dim, std::size_t hidden, Rng& rng) {
    return {Linear<T>::make(dim, hidden, 0.02, rng), Linear<T>::make(hidden, dim, 0.02, rng)};
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return fc2(ops::gelu(fc1(x))); }

  void collect(const std::string& prefix, ParamGroup group, ParamList<T>& out) const {
    fc1.collect(prefix + ".fc1", group, out);
    fc2.collect(prefix + ".fc2", group, out);
  }
};

struct AdamWConfig {
  double lr_head = 2e-4;
  double lr_backbone = 2e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// Decoupled-weight-decay Adam. Parameters whose group is not in `trainable`
// are never touched, not even by weight decay.
template <typename T>
class AdamW {
 public:
  AdamW(ParamList<T> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
      m_.emplace_back(p.tensor.numel(), 0.0);
      v_.emplace_back(p.tensor.numel(), 0.0);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  double lr_for(ParamGroup g) const {
    return g == ParamGroup::kHead ? cfg_.lr_head : cfg_.lr_backbone;
  }

  void step(const std::vector<ParamGroup>& trainable) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (std::find(trainable.begin(), trainable.end(), p.group) == trainable.end()) continue;
      const double lr = lr_for(p.group);
      if (lr == 0.0) continue;
      auto& values = p.tensor.mutable_values();
      const auto& grad = p.tensor.grad();
      for (std::size_t k = 0; k < values.size(); ++k) {
        const double g = grad.empty() ? 0.0 : static_cast<double>(grad[k]);
        m_[i][k] = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * g;
        v_[i][k] = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m_[i][k] / bc1;
        const double vhat = v_[i][k] / bc2;
        double w = static_cast<double>(values[k]);
        w -= lr * cfg_.weight_decay * w;
        w -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        values[k] = static_cast<T>(w);
      }
    }
  }

  const AdamWConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return t_; }

 private:
  ParamList<T> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;
};

}  // namespace cafe
