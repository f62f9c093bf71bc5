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

// The full segmentation model: encoders -> cost volume -> aggregator ->
// guided class-wise upsampling -> shared reduction -> scores.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cafe/aggregator.hpp"
#include "cafe/backbone.hpp"
#include "cafe/config.hpp"
#include "cafe/cost_volume.hpp"
#include "cafe/upsample_head.hpp"
#include "cafe/vocab.hpp"

namespace cafe {

struct ModelConfig {
  std::uint64_t seed = 0;
  std::size_t patch_size = 16;
  std::size_t embed_dim = 32;  // D; text embeddings are 2D wide
  std::size_t text_buckets = 4096;
  std::size_t text_token_dim = 64;
  AggregatorConfig aggregator;
  JointBilateralConfig upsampler;
  ReduceOrder reduce_order = ReduceOrder::kReduceAfterUp;
  std::vector<std::string> templates{kDefaultPromptTemplates.begin(), kDefaultPromptTemplates.end()};

  void validate() const {
    if (patch_size == 0) throw ConfigError("model: patch_size must be positive");
    if (embed_dim == 0) throw ConfigError("model: embed_dim must be positive");
    aggregator.validate();
    PromptTemplateSet check(templates);
    (void)check;
  }

  bool operator==(const ModelConfig&) const = default;

  static const std::set<std::string>& keys() {
    static const std::set<std::string> k = {
        "seed", "patch_size", "embed_dim", "text_buckets", "text_token_dim", "d_agg", "num_blocks",
        "window_size", "num_heads", "mlp_ratio", "attention", "shift_second", "sigma_color",
        "upsample_radius", "reduce_order", "templates"};
    return k;
  }

  // Reads the [model] section. `templates` is `default`, `@<path>` for a
  // template file, or an inline ` | `-separated list. Relative template
  // paths resolve against `base_dir`.
  static ModelConfig from_ini(const Ini& ini) { return from_ini(ini, ModelConfig{}); }

  static ModelConfig from_ini(const Ini& ini, const ModelConfig& base, const std::string& base_dir = "") {
    const std::string s = "model";
    ModelConfig c = base;
    c.seed = ini.get_int<std::uint64_t>(s, "seed", c.seed);
    c.patch_size = ini.get_int<std::size_t>(s, "patch_size", c.patch_size);
    c.embed_dim = ini.get_int<std::size_t>(s, "embed_dim", c.embed_dim);
    c.text_buckets = ini.get_int<std::size_t>(s, "text_buckets", c.text_buckets);
    c.text_token_dim = ini.get_int<std::size_t>(s, "text_token_dim", c.text_token_dim);
    auto& a = c.aggregator;
    a.d_agg = ini.get_int<std::size_t>(s, "d_agg", a.d_agg);
    a.num_blocks = ini.get_int<std::size_t>(s, "num_blocks", a.num_blocks);
    a.window_size = ini.get_int<std::size_t>(s, "window_size", a.window_size);
    a.num_heads = ini.get_int<std::size_t>(s, "num_heads", a.num_heads);
    a.mlp_ratio = ini.get_int<std::size_t>(s, "mlp_ratio", a.mlp_ratio);
    a.shift_second = ini.get_bool(s, "shift_second", a.shift_second);
    const std::string attn = ini.get_string(s, "attention", attention_variant_name(a.attention_variant));
    if (attn == "full") {
      a.attention_variant = AttentionVariant::kFull;
    } else if (attn == "linear") {
      a.attention_variant = AttentionVariant::kLinear;
    } else {
      throw ConfigError(ini.where(s, "attention") + "expected 'full' or 'linear', got '" + attn + "'");
    }
    c.upsampler.sigma_color = ini.get_double(s, "sigma_color", c.upsampler.sigma_color);
    c.upsampler.radius = ini.get_double(s, "upsample_radius", c.upsampler.radius);
    const std::string order = ini.get_string(s, "reduce_order", reduce_order_name(c.reduce_order));
    if (order == "reduce_after_up") {
      c.reduce_order = ReduceOrder::kReduceAfterUp;
    } else if (order == "reduce_before_up") {
      c.reduce_order = ReduceOrder::kReduceBeforeUp;
    } else {
      throw ConfigError(ini.where(s, "reduce_order") +
                        "expected 'reduce_after_up' or 'reduce_before_up', got '" + order + "'");
    }
    if (ini.has(s, "templates")) {
      const std::string t = ini.get_string(s, "templates", "default");
      try {
        if (t == "default") {
          c.templates = PromptTemplateSet::defaults().templates();
        } else if (!t.empty() && t[0] == '@') {
          std::filesystem::path path(t.substr(1));
          if (path.is_relative() && !base_dir.empty()) path = std::filesystem::path(base_dir) / path;
          c.templates = PromptTemplateSet::load(path.string()).templates();
        } else {
          std::vector<std::string> parts;
          std::size_t start = 0;
          while (true) {
            const auto bar = t.find('|', start);
            parts.push_back(detail::trim(t.substr(start, bar - start)));
            if (bar == std::string::npos) break;
            start = bar + 1;
          }
          c.templates = PromptTemplateSet(parts).templates();
        }
      } catch (const Error& e) {
        throw ConfigError(ini.where(s, "templates") + e.what());
      }
    }
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(ini.origin() + ": " + e.what());
    }
    return c;
  }

  void to_ini(Ini& ini) const {
    const std::string s = "model";
    ini.set(s, "seed", std::to_string(seed));
    ini.set(s, "patch_size", std::to_string(patch_size));
    ini.set(s, "embed_dim", std::to_string(embed_dim));
    ini.set(s, "text_buckets", std::to_string(text_buckets));
    ini.set(s, "text_token_dim", std::to_string(text_token_dim));
    ini.set(s, "d_agg", std::to_string(aggregator.d_agg));
    ini.set(s, "num_blocks", std::to_string(aggregator.num_blocks));
    ini.set(s, "window_size", std::to_string(aggregator.window_size));
    ini.set(s, "num_heads", std::to_string(aggregator.num_heads));
    ini.set(s, "mlp_ratio", std::to_string(aggregator.mlp_ratio));
    ini.set(s, "attention", attention_variant_name(aggregator.attention_variant));
    ini.set(s, "shift_second", aggregator.shift_second ? "true" : "false");
    std::ostringstream sc, ur;
    sc.precision(17);
    ur.precision(17);
    sc << upsampler.sigma_color;
    ur << upsampler.radius;
    ini.set(s, "sigma_color", sc.str());
    ini.set(s, "upsample_radius", ur.str());
    ini.set(s, "reduce_order", reduce_order_name(reduce_order));
    std::string joined;
    for (std::size_t i = 0; i < templates.size(); ++i) joined += (i ? " | " : "") + templates[i];
    ini.set(s, "templates", joined);
  }
};

template <typename T>
class CafeModel {
 public:
  struct Outputs {
    CostVolume<T> cost;
    ProjectedCostVolume<T> aggregated;
    ScoreMaps<T> scores;
  };

  explicit CafeModel(ModelConfig cfg)
      : CafeModel(cfg,
                  std::make_unique<ToyVisionEncoder<T>>(ToyVisionConfig{cfg.patch_size, cfg.embed_dim, cfg.seed}),
                  std::make_unique<ToyTextEncoder<T>>(
                      ToyTextConfig{2 * cfg.embed_dim, cfg.text_buckets, cfg.text_token_dim, cfg.seed + 1})) {}

  // Plug in other encoders; their widths must satisfy text = 2 x vision.
  CafeModel(ModelConfig cfg, std::unique_ptr<VisionEncoder<T>> vision,
            std::unique_ptr<TextEncoder<T>> text)
      : cfg_(cfg),
        templates_(cfg.templates),
        vision_(std::move(vision)),
        text_(std::move(text)),
        aggregator_(with_seed(cfg.aggregator, cfg.seed + 2)),
        upsampler_(std::make_unique<JointBilateralUpsampler<T>>(cfg.upsampler)) {
    cfg_.validate();
    if (text_->dim() != 2 * vision_->dim()) {
      throw ConfigError("text embedding width must be twice the vision width");
    }
    Rng rng(cfg.seed + 3);
    head_ = ReductionHead<T>::make(cfg.aggregator.d_agg, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  const PromptTemplateSet& templates() const { return templates_; }
  VisionEncoder<T>& vision() { return *vision_; }
  const VisionEncoder<T>& vision() const { return *vision_; }
  TextEncoder<T>& text() { return *text_; }
  const TextEncoder<T>& text() const { return *text_; }
  Aggregator<T>& aggregator() { return aggregator_; }
  const Aggregator<T>& aggregator() const { return aggregator_; }
  ReductionHead<T>& head() { return head_; }
  const ReductionHead<T>& head() const { return head_; }
  const GuidedUpsampler<T>& upsampler() const { return *upsampler_; }
  void set_upsampler(std::unique_ptr<GuidedUpsampler<T>> up) { upsampler_ = std::move(up); }

  // Ensembled, unit-norm embeddings for the given class names: [M, 2D].
  Tensor<T> embed_classes(const std::vector<std::string>& names) const {
    return embed_vocabulary<T>(names, templates_, *text_);
  }

  CostVolume<T> cost_volume(const Image& image, const Tensor<T>& embeddings) const {
    const VisionFeatures<T> f = vision_->encode(image);
    return build_cost_volume(dense_descriptors(f), f.grid_h, f.grid_w, embeddings);
  }

  Outputs forward(const Image& image, const Tensor<T>& embeddings) const {
    return forward(image, embeddings, cfg_.reduce_order);
  }

  Outputs forward(const Image& image, const Tensor<T>& embeddings, ReduceOrder order) const {
    CostVolume<T> cost = cost_volume(image, embeddings);
    ProjectedCostVolume<T> agg = aggregator_.aggregate(cost);
    ScoreMaps<T> scores = score_maps(image, agg, *upsampler_, head_, order);
    return {std::move(cost), std::move(agg), std::move(scores)};
  }

  ScoreMaps<T> scores(const Image& image, const Tensor<T>& embeddings) const {
    return forward(image, embeddings).scores;
  }

  SegmentationMask predict(const Image& image, const Tensor<T>& embeddings) const {
    return argmax_classes(scores(image, embeddings));
  }

  // Every parameter, in a fixed order, tagged by group.
  ParamList<T> parameters() const {
    ParamList<T> out;
    vision_->collect(out);
    text_->collect(out);
    aggregator_.collect(out);
    head_.collect(out);
    return out;
  }

  // Marks frozen groups as not requiring gradients.
  void apply_freeze(const FreezePolicy& policy) {
    for (auto& p : parameters()) {
      bool trainable = true;
      if (p.group == ParamGroup::kVision) trainable = policy.last_two_vision_blocks_trainable;
      if (p.group == ParamGroup::kText) trainable = policy.text_encoder_trainable;
      p.tensor.set_requires_grad(trainable);
    }
  }

 private:
  static AggregatorConfig with_seed(AggregatorConfig a, std::uint64_t seed) {
    a.seed = seed;
    return a;
  }

  ModelConfig cfg_;
  PromptTemplateSet templates_;
  std::unique_ptr<VisionEncoder<T>> vision_;
  std::unique_ptr<TextEncoder<T>> text_;
  Aggregator<T> aggregator_;
  ReductionHead<T> head_;
  std::unique_ptr<GuidedUpsampler<T>> upsampler_;
};

}  // namespace cafe
