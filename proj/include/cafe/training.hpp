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

// Supervised training: class-subset filtering, per-pixel cross-entropy and
// AdamW steps restricted to the trainable parameter groups.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cafe/dataset.hpp"
#include "cafe/error.hpp"
#include "cafe/image.hpp"
#include "cafe/model.hpp"
#include "cafe/nn.hpp"
#include "cafe/ops.hpp"
#include "cafe/vocab.hpp"

namespace cafe {

struct TrainConfig {
  std::size_t batch_size = 4;
  std::size_t iterations = 200;
  std::size_t train_resolution = 64;  // 0 keeps the input size
  AdamWConfig optimizer;
  FreezePolicy freeze;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0 = only at the end

  void validate(std::size_t patch_size) const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (iterations < 1) throw ConfigError("train: iterations must be >= 1");
    if (train_resolution % patch_size != 0) {
      throw ConfigError("train: train_resolution " + std::to_string(train_resolution) +
                        " is not divisible by patch_size " + std::to_string(patch_size));
    }
    if (optimizer.lr_head < 0 || optimizer.lr_backbone < 0) throw ConfigError("train: learning rates must be >= 0");
    if (optimizer.weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
  }
};

// Maps raw labels to indices into `keep`; classes outside it become ignore.
inline SegmentationMask filter_subset(const SegmentationMask& raw, const ClassVocabulary& keep,
                                      const ClassVocabulary& raw_vocab) {
  if (keep.size() == 0) throw ConfigError("class subset is empty");
  std::vector<int> lut(raw_vocab.size(), raw.ignore_label);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto idx = raw_vocab.index_of(keep[k]);
    if (!idx) throw ConfigError("subset class '" + keep[k] + "' is not in the raw vocabulary");
    lut[*idx] = static_cast<int>(k);
  }
  SegmentationMask out = raw;
  for (auto& l : out.labels) {
    if (l == raw.ignore_label) continue;
    if (l < 0 || static_cast<std::size_t>(l) >= lut.size()) {
      throw ValidationError("raw label " + std::to_string(l) + " outside the raw vocabulary");
    }
    l = lut[static_cast<std::size_t>(l)];
  }
  return out;
}

// Uniform sample without replacement; the result keeps raw order.
inline ClassVocabulary sample_random_subset(const ClassVocabulary& raw, std::size_t size, std::uint64_t seed) {
  if (size < 1 || size > raw.size()) {
    throw ValidationError("subset size " + std::to_string(size) + " outside [1, " + std::to_string(raw.size()) + "]");
  }
  std::vector<std::size_t> idx(raw.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(raw.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> names;
  for (auto i : idx) names.push_back(raw[i]);
  return ClassVocabulary(std::move(names));
}

template <typename T>
struct LossResult {
  Tensor<T> loss;  // scalar
  std::size_t valid_pixels = 0;
  bool all_ignored = false;
};

template <typename T>
LossResult<T> compute_loss(const ScoreMaps<T>& scores, const SegmentationMask& mask) {
  if (scores.height != mask.height || scores.width != mask.width) {
    throw ShapeError("loss: score maps " + std::to_string(scores.height) + "x" + std::to_string(scores.width) +
                     " vs mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width));
  }
  auto labels = std::make_shared<const std::vector<int>>(mask.labels);
  const std::size_t valid = static_cast<std::size_t>(
      std::count_if(mask.labels.begin(), mask.labels.end(), [&](int l) { return l != mask.ignore_label; }));
  Tensor<T> flat = scores.values.reshape({scores.classes, scores.height * scores.width});
  return {ops::cross_entropy(flat, labels, mask.ignore_label), valid, valid == 0};
}

inline TrainingSample resize_sample(const TrainingSample& s, std::size_t resolution) {
  if (resolution == 0 || (s.image.height == resolution && s.image.width == resolution)) return s;
  return {resize_bilinear(s.image, resolution, resolution), resize_nearest(s.mask, resolution, resolution)};
}

template <typename T>
class Trainer {
 public:
  Trainer(CafeModel<T>& model, std::vector<std::string> class_names, TrainConfig cfg)
      : model_(model), class_names_(std::move(class_names)), cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate(model_.config().patch_size);
    ClassVocabulary check(class_names_);
    model_.apply_freeze(cfg_.freeze);
    trainable_.push_back(ParamGroup::kHead);
    if (cfg_.freeze.last_two_vision_blocks_trainable) trainable_.push_back(ParamGroup::kVision);
    if (cfg_.freeze.text_encoder_trainable) trainable_.push_back(ParamGroup::kText);
    optimizer_ = std::make_unique<AdamW<T>>(model_.parameters(), cfg_.optimizer);
  }

  const TrainConfig& config() const { return cfg_; }
  const std::vector<ParamGroup>& trainable_groups() const { return trainable_; }
  std::size_t steps() const { return step_; }

  // One optimizer step on the mean loss over the batch. Returns that loss.
  double train_step(const std::vector<TrainingSample>& batch) {
    if (batch.empty()) throw ValidationError("training batch is empty");
    optimizer_->zero_grad();
    const Tensor<T> embeddings = class_embeddings();
    Tensor<T> total;
    std::size_t counted = 0;
    for (const auto& raw : batch) {
      const TrainingSample s = resize_sample(raw, cfg_.train_resolution);
      for (int l : s.mask.labels) {
        if (l != s.mask.ignore_label && (l < 0 || static_cast<std::size_t>(l) >= class_names_.size())) {
          throw ValidationError("mask label " + std::to_string(l) + " outside the training vocabulary");
        }
      }
      const auto out = model_.forward(s.image, embeddings, ReduceOrder::kReduceAfterUp);
      LossResult<T> r = compute_loss(out.scores, s.mask);
      if (r.all_ignored) continue;
      total = counted == 0 ? r.loss : ops::add(total, r.loss);
      ++counted;
    }
    double value = 0.0;
    if (counted > 0) {
      total = ops::scale(total, T(1) / static_cast<T>(counted));
      value = static_cast<double>(total.item());
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss " + std::to_string(value) + " at step " + std::to_string(step_));
      }
      total.backward();
    }
    optimizer_->step(trainable_);
    ++step_;
    return value;
  }

  // Runs `cfg.iterations` steps over epoch-wise seeded shuffles of `data`.
  // `on_step(step, loss)` is called after every step.
  template <typename Callback>
  std::vector<double> fit(const std::vector<TrainingSample>& data, Callback&& on_step) {
    if (data.empty()) throw ValidationError("training set is empty");
    std::vector<double> losses;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    for (std::size_t it = 0; it < cfg_.iterations; ++it) {
      std::vector<TrainingSample> batch;
      while (batch.size() < cfg_.batch_size) {
        if (cursor == order.size()) {
          order.resize(data.size());
          std::iota(order.begin(), order.end(), 0);
          for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng_.below(i))]);
          }
          cursor = 0;
        }
        batch.push_back(data[order[cursor++]]);
      }
      losses.push_back(train_step(batch));
      on_step(step_, losses.back());
    }
    return losses;
  }

  std::vector<double> fit(const std::vector<TrainingSample>& data) {
    return fit(data, [](std::size_t, double) {});
  }

 private:
  Tensor<T> class_embeddings() {
    if (cfg_.freeze.text_encoder_trainable) return model_.embed_classes(class_names_);
    if (!cached_text_.defined()) {
      NoGradGuard guard;
      cached_text_ = model_.embed_classes(class_names_);
    }
    return cached_text_;
  }

  CafeModel<T>& model_;
  std::vector<std::string> class_names_;
  TrainConfig cfg_;
  Rng rng_;
  std::vector<ParamGroup> trainable_;
  std::unique_ptr<AdamW<T>> optimizer_;
  Tensor<T> cached_text_;
  std::size_t step_ = 0;
};

// Writes one `step<TAB>loss` line.
inline void log_step(std::ostream& os, std::size_t step, double loss) {
  std::ostringstream line;
  line.precision(10);
  line << step << '\t' << loss << '\n';
  os << line.str();
}

}  // namespace cafe
