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

// Confusion matrices, per-class IoU / mIoU with and without the background
// class, and directory-level evaluation.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cafe/dataset.hpp"
#include "cafe/error.hpp"
#include "cafe/image.hpp"
#include "cafe/image_io.hpp"
#include "cafe/inference.hpp"
#include "cafe/vocab.hpp"

namespace cafe {

// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
    if (classes == 0) throw ValidationError("confusion matrix needs at least one class");
  }

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * classes_ + pred]; }
  std::uint64_t ignored_pixels() const { return ignored_; }
  std::uint64_t counted_pixels() const {
    std::uint64_t n = 0;
    for (auto c : counts_) n += c;
    return n;
  }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  void accumulate(const SegmentationMask& pred, const SegmentationMask& gt) {
    if (pred.height != gt.height || pred.width != gt.width) {
      throw ValidationError("prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                            " does not match ground truth " + std::to_string(gt.height) + "x" +
                            std::to_string(gt.width));
    }
    for (std::size_t p = 0; p < gt.labels.size(); ++p) {
      const int g = gt.labels[p];
      if (g == gt.ignore_label) {
        ++ignored_;
        continue;
      }
      const int q = pred.labels[p];
      if (g < 0 || static_cast<std::size_t>(g) >= classes_) {
        throw ValidationError("ground-truth label " + std::to_string(g) + " outside [0, " +
                              std::to_string(classes_) + ")");
      }
      if (q < 0 || static_cast<std::size_t>(q) >= classes_) {
        throw ValidationError("predicted label " + std::to_string(q) + " outside [0, " +
                              std::to_string(classes_) + ")");
      }
      ++counts_[static_cast<std::size_t>(g) * classes_ + static_cast<std::size_t>(q)];
    }
  }

  void merge(const ConfusionMatrix& other) {
    if (other.classes_ != classes_) throw ValidationError("cannot merge confusion matrices of different size");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    ignored_ += other.ignored_;
  }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t ignored_ = 0;
};

inline ConfusionMatrix accumulate(const SegmentationMask& pred, const SegmentationMask& gt, ConfusionMatrix cm) {
  cm.accumulate(pred, gt);
  return cm;
}

enum class BackgroundMode { kWithBackground, kWithoutBackground };

inline const char* background_mode_name(BackgroundMode m) {
  return m == BackgroundMode::kWithBackground ? "with_background" : "without_background";
}

struct MetricsReport {
  std::vector<std::size_t> class_indices;           // into the original vocabulary
  std::vector<std::optional<double>> per_class_iou;  // nullopt when undefined
  double miou = 0.0;
  BackgroundMode mode = BackgroundMode::kWithBackground;
};

// IoU_c = tp / (row + col - tp). Undefined classes are left out of the mean.
// Without background, the background row and column are removed first.
inline MetricsReport miou(const ConfusionMatrix& cm, BackgroundMode mode,
                          std::optional<std::size_t> background_index = std::nullopt) {
  MetricsReport r;
  r.mode = mode;
  const std::size_t M = cm.classes();
  std::vector<std::size_t> keep;
  if (mode == BackgroundMode::kWithoutBackground) {
    if (!background_index || *background_index >= M) {
      throw ValidationError("without-background mode needs a valid background class index");
    }
  }
  for (std::size_t c = 0; c < M; ++c) {
    if (mode == BackgroundMode::kWithoutBackground && c == *background_index) continue;
    keep.push_back(c);
  }
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t c : keep) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t k : keep) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t denom = row + col - tp;
    r.class_indices.push_back(c);
    if (denom == 0) {
      r.per_class_iou.push_back(std::nullopt);
      continue;
    }
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    r.per_class_iou.push_back(iou);
    sum += iou;
    ++defined;
  }
  if (defined == 0) throw UndefinedMetricError("every class IoU is undefined (no labelled or predicted pixels)");
  r.miou = sum / static_cast<double>(defined);
  return r;
}

inline std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
  return buf;
}

inline std::string report_table(const MetricsReport& r, const std::vector<std::string>& names) {
  std::size_t width = 5;
  for (auto c : r.class_indices) width = std::max(width, names.at(c).size());
  std::ostringstream os;
  os << "mode: " << background_mode_name(r.mode) << '\n';
  auto row = [&](const std::string& name, const std::string& value) {
    os << name << std::string(width - name.size() + 2, ' ') << value << '\n';
  };
  row("class", "IoU (%)");
  for (std::size_t k = 0; k < r.class_indices.size(); ++k) {
    const auto& iou = r.per_class_iou[k];
    row(names.at(r.class_indices[k]), iou ? format_percent(*iou) : "n/a");
  }
  row("mIoU", format_percent(r.miou));
  return os.str();
}

inline std::string report_key_values(const MetricsReport& r, const std::vector<std::string>& names) {
  std::ostringstream os;
  os << "mode=" << background_mode_name(r.mode) << '\n';
  for (std::size_t k = 0; k < r.class_indices.size(); ++k) {
    const auto& iou = r.per_class_iou[k];
    os << names.at(r.class_indices[k]) << '=' << (iou ? format_percent(*iou) : "nan") << '\n';
  }
  os << "miou=" << format_percent(r.miou) << '\n';
  return os.str();
}

// Predicts a mask for an image; the ground truth is passed only so oracle
// predictors can be plugged in.
using MaskPredictor = std::function<SegmentationMask(const Image&, const SegmentationMask&)>;

struct DirectoryEvaluation {
  ConfusionMatrix confusion;
  std::size_t images = 0;
  std::size_t skipped = 0;  // images without a mask
  std::vector<std::string> skipped_names;
};

inline DirectoryEvaluation evaluate_directory(const std::string& dir, const ClassVocabulary& vocab,
                                              const MaskPredictor& predict) {
  const auto entries = list_dataset(dir);
  if (entries.empty()) throw ValidationError("dataset directory " + dir + " contains no images");
  DirectoryEvaluation ev{ConfusionMatrix(vocab.size()), 0, 0, {}};
  for (const auto& e : entries) {
    if (!e.mask_path) {
      ++ev.skipped;
      ev.skipped_names.push_back(e.name);
      continue;
    }
    const Image img = io::read_image(e.image_path);
    const SegmentationMask gt = io::read_mask(*e.mask_path);
    if (gt.height != img.height || gt.width != img.width) {
      throw ValidationError("mask for " + e.name + " does not match the image size");
    }
    ev.confusion.accumulate(predict(img, gt), gt);
    ++ev.images;
  }
  if (ev.images == 0) throw ValidationError("dataset directory " + dir + " has no image with a mask");
  return ev;
}

// Model-backed evaluation. Class names are remapped for `dataset_id` before
// prompting; mask indices keep referring to `vocab`.
template <typename T>
DirectoryEvaluation evaluate_directory(const std::string& dir, const ClassVocabulary& vocab,
                                       const CafeModel<T>& model, const SlidingWindowConfig& window,
                                       const RemapRegistry& registry, const std::string& dataset_id) {
  Tensor<T> embeddings;
  {
    NoGradGuard guard;
    embeddings = model.embed_classes(remap_class_names(registry, dataset_id, vocab.names()));
  }
  const ScoreFunction<T> score = model_scorer(model, embeddings);
  return evaluate_directory(dir, vocab, [&](const Image& img, const SegmentationMask&) {
    return predict_full(img, score, window);
  });
}

}  // namespace cafe
