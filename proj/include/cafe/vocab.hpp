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

// Class vocabularies, prompt templates, dataset-specific class renaming,
// and ensembled text embeddings.

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cafe/error.hpp"
#include "cafe/ops.hpp"
#include "cafe/tensor.hpp"

namespace cafe {

// Cleaned COCO-Stuff class names (80 things followed by 91 stuff classes).
inline constexpr std::array<std::string_view, 171> kCocoStuffClasses = {
    "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train",
    "truck", "boat", "traffic light", "fire hydrant", "stop sign",
    "parking meter", "bench", "bird", "cat", "dog", "horse", "sheep", "cow",
    "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella", "handbag",
    "tie", "suitcase", "frisbee", "skis", "snowboard", "sports ball", "kite",
    "baseball bat", "baseball glove", "skateboard", "surfboard",
    "tennis racket", "bottle", "wine glass", "cup", "fork", "knife", "spoon",
    "bowl", "banana", "apple", "sandwich", "orange", "broccoli", "carrot",
    "hot dog", "pizza", "donut", "cake", "chair", "couch", "potted plant",
    "bed", "dining table", "toilet", "tv", "laptop", "mouse", "remote",
    "keyboard", "cell phone", "microwave", "oven", "toaster", "sink",
    "refrigerator", "book", "clock", "vase", "scissors", "teddy bear",
    "hair drier", "toothbrush", "banner", "blanket", "branch", "bridge",
    "building", "bush", "cabinet", "cage", "cardboard", "carpet", "ceiling",
    "tile ceiling", "cloth", "clothes", "clouds", "counter", "cupboard",
    "curtain", "desk", "dirt", "door", "fence", "marble floor", "floor",
    "stone floor", "tile floor", "wood floor", "flower", "fog", "food",
    "fruit", "furniture", "grass", "gravel", "ground", "hill", "house",
    "leaves", "light", "mat", "metal", "mirror", "moss", "mountain", "mud",
    "napkin", "net", "paper", "pavement", "pillow", "plant", "plastic",
    "platform", "playing field", "railing", "railroad", "river", "road",
    "rock", "roof", "rug", "salad", "sand", "sea", "shelf", "sky",
    "skyscraper", "snow", "solid", "stairs", "stone", "straw", "structural",
    "table", "tent", "textile", "towel", "tree", "vegetable", "brick wall",
    "concrete wall", "wall", "panel wall", "stone wall", "tile wall",
    "wood wall", "water", "waterdrops", "window blind", "window", "wood"};

// Remote-sensing-relevant COCO-Stuff subset used for training.
inline constexpr std::array<std::string_view, 41> kRemoteSensingSubset = {
    "bicycle", "car", "motorcycle", "airplane", "bus", "train", "truck",
    "boat", "bridge", "building", "bush", "dirt", "fence", "grass", "gravel",
    "ground", "hill", "house", "leaves", "metal", "mountain", "mud",
    "pavement", "plant", "platform", "playing field", "railing", "railroad",
    "river", "road", "rock", "roof", "sand", "sea", "skyscraper", "snow",
    "stone", "structural", "tree", "water", "wood"};

// Prompt wrappers ensembled for every class name.
inline constexpr std::array<std::string_view, 10> kDefaultPromptTemplates = {
    "a photo of {}", "an image of {}", "a photograph of {}", "a picture of {}",
    "a photo of a {}", "an image of a {}", "a photo of the {}",
    "an image of the {}", "a close-up photo of {}",
    "a cropped image featuring {}"};

inline constexpr std::string_view kPlaceholder = "{}";

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace detail

// Ordered, index-stable list of class names.
class ClassVocabulary {
 public:
  ClassVocabulary() = default;

  explicit ClassVocabulary(std::vector<std::string> names, bool background_included = false,
                           std::optional<std::string> remap_source = std::nullopt)
      : names_(std::move(names)),
        background_included_(background_included),
        remap_source_(std::move(remap_source)) {
    if (names_.empty()) throw ValidationError("vocabulary must contain at least one class");
    std::set<std::string> seen;
    for (const auto& n : names_) {
      if (n.empty()) throw ValidationError("vocabulary contains an empty class name");
      if (!seen.insert(n).second) throw ValidationError("duplicate class name '" + n + "'");
    }
  }

  template <std::size_t N>
  static ClassVocabulary from(const std::array<std::string_view, N>& names) {
    return ClassVocabulary(std::vector<std::string>(names.begin(), names.end()));
  }

  // One class per line; blank lines are skipped, surrounding spaces trimmed.
  static ClassVocabulary load(const std::string& path) {
    std::vector<std::string> names;
    for (const auto& line : detail::read_lines(path)) {
      auto t = detail::trim(line);
      if (!t.empty()) names.push_back(std::move(t));
    }
    if (names.empty()) throw ValidationError("vocabulary file " + path + " has no classes");
    return ClassVocabulary(std::move(names));
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& n : names_) out << n << '\n';
  }

  std::size_t size() const { return names_.size(); }
  const std::string& operator[](std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }
  bool background_included() const { return background_included_; }
  const std::optional<std::string>& remap_source() const { return remap_source_; }

  std::optional<std::size_t> index_of(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  }

  bool operator==(const ClassVocabulary& o) const { return names_ == o.names_; }

 private:
  std::vector<std::string> names_;
  bool background_included_ = false;
  std::optional<std::string> remap_source_;
};

class PromptTemplateSet {
 public:
  explicit PromptTemplateSet(std::vector<std::string> templates)
      : templates_(std::move(templates)) {
    if (templates_.empty()) throw ValidationError("prompt template set is empty");
    for (const auto& t : templates_) {
      const auto n = detail::count_occurrences(t, kPlaceholder);
      if (n != 1) {
        throw ValidationError("prompt template '" + t + "' must contain the placeholder {} exactly once (found " +
                              std::to_string(n) + ")");
      }
    }
  }

  static PromptTemplateSet defaults() {
    return PromptTemplateSet(
        std::vector<std::string>(kDefaultPromptTemplates.begin(), kDefaultPromptTemplates.end()));
  }

  static PromptTemplateSet load(const std::string& path) {
    std::vector<std::string> templates;
    for (const auto& line : detail::read_lines(path)) {
      auto t = detail::trim(line);
      if (!t.empty() && t.front() != '#') templates.push_back(std::move(t));
    }
    return PromptTemplateSet(std::move(templates));
  }

  std::size_t size() const { return templates_.size(); }
  const std::vector<std::string>& templates() const { return templates_; }

 private:
  std::vector<std::string> templates_;
};

inline std::vector<std::string> render_prompts(const std::string& class_name,
                                               const PromptTemplateSet& templates) {
  if (class_name.empty()) throw ValidationError("class name is empty");
  std::vector<std::string> out;
  out.reserve(templates.size());
  for (const auto& t : templates.templates()) {
    std::string s = t;
    s.replace(s.find(kPlaceholder), kPlaceholder.size(), class_name);
    out.push_back(std::move(s));
  }
  return out;
}

// Anything that maps a batch of prompts to a [P, dim] embedding tensor.
template <typename E, typename T>
concept TextEncoderFor = requires(const E& e, const std::vector<std::string>& prompts) {
  { e.encode(prompts) } -> std::same_as<Tensor<T>>;
  { e.dim() } -> std::convertible_to<std::size_t>;
};

// Mean of the per-prompt embeddings, then one L2 normalization.
template <typename T, typename Encoder>
  requires TextEncoderFor<Encoder, T>
Tensor<T> ensemble_embed(const std::string& class_name, const PromptTemplateSet& templates,
                         const Encoder& encoder) {
  const auto prompts = render_prompts(class_name, templates);
  Tensor<T> per_prompt = encoder.encode(prompts);
  Tensor<T> mean = ops::mean_rows(per_prompt);
  try {
    return ops::l2_normalize_last(mean);
  } catch (const DegenerateError&) {
    throw DegenerateError("ensembled embedding for '" + class_name + "' has zero magnitude");
  }
}

// Stacks ensembled embeddings of every vocabulary class into [M, dim].
template <typename T, typename Encoder>
  requires TextEncoderFor<Encoder, T>
Tensor<T> embed_vocabulary(const std::vector<std::string>& classes,
                           const PromptTemplateSet& templates, const Encoder& encoder) {
  if (classes.empty()) throw ValidationError("no classes to embed");
  std::vector<std::string> prompts;
  for (const auto& c : classes) {
    auto p = render_prompts(c, templates);
    prompts.insert(prompts.end(), p.begin(), p.end());
  }
  const std::size_t per_class = templates.size();
  const std::size_t m = classes.size();
  Tensor<T> all = encoder.encode(prompts);  // [M * P, dim]
  const std::size_t dim = all.shape().back();
  // [M*P, dim] -> [P, M, dim] so that mean_rows averages templates.
  auto map = std::make_shared<std::vector<ops::Index>>();
  map->reserve(all.numel());
  for (std::size_t p = 0; p < per_class; ++p)
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t d = 0; d < dim; ++d)
        map->push_back(static_cast<ops::Index>((c * per_class + p) * dim + d));
  Tensor<T> grouped = ops::gather(all, {per_class, m, dim}, map);
  Tensor<T> mean = ops::mean_rows(grouped);
  try {
    return ops::l2_normalize_last(mean);
  } catch (const DegenerateError& e) {
    throw DegenerateError(std::string("ensembled class embedding is degenerate: ") + e.what());
  }
}

inline constexpr std::string_view kBuiltinRemapRegistry =
    "# dataset_id<TAB>raw_name<TAB>prompt_name\n"
    "# A raw_name of @background records the dataset's background/clutter class.\n"
    "loveda\tforest\ttree\n"
    "loveda\tagriculture\tfarm\n"
    "loveda\t@background\tbackground\n"
    "oem\tbareland\tbarren\n"
    "oem\trangeland\tgrass\n"
    "oem\tdeveloped space\tpavement\n"
    "oem\tagriculture land\tcropland\n"
    "oem\t@background\tbackground\n"
    "potsdam\t@background\tclutter\n"
    "vaihingen\t@background\tclutter\n";

// Per-dataset class-name substitutions loaded from a tab-separated file.
class RemapRegistry {
 public:
  static constexpr std::string_view kIdentity = "identity";
  static constexpr std::string_view kBackgroundKey = "@background";

  static RemapRegistry parse(std::istream& in, const std::string& origin = "<registry>") {
    RemapRegistry reg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto t = detail::trim(line);
      if (t.empty() || t.front() == '#') continue;
      std::vector<std::string> fields;
      std::stringstream ss(line);
      std::string f;
      while (std::getline(ss, f, '\t')) fields.push_back(detail::trim(f));
      if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected dataset<TAB>raw_name<TAB>new_name");
      }
      if (fields[1] == kBackgroundKey) {
        reg.background_[fields[0]] = fields[2];
      } else {
        reg.table_[fields[0]][fields[1]] = fields[2];
      }
    }
    return reg;
  }

  // Same content as data/remap_registry.tsv.
  static RemapRegistry builtin() {
    std::istringstream in{std::string(kBuiltinRemapRegistry)};
    return parse(in, "<builtin registry>");
  }

  static RemapRegistry load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open remap registry " + path);
    return parse(in, path);
  }

  bool knows(const std::string& dataset_id) const {
    return dataset_id == kIdentity || table_.count(dataset_id) || background_.count(dataset_id);
  }

  std::vector<std::string> remap(const std::string& dataset_id,
                                 const std::vector<std::string>& raw_names) const {
    if (!knows(dataset_id)) throw ValidationError("unknown remap dataset '" + dataset_id + "'");
    std::vector<std::string> out = raw_names;
    auto it = table_.find(dataset_id);
    if (it == table_.end()) return out;
    for (auto& n : out) {
      auto hit = it->second.find(n);
      if (hit != it->second.end()) n = hit->second;
    }
    return out;
  }

  // Name of the dataset's background class, if the registry records one.
  std::optional<std::string> background_class(const std::string& dataset_id) const {
    auto it = background_.find(dataset_id);
    if (it == background_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<std::string> datasets() const {
    std::set<std::string> ids;
    for (const auto& [k, _] : table_) ids.insert(k);
    for (const auto& [k, _] : background_) ids.insert(k);
    return {ids.begin(), ids.end()};
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> table_;
  std::map<std::string, std::string> background_;
};

inline std::vector<std::string> remap_class_names(const RemapRegistry& registry,
                                                  const std::string& dataset_id,
                                                  const std::vector<std::string>& raw_names) {
  return registry.remap(dataset_id, raw_names);
}

}  // namespace cafe
