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

// Command-line front end: train, predict, eval, export-costmaps,
// prepare-subset and make-synthetic. Exit codes are 0 on success, 1 for
// usage or configuration errors and 2 for failures at run time.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cafe/checkpoint.hpp"
#include "cafe/config.hpp"
#include "cafe/cost_volume.hpp"
#include "cafe/dataset.hpp"
#include "cafe/evaluation.hpp"
#include "cafe/inference.hpp"
#include "cafe/model.hpp"
#include "cafe/training.hpp"
#include "cafe/vocab.hpp"

namespace cafe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

namespace fs = std::filesystem;

// Everything a config file can set. Paths are resolved against the config
// file's directory.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SlidingWindowConfig window;
  std::string dataset;  // directory, or "synthetic"
  std::string classes;
  std::string raw_classes;
  SyntheticConfig synthetic;
  std::string registry;
  std::string dataset_id{RemapRegistry::kIdentity};
  std::string background_prompt;
};

inline std::string resolve_path(const std::string& base_dir, const std::string& p) {
  if (p.empty() || p == "synthetic" || fs::path(p).is_absolute() || base_dir.empty()) return p;
  return (fs::path(base_dir) / p).string();
}

inline RunConfig parse_run_config(const Ini& ini, const std::string& base_dir = "") {
  static const std::map<std::string, std::set<std::string>> allowed = {
      {"model", ModelConfig::keys()},
      {"train",
       {"dataset", "classes", "raw_classes", "batch_size", "iterations", "train_resolution", "lr_head",
        "lr_backbone", "weight_decay", "vision_trainable", "text_trainable", "seed", "checkpoint_every",
        "synthetic_count", "synthetic_size", "synthetic_classes", "synthetic_noise"}},
      {"eval", {"eval_size", "window", "stride", "dataset_id", "registry", "background_prompt"}}};
  ini.check_keys(allowed);
  RunConfig rc;
  rc.model = ModelConfig::from_ini(ini, ModelConfig{}, base_dir);
  const std::string t = "train";
  auto& tc = rc.train;
  rc.dataset = resolve_path(base_dir, ini.get_string(t, "dataset", ""));
  rc.classes = resolve_path(base_dir, ini.get_string(t, "classes", ""));
  rc.raw_classes = resolve_path(base_dir, ini.get_string(t, "raw_classes", ""));
  tc.batch_size = ini.get_int<std::size_t>(t, "batch_size", tc.batch_size);
  tc.iterations = ini.get_int<std::size_t>(t, "iterations", tc.iterations);
  tc.train_resolution = ini.get_int<std::size_t>(t, "train_resolution", tc.train_resolution);
  tc.optimizer.lr_head = ini.get_double(t, "lr_head", tc.optimizer.lr_head);
  tc.optimizer.lr_backbone = ini.get_double(t, "lr_backbone", tc.optimizer.lr_backbone);
  tc.optimizer.weight_decay = ini.get_double(t, "weight_decay", tc.optimizer.weight_decay);
  tc.freeze.last_two_vision_blocks_trainable =
      ini.get_bool(t, "vision_trainable", tc.freeze.last_two_vision_blocks_trainable);
  tc.freeze.text_encoder_trainable = ini.get_bool(t, "text_trainable", tc.freeze.text_encoder_trainable);
  tc.seed = ini.get_int<std::uint64_t>(t, "seed", rc.model.seed);
  tc.checkpoint_every = ini.get_int<std::size_t>(t, "checkpoint_every", tc.checkpoint_every);
  rc.synthetic.count = ini.get_int<std::size_t>(t, "synthetic_count", rc.synthetic.count);
  rc.synthetic.height = rc.synthetic.width = ini.get_int<std::size_t>(t, "synthetic_size", rc.synthetic.height);
  rc.synthetic.classes = ini.get_int<std::size_t>(t, "synthetic_classes", rc.synthetic.classes);
  rc.synthetic.noise = ini.get_double(t, "synthetic_noise", rc.synthetic.noise);
  rc.synthetic.seed = tc.seed;
  const std::string e = "eval";
  rc.window.eval_resolution = ini.get_int<std::size_t>(e, "eval_size", rc.window.eval_resolution);
  rc.window.window = ini.get_int<std::size_t>(e, "window", rc.window.window);
  rc.window.stride = ini.get_int<std::size_t>(e, "stride", rc.window.stride);
  rc.dataset_id = ini.get_string(e, "dataset_id", rc.dataset_id);
  rc.registry = resolve_path(base_dir, ini.get_string(e, "registry", ""));
  rc.background_prompt = ini.get_string(e, "background_prompt", "");
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  if (!fs::is_regular_file(path)) throw ConfigError("config file " + path + " does not exist");
  return parse_run_config(Ini::load(path), fs::path(path).parent_path().string());
}

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::size_t> eval_size, window, stride;
};

inline void apply_window_flags(const CommonFlags& f, RunConfig& rc) {
  if (f.eval_size) rc.window.eval_resolution = *f.eval_size;
  if (f.window) rc.window.window = *f.window;
  if (f.stride) rc.window.stride = *f.stride;
}

inline RemapRegistry load_registry(const std::string& path) {
  if (path.empty()) return RemapRegistry::builtin();
  if (!fs::is_regular_file(path)) throw ConfigError("remap registry " + path + " does not exist");
  return RemapRegistry::load(path);
}

// Classes from a file and/or repeated --class flags.
inline ClassVocabulary resolve_vocabulary(const std::string& file, const std::vector<std::string>& names) {
  if (!file.empty() && !names.empty()) throw ConfigError("use either --classes or --class, not both");
  if (!file.empty()) {
    if (!fs::is_regular_file(file)) throw ConfigError("class list " + file + " does not exist");
    try {
      return ClassVocabulary::load(file);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
  }
  if (names.empty()) throw ConfigError("no classes given (use --classes FILE or --class NAME)");
  try {
    return ClassVocabulary(names);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " " + path + " does not exist");
}

inline Tensor<float> embed_for(const CafeModel<float>& model, const RemapRegistry& registry,
                               const std::string& dataset_id, const std::vector<std::string>& names) {
  NoGradGuard guard;
  return model.embed_classes(registry.remap(dataset_id, names));
}

inline int cmd_train(const CommonFlags& f, std::optional<std::size_t> iterations, std::ostream& out) {
  RunConfig rc = load_run_config(f.config);
  if (f.seed) {
    rc.model.seed = *f.seed;
    rc.train.seed = *f.seed;
    rc.synthetic.seed = *f.seed;
  }
  if (iterations) rc.train.iterations = *iterations;
  rc.model.validate();
  rc.train.validate(rc.model.patch_size);
  if (rc.dataset.empty()) throw ConfigError("[train] dataset is not set");
  ClassVocabulary vocab;
  if (rc.dataset == "synthetic") {
    vocab = synthetic_vocabulary(rc.synthetic.classes);
  } else {
    if (!fs::is_directory(rc.dataset)) throw ConfigError("dataset path " + rc.dataset + " does not exist");
    std::string classes = rc.classes.empty() ? (fs::path(rc.dataset) / "classes.txt").string() : rc.classes;
    require_file(classes, "class list");
    vocab = ClassVocabulary::load(classes);
  }
  std::optional<ClassVocabulary> raw;
  if (!rc.raw_classes.empty()) {
    require_file(rc.raw_classes, "raw class list");
    raw = ClassVocabulary::load(rc.raw_classes);
    for (const auto& n : vocab.names()) {
      if (!raw->index_of(n)) throw ConfigError("subset class '" + n + "' is not in " + rc.raw_classes);
    }
  }

  std::vector<TrainingSample> data;
  if (rc.dataset == "synthetic") {
    data = generate_synthetic(rc.synthetic);
  } else {
    data = load_dataset(rc.dataset);
    if (raw) {
      for (auto& s : data) s.mask = filter_subset(s.mask, vocab, *raw);
    }
  }
  if (data.empty()) throw ValidationError("dataset " + rc.dataset + " has no image/mask pairs");

  fs::create_directories(f.out);
  CafeModel<float> model(rc.model);
  Trainer<float> trainer(model, vocab.names(), rc.train);
  const std::string log_path = (fs::path(f.out) / "train_log.tsv").string();
  std::ofstream log(log_path);
  if (!log) throw IoError("cannot write " + log_path);
  double last = 0.0;
  trainer.fit(data, [&](std::size_t step, double loss) {
    log_step(log, step, loss);
    last = loss;
    if (step % 10 == 0) log.flush();
    if (rc.train.checkpoint_every && step % rc.train.checkpoint_every == 0 && step != rc.train.iterations) {
      save_model((fs::path(f.out) / ("checkpoint_" + std::to_string(step) + ".ckpt")).string(), model);
    }
  });
  log.flush();
  const std::string ckpt = (fs::path(f.out) / "model.ckpt").string();
  save_model(ckpt, model);
  vocab.save((fs::path(f.out) / "classes.txt").string());
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", last);
  out << "trained " << rc.train.iterations << " steps, final loss " << buf << "\ncheckpoint: " << ckpt << '\n';
  return kExitOk;
}

struct VocabFlags {
  std::string classes;
  std::vector<std::string> names;
  std::string dataset_id;
  std::string registry;
};

inline int cmd_predict(const CommonFlags& f, const std::string& checkpoint, const VocabFlags& v,
                       const std::vector<std::string>& images, bool render, std::ostream& out) {
  RunConfig rc = load_run_config(f.config);
  apply_window_flags(f, rc);
  rc.window.validate();
  if (images.empty()) throw ConfigError("no input images given");
  for (const auto& p : images) require_file(p, "input image");
  require_file(checkpoint, "checkpoint");
  const ClassVocabulary vocab = resolve_vocabulary(v.classes, v.names);
  const RemapRegistry registry = load_registry(v.registry.empty() ? rc.registry : v.registry);
  const std::string dataset_id = v.dataset_id.empty() ? rc.dataset_id : v.dataset_id;
  if (!registry.knows(dataset_id)) throw ConfigError("unknown dataset id '" + dataset_id + "'");

  const CafeModel<float> model = load_model<float>(checkpoint);
  const Tensor<float> emb = embed_for(model, registry, dataset_id, vocab.names());
  const auto score = model_scorer(model, emb);
  fs::create_directories(f.out);
  const auto palette = io::default_palette(vocab.size());
  for (const auto& p : images) {
    const SegmentationMask mask = predict_full(io::read_image(p), score, rc.window);
    const std::string stem = fs::path(p).stem().string();
    io::write_mask((fs::path(f.out) / (stem + ".png")).string(), mask);
    if (render) io::write_raster((fs::path(f.out) / (stem + "_color.png")).string(), io::render_mask(mask, palette));
    out << p << " -> " << (fs::path(f.out) / (stem + ".png")).string() << '\n';
  }
  if (render) io::write_palette((fs::path(f.out) / "palette.txt").string(), palette, vocab.names());
  return kExitOk;
}

struct EvalFlags {
  std::string checkpoint;
  std::string dataset;
  bool with_background = false;
  bool without_background = false;
  std::string background_prompt;
  std::string background_class;
  bool oracle = false;
};

inline int cmd_eval(const CommonFlags& f, const VocabFlags& v, const EvalFlags& e, std::ostream& out,
                    std::ostream& err) {
  RunConfig rc = load_run_config(f.config);
  apply_window_flags(f, rc);
  rc.window.validate();
  if (e.dataset.empty()) throw ConfigError("--dataset is required");
  if (!fs::is_directory(e.dataset)) throw ConfigError("dataset path " + e.dataset + " does not exist");
  const std::string classes_file = v.classes.empty() && v.names.empty()
                                       ? (fs::path(e.dataset) / "classes.txt").string()
                                       : v.classes;
  const ClassVocabulary vocab = resolve_vocabulary(classes_file, v.names);
  const RemapRegistry registry = load_registry(v.registry.empty() ? rc.registry : v.registry);
  const std::string dataset_id = v.dataset_id.empty() ? rc.dataset_id : v.dataset_id;
  if (!registry.knows(dataset_id)) throw ConfigError("unknown dataset id '" + dataset_id + "'");

  std::vector<BackgroundMode> modes;
  if (e.with_background) modes.push_back(BackgroundMode::kWithBackground);
  if (e.without_background || !e.with_background) modes.push_back(BackgroundMode::kWithoutBackground);

  std::optional<std::size_t> bg;
  std::string bg_name = e.background_class;
  if (bg_name.empty()) bg_name = registry.background_class(dataset_id).value_or("");
  if (bg_name.empty() && vocab.index_of("background")) bg_name = "background";
  if (!bg_name.empty()) {
    bg = vocab.index_of(bg_name);
    if (!bg) throw ConfigError("background class '" + bg_name + "' is not in the class list");
  }
  const bool need_without = std::find(modes.begin(), modes.end(), BackgroundMode::kWithoutBackground) != modes.end();
  if (need_without && !bg) {
    throw ConfigError("without-background mode needs a background class (use --background-class)");
  }
  const std::string bg_prompt = e.background_prompt.empty() ? rc.background_prompt : e.background_prompt;
  if (e.with_background && !e.oracle && bg_prompt.empty()) {
    throw ConfigError("with-background evaluation needs an explicit --background-prompt");
  }
  if (!e.oracle) require_file(e.checkpoint, "checkpoint");

  MaskPredictor predictor;
  std::optional<CafeModel<float>> model;
  ScoreFunction<float> score;
  std::vector<int> to_vocab;  // prompted index -> vocabulary index
  if (e.oracle) {
    predictor = [](const Image&, const SegmentationMask& gt) { return gt; };
  } else {
    model.emplace(load_model<float>(e.checkpoint));
    std::vector<std::string> names = registry.remap(dataset_id, vocab.names());
    std::vector<std::string> prompted;
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (bg && c == *bg) {
        if (!e.with_background) continue;
        prompted.push_back(bg_prompt);
      } else {
        prompted.push_back(names[c]);
      }
      to_vocab.push_back(static_cast<int>(c));
    }
    Tensor<float> emb;
    {
      NoGradGuard guard;
      emb = model->embed_classes(prompted);
    }
    score = model_scorer(*model, emb);
    predictor = [&](const Image& img, const SegmentationMask&) {
      SegmentationMask m = predict_full(img, score, rc.window);
      for (auto& l : m.labels) l = to_vocab[static_cast<std::size_t>(l)];
      return m;
    };
  }

  const DirectoryEvaluation ev = evaluate_directory(e.dataset, vocab, predictor);
  if (ev.skipped) {
    err << "warning: skipped " << ev.skipped << " image(s) without a mask\n";
  }
  fs::create_directories(f.out);
  for (BackgroundMode mode : modes) {
    const MetricsReport r = miou(ev.confusion, mode, bg);
    const std::string table = report_table(r, vocab.names());
    const std::string name = background_mode_name(mode);
    std::ofstream t(fs::path(f.out) / ("report_" + name + ".txt"));
    t << table << "images=" << ev.images << "\nskipped_images=" << ev.skipped << '\n';
    std::ofstream kv(fs::path(f.out) / ("metrics_" + name + ".txt"));
    kv << report_key_values(r, vocab.names()) << "images=" << ev.images << "\nskipped_images=" << ev.skipped << '\n';
    if (!t || !kv) throw IoError("cannot write reports to " + f.out);
    out << table;
  }
  return kExitOk;
}

inline int cmd_export_costmaps(const CommonFlags& f, const std::string& checkpoint, const VocabFlags& v,
                               const std::string& image_path, const std::string& stage, const std::string& format,
                               std::ostream& out) {
  if (stage != "raw" && stage != "aggregated") {
    throw ConfigError("unknown stage '" + stage + "' (expected raw or aggregated)");
  }
  if (format != "png" && format != "pgm") throw ConfigError("unknown format '" + format + "' (expected png or pgm)");
  RunConfig rc = load_run_config(f.config);
  require_file(image_path, "input image");
  require_file(checkpoint, "checkpoint");
  const ClassVocabulary vocab = resolve_vocabulary(v.classes, v.names);
  const RemapRegistry registry = load_registry(v.registry.empty() ? rc.registry : v.registry);
  const std::string dataset_id = v.dataset_id.empty() ? rc.dataset_id : v.dataset_id;
  if (!registry.knows(dataset_id)) throw ConfigError("unknown dataset id '" + dataset_id + "'");

  const CafeModel<float> model = load_model<float>(checkpoint);
  Image image = io::read_image(image_path);
  if (f.eval_size && *f.eval_size) image = resize_bilinear(image, *f.eval_size, *f.eval_size);
  const Tensor<float> emb = embed_for(model, registry, dataset_id, vocab.names());
  NoGradGuard guard;
  const auto result = model.forward(image, emb);
  if (stage == "raw") {
    export_costmaps(result.cost, f.out, format);
  } else {
    const auto& a = result.aggregated;
    const Tensor<float> reduced = model.head()(a.values);  // [M, h, w]
    export_class_maps(reduced.values(), a.classes, a.height, a.width, f.out, format);
  }
  const SegmentationMask seg = argmax_classes(result.scores);
  const auto palette = io::default_palette(vocab.size());
  io::write_raster((fs::path(f.out) / ("segmentation." + std::string(format == "pgm" ? "ppm" : "png"))).string(),
                   io::render_mask(seg, palette));
  out << "wrote " << vocab.size() << " " << stage << " cost maps to " << f.out << '\n';
  return kExitOk;
}

inline int cmd_prepare_subset(const CommonFlags& f, const std::string& mode, const std::string& raw_path,
                              std::size_t size, std::ostream& out) {
  if (mode != "curated" && mode != "random") throw ConfigError("unknown mode '" + mode + "' (curated or random)");
  ClassVocabulary raw = ClassVocabulary::from(kCocoStuffClasses);
  if (!raw_path.empty()) {
    require_file(raw_path, "raw class list");
    raw = ClassVocabulary::load(raw_path);
  }
  ClassVocabulary subset;
  if (mode == "curated") {
    subset = ClassVocabulary::from(kRemoteSensingSubset);
    for (const auto& n : subset.names()) {
      if (!raw.index_of(n)) throw ConfigError("curated class '" + n + "' is missing from the raw class list");
    }
  } else {
    if (size < 1 || size > raw.size()) {
      throw ConfigError("subset size " + std::to_string(size) + " outside [1, " + std::to_string(raw.size()) + "]");
    }
    subset = sample_random_subset(raw, size, f.seed.value_or(0));
  }
  const fs::path dest = f.out;
  if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
  subset.save(dest.string());
  out << "wrote " << subset.size() << " classes to " << dest.string() << '\n';
  return kExitOk;
}

inline int cmd_make_synthetic(const CommonFlags& f, SyntheticConfig cfg, std::ostream& out) {
  cfg.seed = f.seed.value_or(0);
  const ClassVocabulary vocab = synthetic_vocabulary(cfg.classes);
  const auto samples = generate_synthetic(cfg);
  write_dataset(f.out, samples);
  vocab.save((fs::path(f.out) / "classes.txt").string());
  out << "wrote " << samples.size() << " samples to " << f.out << '\n';
  return kExitOk;
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Open-vocabulary segmentation by cost aggregation", "cafe-seg"};
  app.require_subcommand(1);
  CommonFlags f;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "INI config file");
    sub->add_option("--seed", f.seed, "Seed override");
    sub->add_option("--out", f.out, "Output path");
  };
  auto add_window = [&](CLI::App* sub) {
    sub->add_option("--eval-size", f.eval_size, "Evaluation resize (0 keeps the input size)");
    sub->add_option("--window", f.window, "Sliding window size");
    sub->add_option("--stride", f.stride, "Sliding window stride");
  };
  VocabFlags v;
  auto add_vocab = [&](CLI::App* sub) {
    sub->add_option("--classes", v.classes, "Class list file, one name per line");
    sub->add_option("--class", v.names, "Class name (repeatable)");
    sub->add_option("--dataset-id", v.dataset_id, "Remap registry entry for class names");
    sub->add_option("--registry", v.registry, "Remap registry file");
  };

  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train);
  std::optional<std::size_t> iterations;
  train->add_option("--iterations", iterations, "Override the iteration count");

  auto* predict = app.add_subcommand("predict", "Predict masks for images");
  add_common(predict);
  add_window(predict);
  add_vocab(predict);
  std::string checkpoint;
  std::vector<std::string> images;
  bool render = false;
  predict->add_option("--checkpoint", checkpoint, "Model checkpoint");
  predict->add_option("images", images, "Input images");
  predict->add_flag("--render", render, "Also write color renders");

  auto* eval = app.add_subcommand("eval", "Evaluate mIoU on a dataset directory");
  add_common(eval);
  add_window(eval);
  add_vocab(eval);
  EvalFlags e;
  eval->add_option("--checkpoint", e.checkpoint, "Model checkpoint");
  eval->add_option("--dataset", e.dataset, "Dataset directory");
  eval->add_flag("--with-background", e.with_background, "Report with the background class");
  eval->add_flag("--without-background", e.without_background, "Report without the background class");
  eval->add_option("--background-prompt", e.background_prompt, "Text used to prompt the background class");
  eval->add_option("--background-class", e.background_class, "Name of the background class in the class list");
  eval->add_flag("--oracle", e.oracle, "Use ground truth as the prediction");

  auto* exporter = app.add_subcommand("export-costmaps", "Write per-class cost maps");
  add_common(exporter);
  add_vocab(exporter);
  exporter->add_option("--eval-size", f.eval_size, "Resize the image first (0 keeps the input size)");
  std::string image_path, stage = "raw", format = "png";
  exporter->add_option("--checkpoint", checkpoint, "Model checkpoint");
  exporter->add_option("--image", image_path, "Input image");
  exporter->add_option("--stage", stage, "raw or aggregated");
  exporter->add_option("--format", format, "png or pgm");

  auto* subset = app.add_subcommand("prepare-subset", "Write a training class subset");
  add_common(subset);
  std::string mode = "curated", raw_path;
  std::size_t size = kRemoteSensingSubset.size();
  subset->add_option("--mode", mode, "curated or random");
  subset->add_option("--raw", raw_path, "Raw class list (default: built-in 171 COCO-Stuff classes)");
  subset->add_option("--size", size, "Subset size for random mode");

  auto* synth = app.add_subcommand("make-synthetic", "Write a seeded synthetic dataset");
  add_common(synth);
  SyntheticConfig sc;
  std::size_t synth_size = sc.height;
  synth->add_option("--count", sc.count, "Number of images");
  synth->add_option("--size", synth_size, "Image side length");
  synth->add_option("--classes", sc.classes, "Number of classes including background");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& ex) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(f, iterations, out);
    if (*predict) return cmd_predict(f, checkpoint, v, images, render, out);
    if (*eval) return cmd_eval(f, v, e, out, err);
    if (*exporter) return cmd_export_costmaps(f, checkpoint, v, image_path, stage, format, out);
    if (*subset) return cmd_prepare_subset(f, mode, raw_path, size, out);
    if (*synth) {
      sc.height = sc.width = synth_size;
      return cmd_make_synthetic(f, sc, out);
    }
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace cafe::cli
