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
// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include "cafe/checkpoint.hpp"
#include "cafe/cli.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace cafe {
namespace {

namespace fs = std::filesystem;
using testing::Vec;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

AggregatorConfig agg_config(std::size_t d, std::size_t blocks, std::size_t win, std::size_t heads,
                            std::uint64_t seed) {
  AggregatorConfig c;
  c.d_agg = d;
  c.num_blocks = blocks;
  c.window_size = win;
  c.num_heads = heads;
  c.mlp_ratio = 2;
  c.seed = seed;
  return c;
}

void perturb(const ParamList<double>& params, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (auto p : params)
    for (auto& v : p.tensor.mutable_values()) v += scale * rng.normal();
}

ParamList<double> params_of(const Aggregator<double>& agg) {
  ParamList<double> out;
  agg.collect(out);
  return out;
}

CostVolume<double> random_cost(std::size_t h, std::size_t w, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(h * w * m);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return {Tensor<double>({h, w, m}, v), h, w, m};
}

CostVolume<double> permute_classes(const CostVolume<double>& c, const std::vector<std::size_t>& perm) {
  std::vector<double> v(c.values.numel());
  for (std::size_t p = 0; p < c.height * c.width; ++p)
    for (std::size_t i = 0; i < c.classes; ++i) v[p * c.classes + i] = c.values.values()[p * c.classes + perm[i]];
  return {Tensor<double>(c.values.shape(), v), c.height, c.width, c.classes};
}

Outcome ac1_equivariance() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t trials = 0;
  for (std::size_t m : {2u, 3u, 5u}) {
    Aggregator<double> agg(agg_config(8, 2, 4, 2, 10 + m));
    perturb(params_of(agg), 20 + m, 0.2);
    const auto cost = random_cost(8, 8, m, 30 + m);
    const auto base = agg.aggregate(cost);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937 g(static_cast<unsigned>(40 + m));
    for (int t = 0; t < 20; ++t, ++trials) {
      std::shuffle(perm.begin(), perm.end(), g);
      const auto out = agg.aggregate(permute_classes(cost, perm));
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t y = 0; y < 8; ++y)
          for (std::size_t x = 0; x < 8; ++x)
            for (std::size_t c = 0; c < 8; ++c)
              worst = std::max(worst, std::abs(out.at(y, x, i, c) - base.at(y, x, perm[i], c)));
    }
  }
  // End to end: permuting the prompted classes permutes the predicted labels.
  ModelConfig mc = testing::tiny_config(7);
  CafeModel<double> model(mc);
  perturb(model.parameters(), 8, 0.1);
  const auto img = testing::random_image(16, 16, 9);
  const std::vector<std::string> names{"road", "building", "tree", "car", "water"};
  const auto base_mask = model.predict(img, model.embed_classes(names));
  bool masks_ok = true;
  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  std::vector<std::string> permuted;
  for (auto i : perm) permuted.push_back(names[i]);
  const auto mask = model.predict(img, model.embed_classes(permuted));
  for (std::size_t p = 0; p < mask.size(); ++p)
    masks_ok = masks_ok && static_cast<int>(perm[static_cast<std::size_t>(mask.labels[p])]) == base_mask.labels[p];
  const double secs = seconds_since(t0);
  return {worst <= 1e-5 && masks_ok && secs < 60,
          std::to_string(trials) + " permutations, max |diff| " + fmt("%.2e", worst) + ", masks " +
              (masks_ok ? "permute" : "DIFFER") + ", " + fmt("%.1f", secs) + " s"};
}

std::vector<Vec> slice(const ProjectedCostVolume<double>& v, std::size_t i) {
  std::vector<Vec> out(v.height * v.width, Vec(v.channels));
  for (std::size_t j = 0; j < v.height; ++j)
    for (std::size_t k = 0; k < v.width; ++k)
      for (std::size_t c = 0; c < v.channels; ++c) out[j * v.width + k][c] = v.at(j, k, i, c);
  return out;
}

ProjectedCostVolume<double> random_volume(std::size_t m, std::size_t h, std::size_t w, std::size_t d,
                                          std::uint64_t seed) {
  Rng rng(seed);
  return {testing::random_tensor<double>({m, h, w, d}, rng), m, h, w, d};
}

Outcome ac2_attention_oracles() {
  double worst_spatial = 0.0, worst_class = 0.0;
  for (std::size_t heads : {1u, 2u}) {
    Aggregator<double> agg(agg_config(8, 1, 4, heads, 50));
    perturb(params_of(agg), 51, 0.3);
    const auto v = random_volume(2, 4, 4, 8, 52);
    const auto& block = agg.blocks()[0];
    const auto out = agg.spatial_aggregate(block, v);
    for (std::size_t i = 0; i < 2; ++i) {
      auto want = testing::swin_oracle(block.swin[0], slice(v, i), 4, 4, 4, 0, heads);
      want = testing::swin_oracle(block.swin[1], want, 4, 4, 4, 0, heads);
      const auto got = slice(out, i);
      for (std::size_t p = 0; p < 16; ++p)
        for (std::size_t c = 0; c < 8; ++c) worst_spatial = std::max(worst_spatial, std::abs(got[p][c] - want[p][c]));
    }
  }
  for (auto variant : {AttentionVariant::kFull, AttentionVariant::kLinear}) {
    for (std::size_t m : {1u, 2u, 3u}) {
      auto cfg = agg_config(8, 1, 2, 2, 60 + m);
      cfg.attention_variant = variant;
      Aggregator<double> agg(cfg);
      perturb(params_of(agg), 61, 0.3);
      const auto v = random_volume(m, 3, 3, 8, 62);
      const auto& ca = agg.blocks()[0].class_attn;
      const auto out = agg.class_attend(agg.blocks()[0], v);
      for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < 3; ++k) {
          std::vector<Vec> x(m), qkv(m);
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t c = 0; c < 8; ++c) x[i].push_back(v.at(j, k, i, c));
            qkv[i] = testing::affine(ca.qkv, testing::layer_norm(x[i], ca.norm1.gamma, ca.norm1.beta));
          }
          for (std::size_t i = 0; i < m; ++i) {
            const Vec a = testing::attend(
                qkv, i, 2, 8, [](std::size_t, std::size_t, std::size_t) { return 0.0; },
                [](std::size_t, std::size_t) { return true; }, variant == AttentionVariant::kLinear);
            Vec y = testing::add(x[i], testing::affine(ca.proj, a));
            y = testing::add(y, testing::mlp(ca.mlp, testing::layer_norm(y, ca.norm2.gamma, ca.norm2.beta)));
            for (std::size_t c = 0; c < 8; ++c) worst_class = std::max(worst_class, std::abs(out.at(j, k, i, c) - y[c]));
          }
        }
    }
  }
  return {worst_spatial <= 1e-5 && worst_class <= 1e-5,
          "window max |diff| " + fmt("%.2e", worst_spatial) + ", class max |diff| " + fmt("%.2e", worst_class)};
}

Outcome ac3_gradients() {
  ModelConfig mc = testing::tiny_config(70);
  mc.patch_size = 1;
  mc.aggregator.num_blocks = 2;
  CafeModel<double> model(mc);
  perturb(model.parameters(), 71, 0.1);
  model.apply_freeze({true, true});
  const auto img = testing::random_image(4, 4, 72);
  SegmentationMask mask(4, 4);
  Rng rng(73);
  for (auto& l : mask.labels) l = static_cast<int>(rng.below(2));
  const std::vector<std::string> names{"tree", "road"};
  const auto r = testing::check_gradients(testing::as_named(model.parameters()), [&] {
    return compute_loss(model.forward(img, model.embed_classes(names), ReduceOrder::kReduceAfterUp).scores, mask).loss;
  });
  const bool shifted = model.aggregator().blocks()[0].swin[1].shifted;
  return {r.max_rel_error <= 1e-3 && shifted,
          std::to_string(r.checked) + " parameters, max rel error " + fmt("%.2e", r.max_rel_error) +
              (shifted ? "" : ", shift INACTIVE")};
}

Outcome ac4_residual_identity() {
  Aggregator<double> agg(agg_config(16, 6, 4, 4, 80));
  perturb(params_of(agg), 81, 0.3);
  agg.zero_residual_branches();
  const auto v = random_volume(3, 9, 7, 16, 82);
  std::size_t identical = 0;
  for (const auto& block : agg.blocks()) {
    identical += agg.spatial_aggregate(block, v).values.values() == v.values.values();
    identical += agg.class_attend(block, v).values.values() == v.values.values();
  }
  const auto cost = random_cost(9, 7, 3, 83);
  const bool stack = agg.aggregate(cost).values.values() == agg.project_classwise(cost).values.values();
  return {identical == 12 && stack,
          std::to_string(identical) + "/12 sub-blocks exact identity, full stack " + (stack ? "exact" : "DIFFERS")};
}

Outcome ac5_frozen_components() {
  SyntheticConfig sc;
  sc.count = 4;
  sc.height = sc.width = 16;
  const auto data = generate_synthetic(sc);
  const auto img = testing::random_image(16, 16, 90);
  std::size_t ok = 0;
  std::string failures;
  for (auto [vision, text] : {std::pair{false, false}, {true, false}, {false, true}, {true, true}}) {
    CafeModel<float> model(testing::tiny_config(91));
    const auto plan = dynamic_cast<const JointBilateralUpsampler<float>&>(model.upsampler()).plan(img, 8, 8);
    std::vector<std::vector<float>> before;
    for (const auto& p : model.parameters()) before.push_back(p.tensor.values());
    TrainConfig tc;
    tc.batch_size = 2;
    tc.iterations = 10;
    tc.train_resolution = 16;
    tc.optimizer.lr_head = tc.optimizer.lr_backbone = 1e-3;
    tc.freeze = {vision, text};
    Trainer<float> trainer(model, synthetic_vocabulary(3).names(), tc);
    trainer.fit(data);
    bool good = true;
    std::map<ParamGroup, bool> moved;
    const auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const bool frozen = (params[i].group == ParamGroup::kVision && !vision) ||
                          (params[i].group == ParamGroup::kText && !text);
      const bool same = params[i].tensor.values() == before[i];
      if (frozen && !same) good = false;
      moved[params[i].group] = moved[params[i].group] || !same;
    }
    const auto after = dynamic_cast<const JointBilateralUpsampler<float>&>(model.upsampler()).plan(img, 8, 8);
    good = good && after->weight == plan->weight && after->index == plan->index;
    good = good && moved[ParamGroup::kHead] && moved[ParamGroup::kVision] == vision && moved[ParamGroup::kText] == text;
    if (good) {
      ++ok;
    } else {
      failures += std::string(" vision=") + (vision ? "on" : "off") + "/text=" + (text ? "on" : "off");
    }
  }
  return {ok == 4, std::to_string(ok) + "/4 freeze policies keep frozen parameters and upsampler bit-identical" +
                       (failures.empty() ? "" : ";" + failures)};
}

double pixel_accuracy(const SegmentationMask& pred, const SegmentationMask& gt) {
  std::size_t hit = 0, n = 0;
  for (std::size_t p = 0; p < gt.size(); ++p) {
    if (gt.labels[p] == gt.ignore_label) continue;
    ++n;
    hit += pred.labels[p] == gt.labels[p];
  }
  return n ? static_cast<double>(hit) / static_cast<double>(n) : 0.0;
}

Outcome ac6_desk_training() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rc = cli::parse_run_config(Ini::load(std::string(CAFE_DATA_DIR) + "/desk.ini"));
  const auto data = generate_synthetic(rc.synthetic);
  const auto names = synthetic_vocabulary(rc.synthetic.classes).names();
  CafeModel<float> model(rc.model);
  Trainer<float> trainer(model, names, rc.train);
  const auto losses = trainer.fit(data);
  double tail = 0.0;
  const std::size_t k = std::min<std::size_t>(10, losses.size());
  for (std::size_t i = losses.size() - k; i < losses.size(); ++i) tail += losses[i] / static_cast<double>(k);
  const double reduction = 1.0 - tail / losses.front();

  CafeModel<float> single(rc.model);
  TrainConfig tc = rc.train;
  tc.batch_size = 1;
  Trainer<float> overfit(single, names, tc);
  const auto& sample = data.front();
  Tensor<float> emb;
  {
    NoGradGuard guard;
    emb = single.embed_classes(names);
  }
  double acc = 0.0;
  std::size_t reached = 0;
  for (std::size_t it = 1; it <= 500; ++it) {
    overfit.train_step({sample});
    if (it % 25 == 0) {
      NoGradGuard guard;
      acc = pixel_accuracy(single.predict(sample.image, emb), sample.mask);
      if (acc >= 0.95) {
        reached = it;
        break;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {reduction >= 0.5 && reached > 0 && secs < 600,
          "loss " + fmt("%.3f", losses.front()) + " -> " + fmt("%.3f", tail) + " (last-10 mean, -" +
              fmt("%.1f", 100 * reduction) + "%), single-image accuracy " + fmt("%.1f", 100 * acc) + "%" +
              (reached ? " at step " + std::to_string(reached) : " NOT reached in 500 steps") + ", " +
              fmt("%.1f", secs) + " s"};
}

Outcome ac7_sliding_window() {
  const bool positions = window_positions(512, 224, 112) == std::vector<std::size_t>{0, 112, 224, 288};
  const ScoreFunction<double> colour = [](const Image& img) {
    DenseScores<double> s{std::vector<double>(3 * img.height * img.width), 3, img.height, img.width};
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < img.height * img.width; ++p) s.values[c * img.height * img.width + p] = img.rgb[p * 3 + c];
    return s;
  };
  int min_cov = 1 << 30;
  for (const auto& cfg : {SlidingWindowConfig{}, SlidingWindowConfig{100, 30, 17}, SlidingWindowConfig{0, 24, 24}}) {
    const auto r = predict_full_detailed(testing::random_image(45, 61, 100), colour, cfg);
    for (int c : r.coverage) min_cov = std::min(min_cov, c);
  }
  CafeModel<float> model(testing::tiny_config(101));
  const auto emb = model.embed_classes({"road", "tree", "car"});
  const auto img = testing::random_image(37, 29, 102);
  const auto r = predict_full_detailed(img, model_scorer(model, emb), SlidingWindowConfig{24, 24, 12});
  NoGradGuard guard;
  const auto direct = model.scores(resize_bilinear(img, 24, 24), emb);
  const bool single = r.merged.values == direct.values.values() &&
                      r.mask == resize_nearest(argmax_classes(direct), img.height, img.width);
  return {positions && min_cov >= 1 && single, std::string("positions ") + (positions ? "[0, 112, 224, 288]" : "WRONG") +
                                                   ", min coverage " + std::to_string(min_cov) + ", single pass " +
                                                   (single ? "bit-exact" : "DIFFERS")};
}

// Per-pixel counting oracle for both background modes.
double oracle_miou(const SegmentationMask& pred, const SegmentationMask& gt, std::size_t m, std::optional<std::size_t> bg) {
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < m; ++c) {
    if (bg && c == *bg) continue;
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t p = 0; p < gt.size(); ++p) {
      const int g = gt.labels[p], q = pred.labels[p];
      if (g == gt.ignore_label) continue;
      if (bg && (g == int(*bg) || q == int(*bg))) continue;
      tp += g == int(c) && q == int(c);
      fn += g == int(c) && q != int(c);
      fp += q == int(c) && g != int(c);
    }
    if (tp + fp + fn == 0) continue;
    sum += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    ++defined;
  }
  return sum / static_cast<double>(defined);
}

Outcome ac8_miou_oracle() {
  Rng rng(110);
  std::size_t exact = 0, compared = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t m = 2 + rng.below(4), h = 1 + rng.below(6), w = 1 + rng.below(6);
    SegmentationMask gt(h, w), pred(h, w);
    for (std::size_t p = 0; p < h * w; ++p) {
      gt.labels[p] = rng.uniform() < 0.1 ? kIgnoreLabel : static_cast<int>(rng.below(m));
      pred.labels[p] = static_cast<int>(rng.below(m));
    }
    const std::size_t bg = rng.below(m);
    const ConfusionMatrix cm = accumulate(pred, gt, ConfusionMatrix(m));
    for (auto mode : {BackgroundMode::kWithBackground, BackgroundMode::kWithoutBackground}) {
      const std::optional<std::size_t> b = mode == BackgroundMode::kWithoutBackground ? std::optional(bg) : std::nullopt;
      double want = 0.0;
      bool want_defined = true;
      try {
        want = oracle_miou(pred, gt, m, b);
        want_defined = std::isfinite(want);
      } catch (...) {
        want_defined = false;
      }
      ++compared;
      try {
        const double got = miou(cm, mode, bg).miou;
        exact += want_defined && got == want;
      } catch (const UndefinedMetricError&) {
        exact += !want_defined;
      }
    }
  }
  const auto hand = accumulate([] {
    SegmentationMask m(1, 4);
    m.labels = {0, 1, 1, 1};
    return m;
  }(), [] {
    SegmentationMask m(1, 4);
    m.labels = {0, 0, 1, 1};
    return m;
  }(), ConfusionMatrix(2));
  const bool hand_ok = hand.counts() == std::vector<std::uint64_t>{1, 1, 0, 2} &&
                       std::abs(miou(hand, BackgroundMode::kWithBackground).miou - 7.0 / 12.0) <= 1e-15;
  return {exact == compared && hand_ok, std::to_string(exact) + "/" + std::to_string(compared) +
                                            " exact matches, hand case " + (hand_ok ? "7/12" : "WRONG")};
}

Outcome ac9_memory_linearity() {
  const std::size_t h = 6, w = 5, d = 16;
  Aggregator<float> agg(AggregatorConfig{d, 2, 2, 4, 2, AttentionVariant::kFull, true, 120});
  std::string counts;
  bool ok = true;
  for (std::size_t m : {1u, 2u, 4u, 8u}) {
    Rng rng(m);
    std::vector<float> v(h * w * m);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    const CostVolume<float> cost{Tensor<float>({h, w, m}, v), h, w, m};
    const auto projected = agg.project_classwise(cost);
    const auto aggregated = agg.aggregate(cost);
    ok = ok && projected.element_count() == h * w * m * d && aggregated.element_count() == h * w * m * d;
    counts += (counts.empty() ? "" : ", ") + std::string("M=") + std::to_string(m) + ":" +
              std::to_string(aggregated.element_count());
  }
  return {ok, counts + " (h*w*M*D_agg with h=6, w=5, D_agg=16)"};
}

struct CliRun {
  int code;
  std::string err;
};

CliRun cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "cafe-seg");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, err.str()};
}

std::map<std::string, std::string> directory_bytes(const std::string& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = testing::read_bytes(e.path().string());
  return out;
}

Outcome ac10_determinism() {
  const auto root = testing::scratch_dir("acceptance_determinism");
  std::ofstream(root + "/run.ini") << "[model]\nseed = 5\npatch_size = 4\nembed_dim = 8\ntext_buckets = 256\n"
                                      "text_token_dim = 16\nd_agg = 8\nnum_blocks = 1\nwindow_size = 2\nnum_heads = 2\n"
                                      "[train]\ndataset = synthetic\nsynthetic_count = 4\nsynthetic_size = 16\n"
                                      "batch_size = 2\niterations = 10\ntrain_resolution = 16\ncheckpoint_every = 5\n"
                                      "[eval]\neval_size = 16\nwindow = 16\nstride = 8\n";
  const std::string cfg = root + "/run.ini";
  if (cli_run({"make-synthetic", "--count", "2", "--size", "16", "--seed", "5", "--out", root + "/data"}).code != 0) {
    return {false, "could not write input images"};
  }
  const std::string img = root + "/data/images/0000.png";
  std::size_t files = 0;
  std::string mismatch;
  for (const char* cmd : {"train", "predict", "export-costmaps"}) {
    std::map<std::string, std::string> first;
    for (int rep = 0; rep < 2; ++rep) {
      const std::string out = root + "/" + cmd + std::to_string(rep);
      CliRun r{0, ""};
      if (std::string(cmd) == "train") {
        r = cli_run({"train", "--config", cfg, "--seed", "5", "--out", out});
      } else if (std::string(cmd) == "predict") {
        r = cli_run({"predict", "--config", cfg, "--checkpoint", root + "/train0/model.ckpt", "--classes",
                     root + "/train0/classes.txt", "--render", "--out", out, img});
      } else {
        r = cli_run({"export-costmaps", "--config", cfg, "--checkpoint", root + "/train0/model.ckpt", "--classes",
                     root + "/train0/classes.txt", "--image", img, "--out", out});
      }
      if (r.code != 0) return {false, std::string(cmd) + " failed: " + r.err};
      auto bytes = directory_bytes(out);
      if (rep == 0) {
        first = std::move(bytes);
        files += first.size();
      } else if (bytes != first) {
        mismatch += std::string(" ") + cmd;
      }
    }
  }
  return {mismatch.empty(), std::to_string(files) + " files bit-identical across reruns of train, predict, export-costmaps" +
                                (mismatch.empty() ? "" : "; differ:" + mismatch)};
}

}  // namespace
}  // namespace cafe

int main() {
  using Check = std::pair<const char*, std::function<cafe::Outcome()>>;
  const std::vector<Check> checks = {
      {"AC1 class-permutation equivariance", cafe::ac1_equivariance},
      {"AC2 attention oracles", cafe::ac2_attention_oracles},
      {"AC3 gradient check", cafe::ac3_gradients},
      {"AC4 residual identity", cafe::ac4_residual_identity},
      {"AC5 frozen components", cafe::ac5_frozen_components},
      {"AC6 desk-scale training", cafe::ac6_desk_training},
      {"AC7 sliding-window protocol", cafe::ac7_sliding_window},
      {"AC8 mIoU oracle", cafe::ac8_miou_oracle},
      {"AC9 memory linearity", cafe::ac9_memory_linearity},
      {"AC10 determinism", cafe::ac10_determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    cafe::Outcome o{false, ""};
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
