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
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cafe/cli.hpp"
#include "test_util.hpp"

namespace cafe {
namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cafe-seg");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const std::string& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

const char* kTinyConfig = R"([model]
seed = 1
patch_size = 4
embed_dim = 8
text_buckets = 256
text_token_dim = 16
d_agg = 8
num_blocks = 1
window_size = 2
num_heads = 2
mlp_ratio = 2

[train]
dataset = synthetic
synthetic_count = 4
synthetic_size = 16
synthetic_classes = 3
batch_size = 2
iterations = 10
train_resolution = 16
lr_head = 1e-3

[eval]
eval_size = 16
window = 16
stride = 8
)";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = testing::scratch_dir("cli");
    std::ofstream(dir_ + "/tiny.ini") << kTinyConfig;
    const auto r = run_cli({"train", "--config", dir_ + "/tiny.ini", "--out", dir_ + "/run"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto s = run_cli({"make-synthetic", "--count", "3", "--size", "16", "--classes", "3", "--seed", "4", "--out",
                            dir_ + "/data"});
    ASSERT_EQ(s.code, 0) << s.err;
  }
  static std::string config() { return dir_ + "/tiny.ini"; }
  static std::string ckpt() { return dir_ + "/run/model.ckpt"; }
  static std::string image() { return dir_ + "/data/images/0000.png"; }
  static std::string dir_;
};

std::string Cli::dir_;

TEST_F(Cli, TrainingWritesLogCheckpointAndClasses) {
  EXPECT_EQ(line_count(dir_ + "/run/train_log.tsv"), 10u);
  EXPECT_TRUE(fs::is_regular_file(ckpt()));
  EXPECT_EQ(ClassVocabulary::load(dir_ + "/run/classes.txt").names(), synthetic_vocabulary(3).names());
}

TEST_F(Cli, TrainingIsDeterministic) {
  const auto r = run_cli({"train", "--config", config(), "--out", dir_ + "/run2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(testing::read_bytes(ckpt()), testing::read_bytes(dir_ + "/run2/model.ckpt"));
  EXPECT_EQ(testing::read_bytes(dir_ + "/run/train_log.tsv"), testing::read_bytes(dir_ + "/run2/train_log.tsv"));
  const auto other = run_cli({"train", "--config", config(), "--seed", "9", "--iterations", "2", "--out", dir_ + "/run3"});
  ASSERT_EQ(other.code, 0) << other.err;
  EXPECT_EQ(line_count(dir_ + "/run3/train_log.tsv"), 2u);
}

TEST_F(Cli, MissingDatasetIsAUsageError) {
  std::ofstream(dir_ + "/missing.ini") << "[train]\ndataset = /nonexistent/cafe_dataset\n";
  const auto r = run_cli({"train", "--config", dir_ + "/missing.ini", "--out", dir_ + "/never"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("/nonexistent/cafe_dataset"), std::string::npos) << r.err;
  EXPECT_EQ(run_cli({"train", "--config", dir_ + "/nope.ini"}).code, 1);
  EXPECT_EQ(run_cli({"bogus"}).code, 1);
  EXPECT_EQ(run_cli({}).code, 1);
}

TEST_F(Cli, PredictNeedsImages) {
  const auto r = run_cli({"predict", "--config", config(), "--checkpoint", ckpt(), "--class", "sky", "--out", dir_ + "/p0"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("no input images"), std::string::npos);
}

TEST_F(Cli, PredictWithPotsdamClassesGivesValidLabels) {
  const std::string classes = std::string(CAFE_DATA_DIR) + "/potsdam_classes.txt";
  const auto r = run_cli({"predict", "--config", config(), "--checkpoint", ckpt(), "--classes", classes, "--render",
                          "--out", dir_ + "/pred", image()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto mask = io::read_mask(dir_ + "/pred/0000.png");
  EXPECT_EQ(mask.height, 16u);
  for (int l : mask.labels) {
    EXPECT_GE(l, 0);
    EXPECT_LT(l, 5);
  }
  EXPECT_TRUE(fs::is_regular_file(dir_ + "/pred/0000_color.png"));
  EXPECT_EQ(line_count(dir_ + "/pred/palette.txt"), 5u);
}

TEST_F(Cli, EvalWritesBothReports) {
  const auto r = run_cli({"eval", "--config", config(), "--checkpoint", ckpt(), "--dataset", dir_ + "/data",
                          "--with-background", "--without-background", "--background-prompt", "background",
                          "--out", dir_ + "/eval"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* mode : {"with_background", "without_background"}) {
    EXPECT_TRUE(fs::is_regular_file(dir_ + "/eval/report_" + mode + ".txt"));
    EXPECT_NE(testing::read_bytes(dir_ + "/eval/metrics_" + mode + ".txt").find("miou="), std::string::npos);
  }
  const auto no_prompt = run_cli({"eval", "--config", config(), "--checkpoint", ckpt(), "--dataset", dir_ + "/data",
                                  "--with-background", "--out", dir_ + "/eval2"});
  EXPECT_EQ(no_prompt.code, 1);
}

TEST_F(Cli, OracleEvalScoresOneHundred) {
  const auto r = run_cli({"eval", "--dataset", dir_ + "/data", "--oracle", "--with-background", "--without-background",
                          "--out", dir_ + "/oracle"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* mode : {"with_background", "without_background"}) {
    EXPECT_NE(testing::read_bytes(dir_ + "/oracle/metrics_" + mode + ".txt").find("miou=100.0\n"), std::string::npos);
  }
}

TEST_F(Cli, RawExportMatchesLibraryExport) {
  const auto r = run_cli({"export-costmaps", "--config", config(), "--checkpoint", ckpt(), "--classes",
                          dir_ + "/run/classes.txt", "--image", image(), "--out", dir_ + "/export"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto model = load_model<float>(ckpt());
  NoGradGuard guard;
  const auto emb = model.embed_classes(synthetic_vocabulary(3).names());
  export_costmaps(model.cost_volume(io::read_image(image()), emb), dir_ + "/export_lib", "png");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir_ + "/export_lib")) {
    ++files;
    EXPECT_EQ(testing::read_bytes(e.path().string()),
              testing::read_bytes(dir_ + "/export/" + e.path().filename().string()));
  }
  EXPECT_EQ(files, 3u);
  EXPECT_TRUE(fs::is_regular_file(dir_ + "/export/segmentation.png"));
  EXPECT_EQ(run_cli({"export-costmaps", "--checkpoint", ckpt(), "--class", "a", "--image", image(), "--stage", "mid",
                     "--out", dir_ + "/export_bad"})
                .code,
            1);
  const auto agg = run_cli({"export-costmaps", "--checkpoint", ckpt(), "--class", "a", "--class", "b", "--image",
                            image(), "--stage", "aggregated", "--format", "pgm", "--out", dir_ + "/export_agg"});
  EXPECT_EQ(agg.code, 0) << agg.err;
}

TEST_F(Cli, CorruptCheckpointFails) {
  std::ofstream(dir_ + "/bad.ckpt") << "CAFECKPT garbage";
  const auto r = run_cli({"predict", "--checkpoint", dir_ + "/bad.ckpt", "--class", "sky", "--out", dir_ + "/pbad",
                          image()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("bad.ckpt"), std::string::npos);
}

TEST_F(Cli, PrepareSubsetModes) {
  auto r = run_cli({"prepare-subset", "--out", dir_ + "/subset.txt"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(dir_ + "/subset.txt"), kRemoteSensingSubset.size());
  r = run_cli({"prepare-subset", "--mode", "random", "--size", "12", "--seed", "3", "--out", dir_ + "/random.txt"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(dir_ + "/random.txt"), 12u);
  EXPECT_EQ(run_cli({"prepare-subset", "--mode", "random", "--size", "500", "--out", dir_ + "/x.txt"}).code, 1);
  EXPECT_EQ(run_cli({"prepare-subset", "--mode", "other", "--out", dir_ + "/x.txt"}).code, 1);
}

}  // namespace
}  // namespace cafe
