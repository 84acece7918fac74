#include <gtest/gtest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "sppnet/data_io.hpp"
#include "sppnet/errors.hpp"
#include "sppnet/run_config.hpp"
#include "synthetic.hpp"

using namespace sppnet;
namespace fs = std::filesystem;

namespace {

Image gradient_image(int h, int w) {
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = static_cast<std::uint8_t>(x * 7);
      img.at(y, x, 1) = static_cast<std::uint8_t>(y * 5);
      img.at(y, x, 2) = static_cast<std::uint8_t>((x + y) * 3);
    }
  return img;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST(Png, RgbRoundTrip) {
  const fs::path dir = test_support::fresh_dir("png_rgb");
  const Image img = gradient_image(13, 17);
  write_rgb_png(dir / "a.png", img);
  EXPECT_EQ(read_rgb_png(dir / "a.png"), img);
}

TEST(Png, SixteenBitLabelsRoundTrip) {
  const fs::path dir = test_support::fresh_dir("png_label");
  Grid<int> labels(5, 6, 0);
  labels(0, 0) = 1;
  labels(2, 3) = 300;
  labels(4, 5) = 65535;
  write_label_png(dir / "m.png", labels);
  EXPECT_EQ(read_label_png(dir / "m.png"), labels);
  labels(1, 1) = 70000;
  EXPECT_THROW(write_label_png(dir / "bad.png", labels), FormatError);
}

TEST(Png, RejectsGarbageAndMissingFiles) {
  const fs::path dir = test_support::fresh_dir("png_bad");
  write_text(dir / "x.png", "not a png at all");
  EXPECT_THROW(read_rgb_png(dir / "x.png"), FormatError);
  EXPECT_THROW(read_label_png(dir / "missing.png"), FormatError);
  // A color PNG is not a label map.
  write_rgb_png(dir / "rgb.png", gradient_image(4, 4));
  EXPECT_THROW(read_label_png(dir / "rgb.png"), FormatError);
}

TEST(Dataset, LoadsSortedAndRenumbered) {
  const fs::path dir = test_support::fresh_dir("ds_sorted");
  std::vector<Sample> samples;
  for (const char* id : {"c", "a", "b"}) samples.push_back(test_support::make_blob_sample(id, 24, 24, 2, id[0]));
  save_dataset(dir, samples);
  Grid<int> sparse(24, 24, 0);
  sparse(3, 3) = 5;
  sparse(10, 10) = 9;
  write_label_png(dir / "masks" / "a.png", sparse);

  const auto loaded = load_dataset(dir);
  ASSERT_EQ(loaded.size(), 3u);
  EXPECT_EQ(loaded[0].id, "a");
  EXPECT_EQ(loaded[1].id, "b");
  EXPECT_EQ(loaded[2].id, "c");
  EXPECT_EQ(loaded[0].instances.num_instances(), 2);
  EXPECT_EQ(loaded[0].instances(3, 3), 1);
  EXPECT_EQ(loaded[0].instances(10, 10), 2);
  EXPECT_EQ(loaded[1].image, samples[2].image);
  EXPECT_EQ(loaded[2].instances, samples[0].instances);
}

TEST(Dataset, MissingMaskNamesTheId) {
  const fs::path dir = test_support::fresh_dir("ds_missing");
  save_dataset(dir, std::vector{test_support::make_blob_sample("keep", 16, 16, 1, 1),
                                test_support::make_blob_sample("orphan", 16, 16, 1, 2)});
  fs::remove(dir / "masks" / "orphan.png");
  try {
    load_dataset(dir);
    FAIL() << "expected an error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("orphan"), std::string::npos) << e.what();
  }
}

TEST(Dataset, SizeMismatchNamesTheId) {
  const fs::path dir = test_support::fresh_dir("ds_size");
  save_dataset(dir, std::vector{test_support::make_blob_sample("odd", 16, 16, 1, 1)});
  write_label_png(dir / "masks" / "odd.png", Grid<int>(16, 15, 0));
  try {
    load_dataset(dir);
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("odd"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_dataset(dir / "nowhere"), std::exception);
}

TEST(Normalization, StatsAndJson) {
  Sample s = test_support::make_blob_sample("n", 8, 8, 1, 3);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      s.image.at(y, x, 0) = x < 4 ? 0 : 255;
      s.image.at(y, x, 1) = 51;
      s.image.at(y, x, 2) = 255;
    }
  const NormalizationStats st = compute_normalization(std::span(&s, 1));
  EXPECT_NEAR(st.mean[0], 0.5, 1e-12);
  EXPECT_NEAR(st.stddev[0], 0.5, 1e-12);
  EXPECT_NEAR(st.mean[1], 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(st.stddev[1], 1.0);
  const nlohmann::json j = st;
  EXPECT_TRUE(j.contains("mean"));
  EXPECT_TRUE(j.contains("std"));
  EXPECT_EQ(j.get<NormalizationStats>(), st);
}

TEST(Prepare, ShapesForLargeImage) {
  Sample s = test_support::make_blob_sample("big", 1000, 1000, 6, 4);
  const PreparedInputs in = prepare_inputs(s, ModelConfig::desk(), NormalizationStats{});
  EXPECT_EQ(in.image_full.shape(), (Shape{3, 256, 256}));
  EXPECT_EQ(in.image_llsie.shape(), (Shape{3, 128, 128}));
  EXPECT_EQ(in.ground_truth.height(), 64);
  EXPECT_EQ(in.original_size.height, 1000);
  EXPECT_EQ(in.original_size.width, 1000);
}

TEST(Prepare, ConstantImageStandardizesToConstant) {
  Sample s = test_support::make_blob_sample("flat", 40, 30, 1, 5);
  std::fill(s.image.pixels.begin(), s.image.pixels.end(), 128);
  NormalizationStats st;
  st.mean = {0.25, 0.5, 0.75};
  st.stddev = {0.5, 0.25, 2.0};
  const Tensor t = resize_and_standardize(s.image, 16, st);
  const double v = 128.0 / 255.0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) ASSERT_NEAR(t.at(c, y, x), (v - st.mean[c]) / st.stddev[c], 1e-12);
}

TEST(Prepare, GroundTruthResampling) {
  Sample s = test_support::make_blob_sample("g", 32, 32, 1, 6);
  Grid<int> all(32, 32, 1);
  s.instances = InstanceLabelMap(all);
  const PreparedInputs in = prepare_inputs(s, ModelConfig::micro(), NormalizationStats{});
  for (auto v : in.ground_truth.values()) ASSERT_EQ(v, 1);

  BinaryMask m(4, 4, 0);
  m(1, 2) = 1;
  const BinaryMask up = resize_nearest(m, 8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_EQ(up(y, x), (y / 2 == 1 && x / 2 == 2) ? 1 : 0);
  const BinaryMask down = resize_nearest(up, 4, 4);
  EXPECT_EQ(down, m);
}

TEST(RunConfigFile, RelativePathsAndDefaults) {
  const fs::path dir = test_support::fresh_dir("runcfg");
  fs::create_directories(dir / "data");
  write_text(dir / "run.json", R"({"dataset": "data", "seed": 9, "train": {"batch_size": 2}})");
  const RunConfig rc = load_run_config(dir / "run.json");
  EXPECT_EQ(fs::weakly_canonical(rc.dataset), fs::weakly_canonical(dir / "data"));
  EXPECT_EQ(fs::weakly_canonical(rc.output), fs::weakly_canonical(dir / "output"));
  EXPECT_EQ(rc.train.seed, 9u);
  EXPECT_EQ(rc.sampler.seed, 9u);
  EXPECT_EQ(rc.train.batch_size, 2);
  EXPECT_EQ(rc.train.max_epochs, TrainConfig{}.max_epochs);
  EXPECT_EQ(rc.model, ModelConfig::desk());
}

TEST(RunConfigFile, Errors) {
  const fs::path dir = test_support::fresh_dir("runcfg_bad");
  EXPECT_THROW(parse_run_config(nlohmann::json{{"dataset", "absent"}}, dir), ConfigError);
  fs::create_directories(dir / "data");
  EXPECT_THROW(parse_run_config(nlohmann::json{{"dataset", "data"}, {"bogus", 1}}, dir), ConfigError);
  EXPECT_THROW(parse_run_config(nlohmann::json{{"dataset", "data"}, {"train", {{"lr", 1}}}}, dir), ConfigError);
  EXPECT_THROW(parse_run_config(nlohmann::json{{"output", "x"}}, dir), ConfigError);
  EXPECT_THROW(parse_run_config(nlohmann::json{{"dataset", "data"}, {"model", {{"block_kind", "resnet"}}}}, dir),
               ConfigError);
  write_text(dir / "broken.json", "{ not json");
  EXPECT_THROW(load_run_config(dir / "broken.json"), ConfigError);
}
