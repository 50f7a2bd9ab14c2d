#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>

#include "vcsel/config.hpp"
#include "vcsel/errors.hpp"
#include "vcsel/features.hpp"
#include "vcsel/mnist.hpp"
#include "vcsel/runner.hpp"

#ifndef VCSEL_TEST_DATA
#define VCSEL_TEST_DATA "tests/data"
#endif

namespace vcsel {
namespace {

namespace fs = std::filesystem;

const std::string kImages = std::string(VCSEL_TEST_DATA) + "/mnist100-images-idx3-ubyte";
const std::string kLabels = std::string(VCSEL_TEST_DATA) + "/mnist100-labels-idx1-ubyte";

std::string tmp(const std::string& name) {
  return (fs::temp_directory_path() / ("vcsel_rt_" + name)).string();
}

TEST(Timing, KnownLayouts) {
  EXPECT_EQ(predicted_runtime_ps(27, 27, 6, 500, 3000), 6'561'000'000);
  EXPECT_EQ(format_ps(6'561'000'000), "6.561 ms");
  EXPECT_EQ(predicted_runtime_ps(322, 322, 1, 1, 3000), 311'052'000);
  EXPECT_EQ(format_ps(311'052'000), "311.052 us");
  EXPECT_EQ(predicted_runtime_ps(27, 27, 6, 1, 3000), 13'122'000);
  EXPECT_EQ(predicted_runtime_ps(27, 27, 6, 500, 3000),
            3 * predicted_runtime_ps(27, 27, 6, 500, 1000));
  EXPECT_EQ(format_ps(0), "0 ps");
  EXPECT_EQ(format_ps(1500), "1.5 ns");
  EXPECT_THROW(predicted_runtime_ps(1, 1, 1, 1, 0), ConfigError);
}

TEST(Timing, LayoutRuntime) {
  RunLayout l;
  l.pixel_window_ps = 3000;
  l.windows.resize(729 * 6);
  EXPECT_EQ(predicted_runtime_ps(l), 13'122'000);
}

TEST(Execution, TaskSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a) {
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(task_seed(1, a, b));
  }
  EXPECT_EQ(seen.size(), 400u);
  EXPECT_EQ(task_seed(9, 3, 4), task_seed(9, 3, 4));
  EXPECT_NE(task_seed(9, 3, 4), task_seed(10, 3, 4));
}

TEST(Execution, ParallelForCoversAndRethrows) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  try {
    parallel_for(50, 4, [](std::size_t i) {
      if (i == 7 || i == 31) throw ConfigError("task " + std::to_string(i));
    });
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "task 7");
  }
}

TEST(Inputs, BuiltinDigit) {
  const auto d = builtin_image("digit4");
  EXPECT_EQ(d.width(), 32);
  EXPECT_EQ(d.height(), 32);
  std::size_t ink = 0;
  for (double v : d.values()) ink += v > 0;
  EXPECT_GT(ink, 100u);
  EXPECT_THROW(builtin_image("digit5"), ConfigError);
}

TEST(Config, DefaultsRoundTrip) {
  const RunConfig d = RunConfig::defaults();
  const RunConfig back = RunConfig::from_json(d.to_json());
  EXPECT_EQ(back.to_json(), d.to_json());
  EXPECT_EQ(back.hash(), d.hash());
  EXPECT_NO_THROW(d.validate());
  EXPECT_DOUBLE_EQ(d.sfm.delta_f, -4.0);
  EXPECT_EQ(d.encoding.pixel_window_ps, 3000);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(RunConfig::from_json({{"bnak", "edge8_2x2"}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json({{"sim", {{"dt", 1.0}}}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json({{"workers", "many"}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json({{"bank", "sobel"}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json({{"noise", {{"percentages", {0, 150}}}}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json({{"input", {{"images", {"/nonexistent.png"}}}}}),
               ConfigError);
  RunConfig c;
  c.sim.dt_ps = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(RunConfig::load("/nonexistent.json"), ConfigError);
}

TEST(Config, HashIgnoresExecutionSettings) {
  RunConfig a;
  RunConfig b;
  b.workers = 7;
  b.output_dir = "elsewhere";
  EXPECT_EQ(a.hash(), b.hash());
  b.sim.rng_seed = 2;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Config, DerivedSettings) {
  RunConfig c;
  c.sim.dt_ps = 0.25;
  c.record_period_ps = 1.0;
  EXPECT_EQ(c.sim_config().record_stride, 4u);
  const auto e3 = c.encoding_for(kernel_bank("edge8_3x3"));
  EXPECT_DOUBLE_EQ(e3.pulse_separation_ps, 110.0);
  EXPECT_DOUBLE_EQ(e3.sample_period_ps, 0.25);
  EXPECT_DOUBLE_EQ(c.encoding_for(kernel_bank("edge8_2x2")).pulse_separation_ps, 150.0);
  EXPECT_GE(c.worker_count(), 1u);
}

TEST(Mnist, ReadsBundledSubset) {
  const IdxHeader h = read_idx_header(kImages);
  EXPECT_EQ(h.magic, 2051u);
  EXPECT_EQ(h.dims, (std::vector<std::uint32_t>{100, 28, 28}));
  const MnistSet s = load_mnist_idx(kImages, kLabels);
  ASSERT_EQ(s.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(s.labels[i], i % 10);
  const PixelImage img = mnist_image(s, 0);
  EXPECT_EQ(img.width(), 28);
  std::size_t ink = 0;
  for (std::size_t p = 0; p < s.images[0].size(); ++p) {
    EXPECT_EQ(img.values()[p], s.images[0][p] >= 1 ? 1.0 : -1.0);
    ink += s.images[0][p] > 0;
  }
  EXPECT_GT(ink, 20u);
  EXPECT_THROW(mnist_image(s, 100), ConfigError);
}

TEST(Mnist, RejectsMalformedFiles) {
  EXPECT_THROW(load_mnist_idx(kLabels, kLabels), ConfigError);
  EXPECT_THROW(load_mnist_idx(kImages, kImages), ConfigError);

  MnistSet s;
  s.rows = 2;
  s.cols = 2;
  s.images = {{0, 1, 2, 3}, {4, 5, 6, 7}};
  s.labels = {3, 4};
  const auto ip = tmp("i.idx"), lp = tmp("l.idx");
  write_mnist_idx(ip, lp, s);
  const MnistSet back = load_mnist_idx(ip, lp);
  EXPECT_EQ(back.images, s.images);
  EXPECT_EQ(back.labels, s.labels);

  MnistSet one = s;
  one.images.pop_back();
  one.labels.pop_back();
  const auto lp1 = tmp("l1.idx"), ip1 = tmp("i1.idx");
  write_mnist_idx(ip1, lp1, one);
  EXPECT_THROW(load_mnist_idx(ip, lp1), ConfigError);  // count mismatch

  fs::resize_file(ip, 16 + 5);
  EXPECT_THROW(load_mnist_idx(ip, lp), ConfigError);  // truncated
  for (const auto& p : {ip, lp, ip1, lp1}) fs::remove(p);
}

std::vector<FeatureMapSet> sample_sets(std::size_t n) {
  std::vector<FeatureMapSet> sets;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureMapSet s;
    s.id = static_cast<std::uint32_t>(100 + i);
    s.label = static_cast<std::uint8_t>(i % 10);
    for (int k = 0; k < 6; ++k) {
      ReconstructedMap m(27, 27, "k" + std::to_string(k));
      for (int p = 0; p < 729; ++p) {
        if ((p * 7 + k * 3 + static_cast<int>(i)) % 5 == 0) m.set(p / 27, p % 27, true);
      }
      s.maps.push_back(m);
    }
    sets.push_back(std::move(s));
  }
  return sets;
}

TEST(Features, RoundTripAndSize) {
  const auto path = tmp("f.vsfm");
  const auto sets = sample_sets(12);
  export_feature_maps(sets, path, {{"provenance", "test"}});
  EXPECT_EQ(fs::file_size(path), vsfm_file_size(12, 6, 27, 27));
  EXPECT_EQ(vsfm_file_size(12, 6, 27, 27), 24 + 12 * (4 + 1 + 6 * 729u));
  EXPECT_EQ(vsfm_file_size(5000, 6, 27, 27), 24 + 5000u * (4 + 1 + 6 * 729));
  const auto back = import_feature_maps(path);
  ASSERT_EQ(back.size(), sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    EXPECT_EQ(back[i].id, sets[i].id);
    EXPECT_EQ(back[i].label, sets[i].label);
    EXPECT_EQ(back[i].maps, sets[i].maps);
    EXPECT_EQ(back[i].maps[2].label(), "k2");
  }
  std::ifstream js(path + ".json");
  const auto side = nlohmann::json::parse(js);
  EXPECT_EQ(side["format"], "VSFM");
  EXPECT_EQ(side["image_count"], 12);
  EXPECT_EQ(side["maps_per_image"], 6);
  EXPECT_EQ(side["provenance"], "test");
  EXPECT_EQ(side["byte_size"], vsfm_file_size(12, 6, 27, 27));
  fs::remove(path);
  fs::remove(path + ".json");
}

TEST(Features, RejectsBadInput) {
  EXPECT_THROW(export_feature_maps({}, tmp("e.vsfm")), ConfigError);
  const auto path = tmp("g.vsfm");
  export_feature_maps(sample_sets(2), path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(24 + 5);
    f.put(7);
  }
  EXPECT_THROW(import_feature_maps(path), ConfigError);
  fs::resize_file(path, 30);
  EXPECT_THROW(import_feature_maps(path), ConfigError);
  fs::remove(path);
  fs::remove(path + ".json");
}

TEST(MnistBatch, OracleOnly) {
  RunConfig c;
  c.bank = "mnist6_2x2";
  c.oracle_only = true;
  c.mnist_count = 20;
  c.output_dir = tmp("mnist_out");
  const MnistSet set = load_mnist_idx(kImages, kLabels);
  const auto res = run_mnist_batch(c, set);
  ASSERT_EQ(res.features.size(), 20u);
  EXPECT_EQ(res.features[3].label, 3);
  EXPECT_EQ(res.features[0].maps.size(), 6u);
  EXPECT_EQ(res.per_image_ps, 13'122'000);
  EXPECT_EQ(res.simulated_ps, 20 * 13'122'000);
  EXPECT_TRUE(fs::exists(c.output_dir + "/features.vsfm"));
  EXPECT_TRUE(fs::exists(c.output_dir + "/manifest.json"));
  const auto back = import_feature_maps(c.output_dir + "/features.vsfm");
  EXPECT_EQ(back[5].maps, res.features[5].maps);
  fs::remove_all(c.output_dir);

  c.mnist_count = 0;
  EXPECT_THROW(run_mnist_batch(c, set), ConfigError);
  c.mnist_count = 101;
  EXPECT_THROW(run_mnist_batch(c, set), ConfigError);
}

// Small end-to-end run through the laser at a coarse step.
TEST(EdgeDetect, SmallImageMatchesOracle) {
  RunConfig c;
  c.sim.dt_ps = 0.5;
  c.output_dir = tmp("edge_out");
  c.workers = 2;
  PixelImage img(6, 5, -1.0);
  for (int r = 1; r < 4; ++r) {
    for (int col = 1; col < 4; ++col) img.set(r, col, 1.0);
  }
  img.set(1, 3, -1.0);
  const auto res = run_edge_detect(c, {img});
  ASSERT_EQ(res.maps.size(), 1u);
  ASSERT_EQ(res.maps[0].size(), 8u);
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(res.maps[0][k], res.oracle[0][k]) << res.kernels[k].label();
  }
  EXPECT_EQ(res.combined_metrics.false_pos, 0u);
  EXPECT_EQ(res.combined_metrics.false_neg, 0u);
  EXPECT_GT(res.combined_metrics.true_pos, 0u);
  EXPECT_EQ(res.simulated_ps, 8 * 20 * 3000);
  for (const char* f : {"metrics.json", "calibration.json", "manifest.json",
                        "spikes_vertical_0.csv", "maps/img0_combined.pgm"}) {
    EXPECT_TRUE(fs::exists(c.output_dir + "/" + f)) << f;
  }
  std::ifstream m(c.output_dir + "/manifest.json");
  const auto manifest = nlohmann::json::parse(m);
  EXPECT_EQ(manifest["command"], "edge-detect");
  EXPECT_FALSE(manifest["config"].contains("workers"));
  EXPECT_TRUE(manifest.contains("config_hash"));
  fs::remove_all(c.output_dir);
}

TEST(EdgeDetect, UnknownBank) {
  RunConfig c;
  c.bank = "prewitt";
  c.output_dir.clear();
  EXPECT_THROW(run_edge_detect(c, {PixelImage(4, 4)}), ConfigError);
}

}  // namespace
}  // namespace vcsel
