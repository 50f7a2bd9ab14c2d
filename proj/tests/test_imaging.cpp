#include <gtest/gtest.h>

#include <png.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "vcsel/detector.hpp"
#include "vcsel/errors.hpp"
#include "vcsel/image_io.hpp"
#include "vcsel/imaging.hpp"

namespace vcsel {
namespace {

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("vcsel_" + name)).string();
}

RawImage rgb(int w, int h, std::vector<std::uint8_t> data) {
  return RawImage{w, h, 3, std::move(data)};
}

TEST(Binarize, BlackIsInk) {
  const auto img = binarize(rgb(2, 2, {0, 0, 0, 255, 255, 255, 0, 0, 0, 255, 255, 255}),
                            ChannelPolicy::kAverage, 128);
  EXPECT_EQ(img.at(0, 0), 1.0);
  EXPECT_EQ(img.at(0, 1), -1.0);
  EXPECT_EQ(img.at(1, 0), 1.0);
}

TEST(Binarize, ThresholdBoundaryIsWhite) {
  const RawImage gray{2, 2, 1, {128, 128, 128, 128}};
  const auto img = binarize(gray, ChannelPolicy::kAverage, 128);
  for (double v : img.values()) EXPECT_EQ(v, -1.0);
  EXPECT_EQ(binarize(gray, ChannelPolicy::kAverage, 129).at(1, 1), 1.0);
}

TEST(Binarize, GreenPolicyUsesGreenOnly) {
  std::vector<std::uint8_t> d;
  std::vector<std::uint8_t> green;
  for (int i = 0; i < 16; ++i) {
    const auto r = static_cast<std::uint8_t>(i * 37 % 256);
    const auto g = static_cast<std::uint8_t>(i * 91 % 256);
    const auto b = static_cast<std::uint8_t>(255 - r);
    d.insert(d.end(), {r, g, b});
    green.push_back(g);
  }
  const auto a = binarize(rgb(4, 4, d), ChannelPolicy::kGreen, 100);
  const auto b = binarize(RawImage{4, 4, 1, green}, ChannelPolicy::kAverage, 100);
  EXPECT_EQ(a, b);
  EXPECT_THROW(parse_channel_policy("luma"), ConfigError);
  EXPECT_EQ(parse_channel_policy(to_string(ChannelPolicy::kBlue)), ChannelPolicy::kBlue);
}

TEST(PixelImage, Validation) {
  EXPECT_THROW(PixelImage(1, 4), ConfigError);
  EXPECT_THROW(PixelImage(2, 2, std::vector<double>{0, 0, 0}), ConfigError);
  EXPECT_THROW(PixelImage(2, 2, std::vector<double>{0, 0, 0, 1.5}), ConfigError);
}

PixelImage random_image(int w, int h, unsigned seed) {
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  std::uint64_t x = seed * 2654435761u + 1;
  for (double& p : v) {
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    p = (x & 1) ? 1.0 : -1.0;
  }
  return PixelImage(w, h, v);
}

TEST(Noise, GlobalBounds) {
  const auto img = random_image(16, 12, 3);
  EXPECT_EQ(apply_global_noise(img, 0.0, 1), img);
  const auto n = apply_global_noise(img, 20.0, 11);
  for (std::size_t i = 0; i < img.values().size(); ++i) {
    const double v = img.values()[i];
    const double m = n.values()[i];
    EXPECT_LE(std::abs(m - v), 0.2 * std::abs(v) + 1e-12);
    EXPECT_LE(std::abs(m), 1.0);
  }
  EXPECT_EQ(apply_global_noise(img, 20.0, 11), n);
  EXPECT_NE(apply_global_noise(img, 20.0, 12), n);
  EXPECT_THROW(apply_global_noise(img, 120.0, 1), ConfigError);
}

TEST(Noise, BackgroundOnlyTouchesWhite) {
  const auto img = random_image(16, 16, 4);
  EXPECT_EQ(apply_background_noise(img, 0.0, 1), img);
  const auto n = apply_background_noise(img, 40.0, 5);
  const auto full = apply_background_noise(img, 100.0, 5);
  double lo = 1.0, hi = -1.0;
  for (std::size_t i = 0; i < img.values().size(); ++i) {
    if (img.values()[i] == 1.0) {
      EXPECT_EQ(n.values()[i], 1.0);
    } else {
      EXPECT_GE(n.values()[i], -1.0);
      EXPECT_LE(n.values()[i], -1.0 + 0.8);
      lo = std::min(lo, full.values()[i]);
      hi = std::max(hi, full.values()[i]);
    }
  }
  EXPECT_LT(lo, -0.8);
  EXPECT_GT(hi, 0.8);
}

TEST(Kernels, BankShapes) {
  const auto e8 = kernel_bank("edge8_2x2");
  ASSERT_EQ(e8.size(), 8u);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(e8[i].target_sum(), 4.0);
  for (int i = 4; i < 8; ++i) {
    EXPECT_DOUBLE_EQ(e8[i].target_sum(), 3.0);
    EXPECT_DOUBLE_EQ(e8[i].max_quiet_sum(), 2.0);
  }
  EXPECT_DOUBLE_EQ(e8[0].max_quiet_sum(), 2.0);
  EXPECT_EQ(e8[0].weights(), (std::vector<double>{1, -1, 1, -1}));
  EXPECT_EQ(e8[4].weights(), (std::vector<double>{0.5, 0.75, 0.75, -1}));

  const auto n8 = kernel_bank("noise8_2x2");
  for (const auto& k : n8) EXPECT_DOUBLE_EQ(k.target_sum(), 3.0);

  const auto m6 = kernel_bank("mnist6_2x2");
  ASSERT_EQ(m6.size(), 6u);
  for (std::size_t i = 4; i < 6; ++i) {
    // Symmetric about the main diagonal.
    EXPECT_EQ(m6[i].weight(0, 1), m6[i].weight(1, 0)) << m6[i].label();
  }

  const auto e3 = kernel_bank("edge8_3x3");
  ASSERT_EQ(e3.size(), 8u);
  for (const auto& k : e3) {
    EXPECT_DOUBLE_EQ(k.target_sum(), 9.0);
    EXPECT_DOUBLE_EQ(k.max_quiet_sum(), 7.0);
    EXPECT_EQ(k.quiet_products().size(), 9u);
  }
  EXPECT_THROW(kernel_bank("sobel"), ConfigError);
}

TEST(Kernels, DiagonalsAreRotations) {
  for (const char* bank : {"edge8_2x2", "edge8_3x3"}) {
    const auto b = kernel_bank(bank);
    for (int i = 4; i < 7; ++i) {
      EXPECT_EQ(b[i].rotated().weights(), b[i + 1].weights()) << bank << i;
    }
    EXPECT_EQ(b[7].rotated().weights(), b[4].weights());
  }
}

TEST(Kernels, QuietProductsReachMaxQuietSum) {
  for (const auto& k : kernel_bank("edge8_2x2")) {
    for (const auto& q : k.quiet_products()) {
      EXPECT_DOUBLE_EQ(std::accumulate(q.begin(), q.end(), 0.0), k.max_quiet_sum());
    }
  }
}

TEST(Hadamard, ShapesAndProducts) {
  PixelImage img(28, 28);
  const auto f = hadamard_field(img, kernel_bank("mnist6_2x2")[0]);
  EXPECT_EQ(f.out_width(), 27);
  EXPECT_EQ(f.out_height(), 27);
  EXPECT_EQ(hadamard_field(img, kernel_bank("edge8_3x3")[0]).out_width(), 26);

  const PixelImage w(2, 2, std::vector<double>{1, -1, 1, -1});
  const auto v = hadamard_field(w, kernel_bank("edge8_2x2")[0]);
  const auto p = v.products_at(0, 0);
  EXPECT_EQ(std::vector<double>(p.begin(), p.end()), (std::vector<double>{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(v.sum_at(0, 0), 4.0);

  const PixelImage small(2, 3);
  EXPECT_THROW(hadamard_field(small, kernel_bank("edge8_3x3")[0]), ConfigError);
}

TEST(Hadamard, BruteForceSums) {
  const auto img = random_image(9, 7, 8);
  for (const auto& k : kernel_bank("edge8_3x3")) {
    const auto f = hadamard_field(img, k);
    for (int r = 0; r < f.out_height(); ++r) {
      for (int c = 0; c < f.out_width(); ++c) {
        double s = 0.0;
        for (int i = 0; i < k.rows(); ++i) {
          for (int j = 0; j < k.cols(); ++j) s += img.at(r + i, c + j) * k.weight(i, j);
        }
        EXPECT_DOUBLE_EQ(f.sum_at(r, c), s);
      }
    }
  }
}

// Rotating image and kernel together rotates the oracle map.
TEST(Hadamard, RotationalCoherence) {
  const auto img = random_image(10, 7, 21);
  for (const auto& k : kernel_bank("edge8_2x2")) {
    const auto m = reference_edges(img, k);
    const auto mr = reference_edges(img.rotated(), k.rotated());
    ASSERT_EQ(mr.width(), m.height());
    for (int r = 0; r < m.height(); ++r) {
      for (int c = 0; c < m.width(); ++c) {
        EXPECT_EQ(m.at(r, c), mr.at(c, m.height() - 1 - r));
      }
    }
  }
  EXPECT_EQ(img.rotated().rotated().rotated().rotated(), img);
}

TEST(ImageIo, PnmVariants) {
  const std::string p2 = tmp("a.pgm");
  std::ofstream(p2) << "P2\n# comment\n3 2\n# another\n255\n0 128 255\n10 20 30\n";
  RawImage a = read_image(p2);
  EXPECT_EQ(a.width, 3);
  EXPECT_EQ(a.height, 2);
  EXPECT_EQ(a.channels, 1);
  EXPECT_EQ(a.data, (std::vector<std::uint8_t>{0, 128, 255, 10, 20, 30}));

  const std::string p3 = tmp("b.ppm");
  std::ofstream(p3) << "P3 1 1 15 15 0 7\n";
  RawImage b = read_image(p3);
  EXPECT_EQ(b.channels, 3);
  EXPECT_EQ(b.data, (std::vector<std::uint8_t>{255, 0, 119}));

  const std::string p5 = tmp("c.pgm");
  write_pnm(p5, a);
  EXPECT_EQ(read_image(p5).data, a.data);
  const std::string p6 = tmp("d.ppm");
  const RawImage c = rgb(2, 1, {1, 2, 3, 4, 5, 6});
  write_pnm(p6, c);
  EXPECT_EQ(read_image(p6).data, c.data);

  // 16-bit binary PGM scales to 8 bits.
  const std::string wide = tmp("e.pgm");
  {
    std::ofstream out(wide, std::ios::binary);
    out << "P5 2 1 65535\n";
    const unsigned char px[] = {0xff, 0xff, 0x00, 0x00};
    out.write(reinterpret_cast<const char*>(px), 4);
  }
  EXPECT_EQ(read_image(wide).data, (std::vector<std::uint8_t>{255, 0}));

  const std::string bad = tmp("f.pgm");
  std::ofstream(bad) << "P5 4 4 255\nxx";
  EXPECT_THROW(read_image(bad), ConfigError);
  EXPECT_THROW(read_image(tmp("missing.pgm")), ConfigError);
  for (const auto& p : {p2, p3, p5, p6, wide, bad}) std::filesystem::remove(p);
}

TEST(ImageIo, PngRead) {
  const std::string path = tmp("g.png");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = 2;
  img.height = 2;
  img.format = PNG_FORMAT_RGB;
  const std::uint8_t px[] = {0, 0, 0, 255, 255, 255, 0, 200, 0, 10, 20, 30};
  ASSERT_TRUE(png_image_write_to_file(&img, path.c_str(), 0, px, 0, nullptr));
  const RawImage r = read_image(path);
  EXPECT_EQ(r.width, 2);
  EXPECT_EQ(r.channels, 3);
  EXPECT_EQ(r.data, std::vector<std::uint8_t>(px, px + 12));
  const auto b = binarize(r, ChannelPolicy::kGreen, 128);
  EXPECT_EQ(b.values(), (std::vector<double>{1, -1, -1, 1}));
  std::filesystem::remove(path);
}

TEST(ImageIo, PgmDump) {
  const std::string path = tmp("h.pgm");
  write_pgm(path, PixelImage(2, 2, std::vector<double>{1.0, -1.0, -1.0, 1.0}));
  EXPECT_EQ(read_image(path).data, (std::vector<std::uint8_t>{0, 255, 255, 0}));
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace vcsel
