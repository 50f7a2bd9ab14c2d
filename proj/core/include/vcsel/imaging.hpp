#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vcsel {

// 8-bit image as decoded from disk: 1 (gray) or 3 (RGB) interleaved channels.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int row, int col, int channel) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels +
                channel];
  }
};

enum class ChannelPolicy { kAverage, kRed, kGreen, kBlue };

ChannelPolicy parse_channel_policy(std::string_view name);
std::string_view to_string(ChannelPolicy policy);

// Row-major grid of values in [-1, 1]; +1 is black (ink), -1 is white.
class PixelImage {
 public:
  PixelImage() = default;
  PixelImage(int width, int height, double fill = -1.0);
  PixelImage(int width, int height, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  double at(int row, int col) const { return values_[index(row, col)]; }
  void set(int row, int col, double v);
  const std::vector<double>& values() const { return values_; }

  // Quarter turn clockwise.
  PixelImage rotated() const;

  bool operator==(const PixelImage&) const = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

// Pixels darker than `threshold` become +1, the rest -1.
PixelImage binarize(const RawImage& raw, ChannelPolicy policy, int threshold);

// v -> v * (1 + u), u ~ U[-pct/100, pct/100], clamped to [-1, 1].
PixelImage apply_global_noise(const PixelImage& image, double pct,
                              std::uint64_t seed);
// White (-1) pixels only, redrawn from U[-1, -1 + 2 pct/100].
PixelImage apply_background_noise(const PixelImage& image, double pct,
                                  std::uint64_t seed);

class KernelOp {
 public:
  KernelOp(int rows, int cols, std::vector<double> weights, std::string label);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  double weight(int r, int c) const { return weights_[r * cols_ + c]; }
  const std::string& label() const { return label_; }

  // Largest Hadamard sum over {-1,+1} windows: sum |w|.
  double target_sum() const { return target_sum_; }
  // Next-highest achievable sum: the smallest nonzero weight flipped.
  double max_quiet_sum() const;
  // Oracle decision boundary, midway between the two.
  double decision_boundary() const {
    return 0.5 * (target_sum() + max_quiet_sum());
  }

  // Products of the matching window, in row-major kernel order.
  std::vector<double> target_products() const;
  // Every product vector of a binary window that sums to max_quiet_sum().
  std::vector<std::vector<double>> quiet_products() const;

  // Quarter turn clockwise.
  KernelOp rotated() const;

 private:
  int rows_;
  int cols_;
  std::vector<double> weights_;
  std::string label_;
  double target_sum_ = 0.0;
};

// Elementwise products for every anchor of a no-padding sliding window.
class HadamardField {
 public:
  HadamardField(int out_width, int out_height, std::size_t window,
                std::vector<double> products);

  int out_width() const { return out_width_; }
  int out_height() const { return out_height_; }
  std::size_t window() const { return window_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(out_width_) * out_height_;
  }
  std::span<const double> products_at(int row, int col) const;
  std::span<const double> products_at(std::size_t pixel) const;
  double sum_at(int row, int col) const;

 private:
  int out_width_;
  int out_height_;
  std::size_t window_;
  std::vector<double> products_;
};

// Anchor at the window's top-left; row-major scan.
HadamardField hadamard_field(const PixelImage& image, const KernelOp& kernel);

// Known banks: edge8_2x2, mnist6_2x2, edge8_3x3, noise8_2x2.
std::vector<KernelOp> kernel_bank(std::string_view name);
std::vector<std::string> kernel_bank_names();

}  // namespace vcsel
