#include "vcsel/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "vcsel/errors.hpp"

namespace vcsel {

ChannelPolicy parse_channel_policy(std::string_view name) {
  if (name == "average") return ChannelPolicy::kAverage;
  if (name == "red") return ChannelPolicy::kRed;
  if (name == "green") return ChannelPolicy::kGreen;
  if (name == "blue") return ChannelPolicy::kBlue;
  throw ConfigError("unknown channel policy '" + std::string(name) +
                    "' (expected average, red, green or blue)");
}

std::string_view to_string(ChannelPolicy policy) {
  switch (policy) {
    case ChannelPolicy::kAverage: return "average";
    case ChannelPolicy::kRed: return "red";
    case ChannelPolicy::kGreen: return "green";
    case ChannelPolicy::kBlue: return "blue";
  }
  return "average";
}

PixelImage::PixelImage(int width, int height, double fill)
    : PixelImage(width, height,
                 std::vector<double>(static_cast<std::size_t>(
                                         std::max(width, 0)) *
                                         std::max(height, 0),
                                     fill)) {}

PixelImage::PixelImage(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width < 2 || height < 2) {
    throw ConfigError("image must be at least 2x2");
  }
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    throw ConfigError("pixel count does not match image dimensions");
  }
  for (double v : values_) {
    if (!(std::abs(v) <= 1.0)) throw ConfigError("pixel value outside [-1, 1]");
  }
}

void PixelImage::set(int row, int col, double v) {
  if (!(std::abs(v) <= 1.0)) throw ConfigError("pixel value outside [-1, 1]");
  values_[index(row, col)] = v;
}

PixelImage PixelImage::rotated() const {
  PixelImage out(height_, width_);
  for (int r = 0; r < height_; ++r) {
    for (int c = 0; c < width_; ++c) {
      out.values_[out.index(c, height_ - 1 - r)] = at(r, c);
    }
  }
  return out;
}

PixelImage binarize(const RawImage& raw, ChannelPolicy policy, int threshold) {
  if (raw.width <= 0 || raw.height <= 0 || raw.data.empty()) {
    throw ConfigError("cannot binarize an empty image");
  }
  if (raw.channels != 1 && raw.channels != 3) {
    throw ConfigError("expected a grayscale or RGB image");
  }
  if (threshold < 0 || threshold > 255) {
    throw ConfigError("binarization threshold must be in 0..255");
  }
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(raw.width) * raw.height);
  for (int r = 0; r < raw.height; ++r) {
    for (int c = 0; c < raw.width; ++c) {
      double level;
      if (raw.channels == 1) {
        level = raw.at(r, c, 0);
      } else {
        switch (policy) {
          case ChannelPolicy::kRed: level = raw.at(r, c, 0); break;
          case ChannelPolicy::kGreen: level = raw.at(r, c, 1); break;
          case ChannelPolicy::kBlue: level = raw.at(r, c, 2); break;
          default:
            level = (raw.at(r, c, 0) + raw.at(r, c, 1) + raw.at(r, c, 2)) / 3.0;
        }
      }
      values.push_back(level < threshold ? 1.0 : -1.0);
    }
  }
  return PixelImage(raw.width, raw.height, std::move(values));
}

namespace {

void check_pct(double pct) {
  if (!(pct >= 0.0 && pct <= 100.0)) {
    throw ConfigError("noise percentage must be within [0, 100]");
  }
}

}  // namespace

PixelImage apply_global_noise(const PixelImage& image, double pct,
                              std::uint64_t seed) {
  check_pct(pct);
  if (pct == 0.0) return image;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-pct / 100.0, pct / 100.0);
  std::vector<double> values = image.values();
  for (double& v : values) v = std::clamp(v * (1.0 + u(rng)), -1.0, 1.0);
  return PixelImage(image.width(), image.height(), std::move(values));
}

PixelImage apply_background_noise(const PixelImage& image, double pct,
                                  std::uint64_t seed) {
  check_pct(pct);
  if (pct == 0.0) return image;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, -1.0 + 2.0 * pct / 100.0);
  std::vector<double> values = image.values();
  for (double& v : values) {
    if (v == -1.0) v = std::min(u(rng), 1.0);
  }
  return PixelImage(image.width(), image.height(), std::move(values));
}

KernelOp::KernelOp(int rows, int cols, std::vector<double> weights,
                   std::string label)
    : rows_(rows), cols_(cols), weights_(std::move(weights)),
      label_(std::move(label)) {
  if (rows < 2 || rows > 3 || cols < 2 || cols > 3) {
    throw ConfigError("kernel dimensions must be 2 or 3");
  }
  if (weights_.size() != static_cast<std::size_t>(rows * cols)) {
    throw ConfigError("kernel weight count does not match dimensions");
  }
  for (double w : weights_) {
    if (!std::isfinite(w)) throw ConfigError("kernel weight is not finite");
    target_sum_ += std::abs(w);
  }
  if (!(target_sum_ > 0.0)) throw ConfigError("kernel has no nonzero weight");
}

double KernelOp::max_quiet_sum() const {
  double smallest = std::numeric_limits<double>::infinity();
  for (double w : weights_) {
    if (w != 0.0) smallest = std::min(smallest, std::abs(w));
  }
  return target_sum_ - 2.0 * smallest;
}

std::vector<double> KernelOp::target_products() const {
  std::vector<double> out(weights_.size());
  std::transform(weights_.begin(), weights_.end(), out.begin(),
                 [](double w) { return std::abs(w); });
  return out;
}

std::vector<std::vector<double>> KernelOp::quiet_products() const {
  const double quiet = max_quiet_sum();
  const std::vector<double> base = target_products();
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base[i] == 0.0) continue;
    if (std::abs(target_sum_ - 2.0 * base[i] - quiet) > 1e-12) continue;
    std::vector<double> p = base;
    p[i] = -p[i];
    out.push_back(std::move(p));
  }
  return out;
}

KernelOp KernelOp::rotated() const {
  std::vector<double> w(weights_.size());
  // (r, c) -> (c, rows - 1 - r) in a cols x rows kernel.
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      w[c * rows_ + (rows_ - 1 - r)] = weight(r, c);
    }
  }
  return KernelOp(cols_, rows_, std::move(w), label_ + "_rot");
}

HadamardField::HadamardField(int out_width, int out_height, std::size_t window,
                             std::vector<double> products)
    : out_width_(out_width), out_height_(out_height), window_(window),
      products_(std::move(products)) {
  if (products_.size() != pixel_count() * window_) {
    throw ConfigError("Hadamard field size mismatch");
  }
}

std::span<const double> HadamardField::products_at(int row, int col) const {
  return products_at(static_cast<std::size_t>(row) * out_width_ + col);
}

std::span<const double> HadamardField::products_at(std::size_t pixel) const {
  return {products_.data() + pixel * window_, window_};
}

double HadamardField::sum_at(int row, int col) const {
  double s = 0.0;
  for (double p : products_at(row, col)) s += p;
  return s;
}

HadamardField hadamard_field(const PixelImage& image, const KernelOp& kernel) {
  if (image.width() < kernel.cols() || image.height() < kernel.rows()) {
    std::ostringstream os;
    os << "image " << image.width() << "x" << image.height()
       << " is smaller than the " << kernel.rows() << "x" << kernel.cols()
       << " kernel";
    throw ConfigError(os.str());
  }
  const int ow = image.width() - kernel.cols() + 1;
  const int oh = image.height() - kernel.rows() + 1;
  std::vector<double> products;
  products.reserve(static_cast<std::size_t>(ow) * oh * kernel.size());
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      for (int i = 0; i < kernel.rows(); ++i) {
        for (int j = 0; j < kernel.cols(); ++j) {
          products.push_back(kernel.weight(i, j) * image.at(r + i, c + j));
        }
      }
    }
  }
  return HadamardField(ow, oh, kernel.size(), std::move(products));
}

namespace {

KernelOp k2(std::vector<double> w, std::string label) {
  return KernelOp(2, 2, std::move(w), std::move(label));
}

KernelOp k3(std::vector<double> w, std::string label) {
  return KernelOp(3, 3, std::move(w), std::move(label));
}

std::vector<KernelOp> diagonal_2x2() {
  std::vector<KernelOp> out;
  KernelOp k = k2({0.5, 0.75, 0.75, -1.0}, "diagonal_0");
  for (int i = 0; i < 4; ++i) {
    out.emplace_back(2, 2, k.weights(), "diagonal_" + std::to_string(i));
    k = k.rotated();
  }
  return out;
}

std::vector<KernelOp> edge8_2x2(double vh) {
  std::vector<KernelOp> out{
      k2({vh, -vh, vh, -vh}, "vertical_0"),
      k2({-vh, vh, -vh, vh}, "vertical_1"),
      k2({vh, vh, -vh, -vh}, "horizontal_0"),
      k2({-vh, -vh, vh, vh}, "horizontal_1"),
  };
  for (auto& k : diagonal_2x2()) out.push_back(std::move(k));
  return out;
}

}  // namespace

std::vector<std::string> kernel_bank_names() {
  return {"edge8_2x2", "mnist6_2x2", "edge8_3x3", "noise8_2x2"};
}

std::vector<KernelOp> kernel_bank(std::string_view name) {
  if (name == "edge8_2x2") return edge8_2x2(1.0);
  if (name == "noise8_2x2") return edge8_2x2(0.75);
  if (name == "mnist6_2x2") {
    auto all = edge8_2x2(1.0);
    // Keep the diagonals that are symmetric about the main diagonal.
    return {all[0], all[1], all[2], all[3], all[4], all[6]};
  }
  if (name == "edge8_3x3") {
    std::vector<KernelOp> out{
        k3({1, 1, -1, 1, 1, -1, 1, 1, -1}, "vertical_0"),
        k3({-1, 1, 1, -1, 1, 1, -1, 1, 1}, "vertical_1"),
        k3({1, 1, 1, 1, 1, 1, -1, -1, -1}, "horizontal_0"),
        k3({-1, -1, -1, 1, 1, 1, 1, 1, 1}, "horizontal_1"),
    };
    KernelOp d = k3({1, 1, 1, 1, 1, -1, 1, -1, -1}, "diagonal_0");
    for (int i = 0; i < 4; ++i) {
      out.emplace_back(3, 3, d.weights(), "diagonal_" + std::to_string(i));
      d = d.rotated();
    }
    return out;
  }
  throw ConfigError("unknown kernel bank '" + std::string(name) + "'");
}

}  // namespace vcsel
