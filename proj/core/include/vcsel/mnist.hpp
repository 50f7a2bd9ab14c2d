#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcsel/imaging.hpp"

namespace vcsel {

// Big-endian IDX pair as distributed by the MNIST database.
struct MnistSet {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::vector<std::uint8_t>> images;  // rows * cols bytes each
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return images.size(); }
};

struct IdxHeader {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
};

IdxHeader read_idx_header(const std::string& path);

// Images need magic 0x00000803, labels 0x00000801, and equal counts.
MnistSet load_mnist_idx(const std::string& images_path,
                        const std::string& labels_path);

void write_mnist_idx(const std::string& images_path,
                     const std::string& labels_path, const MnistSet& set);

// Ink (pixel >= threshold) becomes +1, background -1.
PixelImage mnist_image(const MnistSet& set, std::size_t index, int threshold = 1);

}  // namespace vcsel
