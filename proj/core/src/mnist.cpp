#include "vcsel/mnist.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "vcsel/errors.hpp"

namespace vcsel {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw ConfigError("truncated IDX header in " + path);
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

IdxHeader parse_header(std::istream& in, const std::string& path) {
  IdxHeader h;
  h.magic = read_be32(in, path);
  // Byte 3 of the magic is the dimension count; byte 2 the type (0x08 = u8).
  if ((h.magic >> 16) != 0 || ((h.magic >> 8) & 0xff) != 0x08) {
    std::ostringstream os;
    os << "bad IDX magic 0x" << std::hex << h.magic << " in " << path;
    throw ConfigError(os.str());
  }
  const std::uint32_t ndim = h.magic & 0xff;
  if (ndim == 0 || ndim > 4) throw ConfigError("bad IDX rank in " + path);
  for (std::uint32_t i = 0; i < ndim; ++i) h.dims.push_back(read_be32(in, path));
  return h;
}

}  // namespace

IdxHeader read_idx_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  return parse_header(in, path);
}

MnistSet load_mnist_idx(const std::string& images_path,
                        const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw ConfigError("cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw ConfigError("cannot open " + labels_path);

  const IdxHeader ih = parse_header(img, images_path);
  if (ih.magic != kImagesMagic) {
    throw ConfigError(images_path + " is not an IDX image file (magic 2051)");
  }
  const IdxHeader lh = parse_header(lab, labels_path);
  if (lh.magic != kLabelsMagic) {
    throw ConfigError(labels_path + " is not an IDX label file (magic 2049)");
  }
  if (ih.dims[0] != lh.dims[0]) {
    std::ostringstream os;
    os << "image count " << ih.dims[0] << " does not match label count "
       << lh.dims[0];
    throw ConfigError(os.str());
  }
  MnistSet set;
  set.rows = ih.dims[1];
  set.cols = ih.dims[2];
  if (set.rows < 2 || set.cols < 2 || set.rows > 4096 || set.cols > 4096) {
    throw ConfigError("implausible IDX image size in " + images_path);
  }
  const std::size_t px = static_cast<std::size_t>(set.rows) * set.cols;
  set.images.resize(ih.dims[0], std::vector<std::uint8_t>(px));
  for (auto& image : set.images) {
    if (!img.read(reinterpret_cast<char*>(image.data()),
                  static_cast<std::streamsize>(px))) {
      throw ConfigError("truncated IDX image data in " + images_path);
    }
  }
  set.labels.resize(lh.dims[0]);
  if (!lab.read(reinterpret_cast<char*>(set.labels.data()),
                static_cast<std::streamsize>(set.labels.size()))) {
    throw ConfigError("truncated IDX label data in " + labels_path);
  }
  return set;
}

void write_mnist_idx(const std::string& images_path,
                     const std::string& labels_path, const MnistSet& set) {
  if (set.images.size() != set.labels.size()) {
    throw ConfigError("image and label counts differ");
  }
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw ConfigError("cannot write IDX output");
  write_be32(img, kImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(set.images.size()));
  write_be32(img, set.rows);
  write_be32(img, set.cols);
  for (const auto& image : set.images) {
    img.write(reinterpret_cast<const char*>(image.data()),
              static_cast<std::streamsize>(image.size()));
  }
  write_be32(lab, kLabelsMagic);
  write_be32(lab, static_cast<std::uint32_t>(set.labels.size()));
  lab.write(reinterpret_cast<const char*>(set.labels.data()),
            static_cast<std::streamsize>(set.labels.size()));
  if (!img || !lab) throw ConfigError("IDX write failed");
}

PixelImage mnist_image(const MnistSet& set, std::size_t index, int threshold) {
  if (index >= set.size()) throw ConfigError("MNIST index out of range");
  std::vector<double> v;
  v.reserve(set.images[index].size());
  for (auto p : set.images[index]) v.push_back(p >= threshold ? 1.0 : -1.0);
  return PixelImage(static_cast<int>(set.cols), static_cast<int>(set.rows),
                    std::move(v));
}

}  // namespace vcsel
