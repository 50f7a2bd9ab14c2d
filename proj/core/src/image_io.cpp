#include "vcsel/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "vcsel/errors.hpp"

namespace vcsel {

namespace {

std::vector<std::uint8_t> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open image " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RawImage decode_png(const std::string& path,
                    const std::vector<std::uint8_t>& bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw ConfigError("bad PNG " + path + ": " + img.message);
  }
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  RawImage out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.channels = gray ? 1 : 3;
  out.data.resize(PNG_IMAGE_SIZE(img));
  // Composite any transparency onto white, the background colour.
  png_color white{255, 255, 255};
  if (!png_image_finish_read(&img, &white, out.data.data(), 0, nullptr)) {
    throw ConfigError("bad PNG " + path + ": " + img.message);
  }
  return out;
}

// Minimal PNM tokenizer: whitespace and '#' comments between header fields.
class PnmReader {
 public:
  PnmReader(const std::string& path, const std::vector<std::uint8_t>& bytes)
      : path_(path), bytes_(bytes) {}

  long number() {
    skip_space();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) fail("number");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1'000'000'000) fail("number");
    }
    return v;
  }

  // Exactly one whitespace byte separates the header from raster data.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("header");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::uint8_t byte(std::size_t off) const { return bytes_[pos_ + off]; }

  [[noreturn]] void fail(const char* what) const {
    throw ConfigError("malformed PNM " + path_ + " (" + what + ")");
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& path_;
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 2;
};

RawImage decode_pnm(const std::string& path,
                    const std::vector<std::uint8_t>& bytes) {
  const char kind = static_cast<char>(bytes[1]);
  PnmReader rd(path, bytes);
  RawImage out;
  out.width = static_cast<int>(rd.number());
  out.height = static_cast<int>(rd.number());
  const long maxval = rd.number();
  if (out.width <= 0 || out.height <= 0 || maxval <= 0 || maxval > 65535) {
    rd.fail("dimensions");
  }
  out.channels = (kind == '3' || kind == '6') ? 3 : 1;
  const std::size_t count =
      static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.data.resize(count);
  auto scale = [maxval](long v) {
    return static_cast<std::uint8_t>(
        std::lround(255.0 * std::min(v, maxval) / static_cast<double>(maxval)));
  };
  if (kind == '2' || kind == '3') {
    for (std::size_t i = 0; i < count; ++i) out.data[i] = scale(rd.number());
    return out;
  }
  rd.end_header();
  const std::size_t bps = maxval < 256 ? 1 : 2;
  if (rd.remaining() < count * bps) rd.fail("truncated raster");
  for (std::size_t i = 0; i < count; ++i) {
    long v = rd.byte(i * bps);
    if (bps == 2) v = (v << 8) | rd.byte(i * bps + 1);
    out.data[i] = scale(v);
  }
  return out;
}

}  // namespace

RawImage read_image(const std::string& path) {
  const std::vector<std::uint8_t> bytes = slurp(path);
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N',  'G',
                                              '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) {
    return decode_png(path, bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' &&
      (bytes[1] == '2' || bytes[1] == '3' || bytes[1] == '5' ||
       bytes[1] == '6')) {
    return decode_pnm(path, bytes);
  }
  throw ConfigError("unsupported image format: " + path +
                    " (expected PNG or PGM/PPM)");
}

void write_pnm(const std::string& path, const RawImage& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ConfigError("PNM output needs 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << (image.channels == 1 ? "P5" : "P6") << '\n'
      << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
  if (!out) throw ConfigError("write failed: " + path);
}

void write_pgm(const std::string& path, const PixelImage& image) {
  RawImage raw;
  raw.width = image.width();
  raw.height = image.height();
  raw.channels = 1;
  raw.data.reserve(image.values().size());
  for (double v : image.values()) {
    raw.data.push_back(static_cast<std::uint8_t>(std::lround(127.5 * (1.0 - v))));
  }
  write_pnm(path, raw);
}

}  // namespace vcsel
