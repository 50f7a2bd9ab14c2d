#include "vcsel/features.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vcsel/errors.hpp"

namespace vcsel {

namespace {

static_assert(std::endian::native == std::endian::little,
              "VSFM codec assumes a little-endian host");

constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kHeaderBytes = 4 + 5 * 4;

void put32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get32(std::istream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) {
    throw ConfigError("truncated VSFM file " + path);
  }
  return v;
}

}  // namespace

std::uint64_t vsfm_file_size(std::uint64_t images, std::uint32_t k,
                             std::uint32_t width, std::uint32_t height) {
  return kHeaderBytes +
         images * (4 + 1 + std::uint64_t{k} * width * height);
}

void export_feature_maps(const std::vector<FeatureMapSet>& sets,
                         const std::string& path, const nlohmann::json& extra) {
  if (sets.empty()) throw ConfigError("no feature maps to export");
  const auto k = static_cast<std::uint32_t>(sets.front().maps.size());
  if (k == 0) throw ConfigError("feature map set has no maps");
  const int w = sets.front().maps.front().width();
  const int h = sets.front().maps.front().height();
  for (const auto& s : sets) {
    if (s.maps.size() != k) throw ConfigError("inconsistent map count");
    for (const auto& m : s.maps) {
      if (m.width() != w || m.height() != h) {
        throw ConfigError("inconsistent map dimensions");
      }
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out.write("VSFM", 4);
  put32(out, kVersion);
  put32(out, static_cast<std::uint32_t>(sets.size()));
  put32(out, k);
  put32(out, static_cast<std::uint32_t>(w));
  put32(out, static_cast<std::uint32_t>(h));
  for (const auto& s : sets) {
    put32(out, s.id);
    out.put(static_cast<char>(s.label));
    for (const auto& m : s.maps) {
      out.write(reinterpret_cast<const char*>(m.cells().data()),
                static_cast<std::streamsize>(m.cells().size()));
    }
  }
  out.close();
  if (!out) throw ConfigError("write failed: " + path);

  nlohmann::ordered_json side;
  side["format"] = "VSFM";
  side["version"] = kVersion;
  side["file"] = path.substr(path.find_last_of('/') + 1);
  side["byte_size"] = vsfm_file_size(sets.size(), k, w, h);
  side["image_count"] = sets.size();
  side["maps_per_image"] = k;
  side["width"] = w;
  side["height"] = h;
  side["layout"] = "per image: u32 id, u8 label, k*height*width bytes row-major";
  std::vector<std::string> labels;
  for (const auto& m : sets.front().maps) labels.push_back(m.label());
  side["map_labels"] = labels;
  for (const auto& [key, value] : extra.items()) side[key] = value;
  std::ofstream js(path + ".json");
  if (!js) throw ConfigError("cannot write sidecar for " + path);
  js << side.dump(2) << '\n';
}

std::vector<FeatureMapSet> import_feature_maps(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "VSFM", 4) != 0) {
    throw ConfigError("not a VSFM file: " + path);
  }
  if (get32(in, path) != kVersion) {
    throw ConfigError("unsupported VSFM version in " + path);
  }
  const std::uint32_t count = get32(in, path);
  const std::uint32_t k = get32(in, path);
  const std::uint32_t w = get32(in, path);
  const std::uint32_t h = get32(in, path);
  if (k == 0 || w == 0 || h == 0 || w > 65536 || h > 65536) {
    throw ConfigError("bad VSFM dimensions in " + path);
  }

  // Map labels are kept in the sidecar when present.
  std::vector<std::string> labels(k);
  std::ifstream js(path + ".json");
  if (js) {
    try {
      const auto side = nlohmann::json::parse(js);
      if (side.contains("map_labels")) {
        auto l = side["map_labels"].get<std::vector<std::string>>();
        if (l.size() == k) labels = std::move(l);
      }
    } catch (const nlohmann::json::exception&) {
      // A damaged sidecar does not invalidate the binary payload.
    }
  }

  std::vector<FeatureMapSet> sets(count);
  std::vector<char> buf(static_cast<std::size_t>(w) * h);
  for (auto& s : sets) {
    s.id = get32(in, path);
    char label = 0;
    if (!in.get(label)) throw ConfigError("truncated VSFM file " + path);
    s.label = static_cast<std::uint8_t>(label);
    for (std::uint32_t m = 0; m < k; ++m) {
      if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size()))) {
        throw ConfigError("truncated VSFM file " + path);
      }
      ReconstructedMap map(static_cast<int>(w), static_cast<int>(h), labels[m]);
      for (std::uint32_t r = 0; r < h; ++r) {
        for (std::uint32_t c = 0; c < w; ++c) {
          const char v = buf[static_cast<std::size_t>(r) * w + c];
          if (v != 0 && v != 1) {
            throw ConfigError("VSFM map byte is not 0/1 in " + path);
          }
          map.set(static_cast<int>(r), static_cast<int>(c), v == 1);
        }
      }
      s.maps.push_back(std::move(map));
    }
  }
  return sets;
}

}  // namespace vcsel
